#pragma once

// Thin clients for the two external model services: text generation (infill,
// paraphrase) and pair scoring (embedding similarity, entailment, sequence
// log-likelihood). Both speak the same wire shape:
//
//   POST {base_url}/v1/generate   {"kind": ..., "items": [...]}
//   POST {base_url}/v1/score     {"kind": ..., "items": [[a, b], ...]}
//   response                      {"outputs": [...]}
//
// CALSET_OFFLINE=1 (or an empty base_url, or force_offline) swaps in
// deterministic stubs so the whole pipeline runs without network access.
// Stub responses are pure functions of the request body.

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "calset/core.hpp"

namespace calset {

struct ServiceEndpoint {
  std::string base_url;        // empty selects the offline stub
  double timeout_s = 30.0;
  int max_retries = 2;         // re-requests after the first attempt
  int backoff_ms = 100;        // linear backoff base; 0 in tests
  std::string auth_token;      // sent as a bearer token when non-empty
};

// Transport seam: one POST of a JSON body to a path under the endpoint.
// Tests substitute their own implementations to script service behavior.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual json post(const std::string& path, const json& body) = 0;
};

// Deterministic offline stand-in. Behavior, by request kind:
//   infill      each span filled with its original text reversed word-wise,
//               padded with "filler" tokens up to the span's min_tokens
//   paraphrase  fixed synonym table applied after rotating the reference
//               k words left for the k-th output
//   score       FNV-1a hash of (kind, a, b) mapped into [0,1); seq_loglik
//               mapped into [-4.1, -0.1] so log-likelihoods stay negative
class StubTransport : public Transport {
 public:
  json post(const std::string& path, const json& body) override;
};

class HttpTransport : public Transport {
 public:
  explicit HttpTransport(ServiceEndpoint endpoint);
  json post(const std::string& path, const json& body) override;

 private:
  ServiceEndpoint endpoint_;
};

bool offline_mode_forced();  // CALSET_OFFLINE=1

struct Demonstration {
  std::string original;
  std::string paraphrase;
};

enum class ScoreKind {
  embed_sim_ref,         // summary vs reference embedding similarity
  embed_sim_src,         // summary vs source embedding similarity
  entailment_supported,  // probability the premise supports the hypothesis
  seq_loglik,            // mean token log-likelihood of b given a, <= 0
};

std::string to_string(ScoreKind k);

struct InfillSpan {
  int min_tokens = 1;    // fill must carry at least this many tokens
  std::string original;  // span surface; stubs echo a transform of it
};

// Prompt layout used for paraphrase requests: instruction line, then each
// demonstration pair, then the reference. Exposed so tests can pin it.
std::string build_paraphrase_prompt(const std::string& instruction,
                                    const std::vector<Demonstration>& demos,
                                    const std::string& reference);

class ServiceClient {
 public:
  ServiceClient(ServiceEndpoint endpoint, std::shared_ptr<Transport> transport);

  // Picks HTTP or stub transport from the endpoint and CALSET_OFFLINE.
  static ServiceClient make(ServiceEndpoint endpoint, bool force_offline = false);

  bool offline() const { return offline_; }

  // One fill per sentinel in masked_text; fill i has >= spans[i].min_tokens
  // tokens. Under-filled spans are re-requested up to max_retries.
  std::vector<std::string> infill(const std::string& masked_text,
                                  const std::vector<InfillSpan>& spans) const;

  // n_outputs pairwise-distinct paraphrases of reference. Duplicate outputs
  // trigger a retry; still-duplicate results after max_retries are an error.
  std::vector<std::string> paraphrase(const std::string& reference,
                                      const std::vector<Demonstration>& demos,
                                      double temperature, int n_outputs,
                                      const std::string& instruction =
                                          "Paraphrase this abstract.") const;

  // One score per (a, b) pair, in request order. Response arity and range
  // are enforced here: entailment in [0,1], seq_loglik <= 0.
  std::vector<double> score_pairs(
      ScoreKind kind,
      const std::vector<std::pair<std::string, std::string>>& pairs) const;

 private:
  json post_with_retry(const std::string& path, const json& body) const;

  ServiceEndpoint endpoint_;
  std::shared_ptr<Transport> transport_;
  bool offline_ = false;
};

}  // namespace calset
