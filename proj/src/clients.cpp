// Service client operations, retry handling, and the offline stubs.

#include "calset/clients.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <map>
#include <set>
#include <thread>

#include <httplib.h>

namespace calset {

namespace {

// Fixed synonym table for the paraphrase stub. Lowercase keys; lookups are
// made on the lowercased token with trailing punctuation preserved.
const std::map<std::string, std::string>& synonym_table() {
  static const std::map<std::string, std::string> table = {
      {"improved", "ameliorated"}, {"patients", "subjects"},
      {"patient", "subject"},      {"treatment", "therapy"},
      {"showed", "demonstrated"},  {"study", "trial"},
      {"reduced", "decreased"},    {"increased", "elevated"},
      {"significant", "notable"},  {"results", "findings"},
      {"group", "cohort"},         {"risk", "hazard"},
      {"effect", "impact"},        {"dose", "dosage"},
      {"daily", "everyday"},       {"symptoms", "manifestations"},
      {"disease", "illness"},      {"trial", "experiment"},
  };
  return table;
}

std::vector<std::string> split_ws(const std::string& text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) words.push_back(text.substr(start, i - start));
  }
  return words;
}

std::string join_ws(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += " ";
    out += w;
  }
  return out;
}

// token -> synonym, keeping trailing punctuation (".", ",", ...) in place.
std::string apply_synonyms(const std::string& word) {
  std::size_t end = word.size();
  while (end > 0 && std::ispunct(static_cast<unsigned char>(word[end - 1]))) --end;
  std::string head = word.substr(0, end);
  std::string tail = word.substr(end);
  std::string key = lowercase(head);
  auto it = synonym_table().find(key);
  if (it == synonym_table().end()) return word;
  return it->second + tail;
}

double hash_unit(const std::string& payload) {
  return static_cast<double>(fnv1a64(payload) >> 11) * 0x1.0p-53;
}

json stub_generate(const json& body) {
  const std::string kind = body.value("kind", std::string{});
  json outputs = json::array();
  if (kind == "infill") {
    for (const auto& item : body.at("items")) {
      json fills = json::array();
      for (const auto& span : item.at("spans")) {
        int min_tokens = span.value("min_tokens", 1);
        std::vector<std::string> words = split_ws(span.value("original", std::string{}));
        std::reverse(words.begin(), words.end());
        while (static_cast<int>(words.size()) < min_tokens) {
          words.push_back("filler");
        }
        fills.push_back(join_ws(words));
      }
      outputs.push_back(fills);
    }
  } else if (kind == "paraphrase") {
    for (const auto& item : body.at("items")) {
      int n = item.value("n_outputs", 1);
      std::string reference = item.value("reference", std::string{});
      std::vector<std::string> words = split_ws(reference);
      json variants = json::array();
      for (int k = 0; k < n; ++k) {
        std::vector<std::string> rotated;
        if (!words.empty()) {
          std::size_t shift = static_cast<std::size_t>(k) % words.size();
          rotated.insert(rotated.end(), words.begin() + shift, words.end());
          rotated.insert(rotated.end(), words.begin(), words.begin() + shift);
        }
        for (auto& w : rotated) w = apply_synonyms(w);
        variants.push_back(join_ws(rotated));
      }
      outputs.push_back(variants);
    }
  } else {
    throw Error("stub service: unknown generate kind '" + kind + "'");
  }
  return json{{"outputs", outputs}};
}

json stub_score(const json& body) {
  const std::string kind = body.value("kind", std::string{});
  json outputs = json::array();
  for (const auto& item : body.at("items")) {
    if (!item.is_array() || item.size() != 2) {
      throw Error("stub service: score items must be [a, b] pairs");
    }
    std::string payload = kind + "\x1F" + item[0].get<std::string>() + "\x1F" +
                          item[1].get<std::string>();
    double u = hash_unit(payload);
    if (kind == "seq_loglik") {
      outputs.push_back(-(0.1 + 4.0 * u));
    } else {
      outputs.push_back(u);
    }
  }
  return json{{"outputs", outputs}};
}

}  // namespace

json StubTransport::post(const std::string& path, const json& body) {
  if (path == "/v1/generate") return stub_generate(body);
  if (path == "/v1/score") return stub_score(body);
  throw Error("stub service: unknown path '" + path + "'");
}

HttpTransport::HttpTransport(ServiceEndpoint endpoint)
    : endpoint_(std::move(endpoint)) {}

json HttpTransport::post(const std::string& path, const json& body) {
  httplib::Client client(endpoint_.base_url);
  client.set_connection_timeout(static_cast<int>(endpoint_.timeout_s), 0);
  client.set_read_timeout(static_cast<int>(endpoint_.timeout_s), 0);
  httplib::Headers headers;
  if (!endpoint_.auth_token.empty()) {
    headers.emplace("Authorization", "Bearer " + endpoint_.auth_token);
  }
  auto res = client.Post(path, headers, body.dump(), "application/json");
  if (!res) {
    throw Error("service request to " + endpoint_.base_url + path +
                " failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error("service request to " + endpoint_.base_url + path +
                " returned status " + std::to_string(res->status));
  }
  try {
    return json::parse(res->body);
  } catch (const json::exception& e) {
    throw Error("service response from " + path + " not valid JSON: " + e.what());
  }
}

bool offline_mode_forced() {
  const char* env = std::getenv("CALSET_OFFLINE");
  return env != nullptr && std::string(env) == "1";
}

std::string to_string(ScoreKind k) {
  switch (k) {
    case ScoreKind::embed_sim_ref: return "embed_sim_ref";
    case ScoreKind::embed_sim_src: return "embed_sim_src";
    case ScoreKind::entailment_supported: return "entailment_supported";
    case ScoreKind::seq_loglik: return "seq_loglik";
  }
  throw Error("unknown score kind enum value");
}

std::string build_paraphrase_prompt(const std::string& instruction,
                                    const std::vector<Demonstration>& demos,
                                    const std::string& reference) {
  std::string prompt = instruction + "\n\n";
  for (const auto& d : demos) {
    prompt += "Original: " + d.original + "\nParaphrase: " + d.paraphrase + "\n\n";
  }
  prompt += "Original: " + reference + "\nParaphrase:";
  return prompt;
}

ServiceClient::ServiceClient(ServiceEndpoint endpoint,
                             std::shared_ptr<Transport> transport)
    : endpoint_(std::move(endpoint)), transport_(std::move(transport)) {
  offline_ = dynamic_cast<StubTransport*>(transport_.get()) != nullptr;
}

ServiceClient ServiceClient::make(ServiceEndpoint endpoint, bool force_offline) {
  if (force_offline || offline_mode_forced() || endpoint.base_url.empty()) {
    return ServiceClient(std::move(endpoint), std::make_shared<StubTransport>());
  }
  auto ep = endpoint;
  return ServiceClient(std::move(endpoint), std::make_shared<HttpTransport>(ep));
}

json ServiceClient::post_with_retry(const std::string& path, const json& body) const {
  int attempts = endpoint_.max_retries + 1;
  for (int attempt = 0;; ++attempt) {
    try {
      json response = transport_->post(path, body);
      if (!response.contains("outputs") || !response["outputs"].is_array()) {
        throw Error("service response missing outputs array");
      }
      return response;
    } catch (const Error&) {
      if (attempt + 1 >= attempts) throw;
      if (endpoint_.backoff_ms > 0) {
        std::this_thread::sleep_for(
            std::chrono::milliseconds(endpoint_.backoff_ms * (attempt + 1)));
      }
    }
  }
}

std::vector<std::string> ServiceClient::infill(
    const std::string& masked_text, const std::vector<InfillSpan>& spans) const {
  if (spans.empty()) return {};  // nothing masked, no request
  json item;
  item["masked_text"] = masked_text;
  item["spans"] = json::array();
  for (const auto& s : spans) {
    item["spans"].push_back({{"min_tokens", s.min_tokens}, {"original", s.original}});
  }
  json body{{"kind", "infill"}, {"items", json::array({item})}};

  std::vector<std::string> fills;
  for (int attempt = 0; attempt <= endpoint_.max_retries; ++attempt) {
    json response = post_with_retry("/v1/generate", body);
    const json& outputs = response["outputs"];
    if (outputs.size() != 1 || !outputs[0].is_array() ||
        outputs[0].size() != spans.size()) {
      throw Error("infill: length mismatch in response");
    }
    fills.clear();
    bool underfilled = false;
    for (std::size_t i = 0; i < spans.size(); ++i) {
      std::string fill = outputs[0][i].get<std::string>();
      if (static_cast<int>(split_ws(fill).size()) < spans[i].min_tokens) {
        underfilled = true;
      }
      fills.push_back(std::move(fill));
    }
    if (!underfilled) return fills;
  }
  throw Error("infill: service returned under-filled span after retries");
}

std::vector<std::string> ServiceClient::paraphrase(
    const std::string& reference, const std::vector<Demonstration>& demos,
    double temperature, int n_outputs, const std::string& instruction) const {
  if (n_outputs < 1) throw Error("paraphrase: n_outputs must be >= 1");
  json item;
  item["prompt"] = build_paraphrase_prompt(instruction, demos, reference);
  item["reference"] = reference;
  item["temperature"] = temperature;
  item["n_outputs"] = n_outputs;
  json body{{"kind", "paraphrase"}, {"items", json::array({item})}};

  for (int attempt = 0; attempt <= endpoint_.max_retries; ++attempt) {
    json response = post_with_retry("/v1/generate", body);
    const json& outputs = response["outputs"];
    if (outputs.size() != 1 || !outputs[0].is_array() ||
        outputs[0].size() != static_cast<std::size_t>(n_outputs)) {
      throw Error("paraphrase: length mismatch in response");
    }
    std::vector<std::string> variants;
    std::set<std::string> seen;
    for (const auto& v : outputs[0]) {
      std::string text = v.get<std::string>();
      seen.insert(text);
      variants.push_back(std::move(text));
    }
    if (seen.size() == variants.size()) return variants;
  }
  throw Error("paraphrase: service returned duplicate outputs after retries");
}

std::vector<double> ServiceClient::score_pairs(
    ScoreKind kind,
    const std::vector<std::pair<std::string, std::string>>& pairs) const {
  if (pairs.empty()) throw Error("score_pairs: empty pair list");
  json items = json::array();
  for (const auto& [a, b] : pairs) {
    items.push_back(json::array({a, b}));
  }
  json body{{"kind", to_string(kind)}, {"items", items}};
  json response = post_with_retry("/v1/score", body);
  const json& outputs = response["outputs"];
  if (outputs.size() != pairs.size()) {
    throw Error("score_pairs: length mismatch in response (" +
                std::to_string(outputs.size()) + " scores for " +
                std::to_string(pairs.size()) + " pairs)");
  }
  std::vector<double> scores;
  scores.reserve(pairs.size());
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    if (!outputs[i].is_number()) {
      throw Error("score_pairs: non-numeric score at index " + std::to_string(i));
    }
    double v = outputs[i].get<double>();
    if (kind == ScoreKind::entailment_supported && (v < 0.0 || v > 1.0)) {
      throw Error("score_pairs: out-of-range entailment value " + std::to_string(v));
    }
    if (kind == ScoreKind::seq_loglik && v > 0.0) {
      throw Error("score_pairs: out-of-range seq_loglik value " + std::to_string(v) +
                  " (must be <= 0)");
    }
    scores.push_back(v);
  }
  return scores;
}

}  // namespace calset
