#pragma once

// Calibration training objectives as pure numeric kernels over supplied
// log-probabilities, sequence scores, and latent vectors. No autograd and
// no model code; where training needs gradients (margin rank, latent
// contrast) the analytic forms are provided alongside.

#include <vector>

#include "calset/core.hpp"

namespace calset {

// Negative log-likelihood of the reference: -sum of token log-probs.
// Inputs must be <= 0, so the loss is >= 0.
double mle_loss(const std::vector<double>& token_logprobs);

// Length-normalized sequence score f = tau * sum(logprobs) / L^alpha,
// L = token count. The ranking score fed to the margin rank loss.
double length_normalized_score(const std::vector<double>& token_logprobs,
                               double tau, double alpha);

// Pairwise margin rank loss over scores listed best-first:
//   sum over i < j of max(0, f_j - f_i + (j - i) * lambda_margin)
// Rank distance scales the required margin.
double margin_rank_loss(const std::vector<double>& scores, double lambda_margin);

// d(loss)/d(scores). At an exactly-zero hinge the active side is taken as
// inactive (subgradient 0).
std::vector<double> margin_rank_loss_grad(const std::vector<double>& scores,
                                          double lambda_margin);

// Latent alignment contrast over positive latents P and negative latents N:
//   -(1 / C(|P|,2)) * sum over unordered pairs (i, j) in P of
//       log[ exp(cos(h_i, h_j)/tau) / sum_k in N exp(cos(h_i, h_k)/tau) ]
// The denominator is anchored on the first element of each pair and runs
// over negatives only; include_positive_in_denominator adds the paired
// positive term back in.
double contrastive_loss(const std::vector<std::vector<double>>& positives,
                        const std::vector<std::vector<double>>& negatives,
                        double tau, bool include_positive_in_denominator = false);

struct ContrastiveGrads {
  std::vector<std::vector<double>> positives;
  std::vector<std::vector<double>> negatives;
};

ContrastiveGrads contrastive_loss_grad(
    const std::vector<std::vector<double>>& positives,
    const std::vector<std::vector<double>>& negatives, double tau,
    bool include_positive_in_denominator = false);

// Sequence-probability contrast on full-sequence log-likelihoods:
//   -mean over P of ll_p  -  mean over N of log(1 - exp(ll_n))
// exp(ll_n) is clamped to 1 - 1e-6 so a certain negative stays finite;
// clamp_engaged reports when that happened.
struct ConseqResult {
  double value = 0.0;
  bool clamp_engaged = false;
};

ConseqResult conseq_loss(const std::vector<double>& positive_loglik,
                         const std::vector<double>& negative_loglik);

// lambda_mle * mle + lambda_ca * calibration.
double combined_objective(double mle, double calibration, double lambda_mle,
                          double lambda_ca);

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace calset
