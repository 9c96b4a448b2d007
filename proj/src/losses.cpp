// Loss kernel implementations.

#include "calset/losses.hpp"

#include <algorithm>
#include <cmath>

namespace calset {

namespace {

void check_logprobs(const std::vector<double>& lps, const char* who) {
  if (lps.empty()) throw Error(std::string(who) + ": empty log-probability list");
  for (double lp : lps) {
    if (lp > 0.0) {
      throw Error(std::string(who) + ": log-probabilities must be <= 0");
    }
  }
}

double norm_of(const std::vector<double>& v, const char* who) {
  double s = 0.0;
  for (double x : v) s += x * x;
  double n = std::sqrt(s);
  if (n == 0.0) throw Error(std::string(who) + ": zero-norm latent vector");
  return n;
}

void check_latents(const std::vector<std::vector<double>>& positives,
                   const std::vector<std::vector<double>>& negatives,
                   double tau, const char* who) {
  if (positives.size() < 2) {
    throw Error(std::string(who) + ": needs at least 2 positive latents");
  }
  if (negatives.empty()) {
    throw Error(std::string(who) + ": needs at least 1 negative latent");
  }
  if (tau <= 0.0) throw Error(std::string(who) + ": tau must be > 0");
  std::size_t dim = positives.front().size();
  if (dim == 0) throw Error(std::string(who) + ": empty latent vector");
  for (const auto* side : {&positives, &negatives}) {
    for (const auto& h : *side) {
      if (h.size() != dim) {
        throw Error(std::string(who) + ": latent dimension mismatch");
      }
      norm_of(h, who);
    }
  }
}

}  // namespace

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) {
    throw Error("cosine_similarity: dimension mismatch");
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return dot / (norm_of(a, "cosine_similarity") * norm_of(b, "cosine_similarity"));
}

double mle_loss(const std::vector<double>& token_logprobs) {
  check_logprobs(token_logprobs, "mle_loss");
  double sum = 0.0;
  for (double lp : token_logprobs) sum += lp;
  return -sum;
}

double length_normalized_score(const std::vector<double>& token_logprobs,
                               double tau, double alpha) {
  check_logprobs(token_logprobs, "length_normalized_score");
  if (tau <= 0.0) throw Error("length_normalized_score: tau must be > 0");
  double sum = 0.0;
  for (double lp : token_logprobs) sum += lp;
  double L = static_cast<double>(token_logprobs.size());
  return tau * sum / std::pow(L, alpha);
}

double margin_rank_loss(const std::vector<double>& scores, double lambda_margin) {
  if (scores.size() < 2) throw Error("margin_rank_loss: needs at least 2 scores");
  if (lambda_margin < 0.0) throw Error("margin_rank_loss: lambda_margin must be >= 0");
  double loss = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    for (std::size_t j = i + 1; j < scores.size(); ++j) {
      double margin = static_cast<double>(j - i) * lambda_margin;
      loss += std::max(0.0, scores[j] - scores[i] + margin);
    }
  }
  return loss;
}

std::vector<double> margin_rank_loss_grad(const std::vector<double>& scores,
                                          double lambda_margin) {
  if (scores.size() < 2) throw Error("margin_rank_loss_grad: needs at least 2 scores");
  std::vector<double> grad(scores.size(), 0.0);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    for (std::size_t j = i + 1; j < scores.size(); ++j) {
      double margin = static_cast<double>(j - i) * lambda_margin;
      if (scores[j] - scores[i] + margin > 0.0) {
        grad[j] += 1.0;
        grad[i] -= 1.0;
      }
    }
  }
  return grad;
}

namespace {

// Shared forward pass: cosine tables and per-pair softmax weights.
struct ContrastForward {
  std::size_t np = 0, nn = 0, dim = 0;
  double inv_pairs = 0.0;          // 1 / C(|P|, 2)
  std::vector<double> pos_norms, neg_norms;
  std::vector<std::vector<double>> cos_pp;  // [i][j] over positives
  std::vector<std::vector<double>> cos_pn;  // [i][k] positive vs negative
  double loss = 0.0;
};

ContrastForward contrast_forward(const std::vector<std::vector<double>>& P,
                                 const std::vector<std::vector<double>>& N,
                                 double tau, bool include_positive) {
  ContrastForward f;
  f.np = P.size();
  f.nn = N.size();
  f.dim = P.front().size();
  f.inv_pairs = 2.0 / (static_cast<double>(f.np) * static_cast<double>(f.np - 1));
  f.pos_norms.resize(f.np);
  f.neg_norms.resize(f.nn);
  for (std::size_t i = 0; i < f.np; ++i) f.pos_norms[i] = norm_of(P[i], "contrastive_loss");
  for (std::size_t k = 0; k < f.nn; ++k) f.neg_norms[k] = norm_of(N[k], "contrastive_loss");

  auto dot = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t d = 0; d < f.dim; ++d) s += a[d] * b[d];
    return s;
  };
  f.cos_pp.assign(f.np, std::vector<double>(f.np, 0.0));
  f.cos_pn.assign(f.np, std::vector<double>(f.nn, 0.0));
  for (std::size_t i = 0; i < f.np; ++i) {
    for (std::size_t j = 0; j < f.np; ++j) {
      if (i != j) f.cos_pp[i][j] = dot(P[i], P[j]) / (f.pos_norms[i] * f.pos_norms[j]);
    }
    for (std::size_t k = 0; k < f.nn; ++k) {
      f.cos_pn[i][k] = dot(P[i], N[k]) / (f.pos_norms[i] * f.neg_norms[k]);
    }
  }

  double loss = 0.0;
  for (std::size_t i = 0; i < f.np; ++i) {
    for (std::size_t j = i + 1; j < f.np; ++j) {
      // log-sum-exp over the denominator terms, anchored on h_i.
      double m = -1.0 / tau;
      for (std::size_t k = 0; k < f.nn; ++k) {
        m = std::max(m, f.cos_pn[i][k] / tau);
      }
      if (include_positive) m = std::max(m, f.cos_pp[i][j] / tau);
      double z = 0.0;
      for (std::size_t k = 0; k < f.nn; ++k) {
        z += std::exp(f.cos_pn[i][k] / tau - m);
      }
      if (include_positive) z += std::exp(f.cos_pp[i][j] / tau - m);
      loss += -f.cos_pp[i][j] / tau + (m + std::log(z));
    }
  }
  f.loss = loss * f.inv_pairs;
  return f;
}

}  // namespace

double contrastive_loss(const std::vector<std::vector<double>>& positives,
                        const std::vector<std::vector<double>>& negatives,
                        double tau, bool include_positive_in_denominator) {
  check_latents(positives, negatives, tau, "contrastive_loss");
  return contrast_forward(positives, negatives, tau,
                          include_positive_in_denominator).loss;
}

ContrastiveGrads contrastive_loss_grad(
    const std::vector<std::vector<double>>& positives,
    const std::vector<std::vector<double>>& negatives, double tau,
    bool include_positive_in_denominator) {
  check_latents(positives, negatives, tau, "contrastive_loss_grad");
  ContrastForward f = contrast_forward(positives, negatives, tau,
                                       include_positive_in_denominator);

  ContrastiveGrads grads;
  grads.positives.assign(f.np, std::vector<double>(f.dim, 0.0));
  grads.negatives.assign(f.nn, std::vector<double>(f.dim, 0.0));

  // d cos(a, b) / d a = (b / |b| - cos * a / |a|) / |a|, evaluated through
  // the stored norms and cosine tables.
  auto add_dcos = [&](std::vector<double>& out, const std::vector<double>& a,
                      double a_norm, const std::vector<double>& b, double b_norm,
                      double cos_ab, double scale) {
    for (std::size_t d = 0; d < f.dim; ++d) {
      out[d] += scale * (b[d] / (a_norm * b_norm) - cos_ab * a[d] / (a_norm * a_norm));
    }
  };

  for (std::size_t i = 0; i < f.np; ++i) {
    for (std::size_t j = i + 1; j < f.np; ++j) {
      // Softmax weights of the denominator, anchored on h_i.
      double m = -1.0 / tau;
      for (std::size_t k = 0; k < f.nn; ++k) m = std::max(m, f.cos_pn[i][k] / tau);
      if (include_positive_in_denominator) m = std::max(m, f.cos_pp[i][j] / tau);
      double z = 0.0;
      std::vector<double> w(f.nn, 0.0);
      for (std::size_t k = 0; k < f.nn; ++k) {
        w[k] = std::exp(f.cos_pn[i][k] / tau - m);
        z += w[k];
      }
      double w_pos = 0.0;
      if (include_positive_in_denominator) {
        w_pos = std::exp(f.cos_pp[i][j] / tau - m);
        z += w_pos;
      }
      for (auto& wk : w) wk /= z;
      w_pos /= z;

      const double c = f.inv_pairs / tau;
      // Numerator term -cos(h_i, h_j)/tau.
      add_dcos(grads.positives[i], positives[i], f.pos_norms[i], positives[j],
               f.pos_norms[j], f.cos_pp[i][j], -c);
      add_dcos(grads.positives[j], positives[j], f.pos_norms[j], positives[i],
               f.pos_norms[i], f.cos_pp[i][j], -c);
      // Denominator log-sum-exp terms.
      for (std::size_t k = 0; k < f.nn; ++k) {
        add_dcos(grads.positives[i], positives[i], f.pos_norms[i], negatives[k],
                 f.neg_norms[k], f.cos_pn[i][k], c * w[k]);
        add_dcos(grads.negatives[k], negatives[k], f.neg_norms[k], positives[i],
                 f.pos_norms[i], f.cos_pn[i][k], c * w[k]);
      }
      if (include_positive_in_denominator) {
        add_dcos(grads.positives[i], positives[i], f.pos_norms[i], positives[j],
                 f.pos_norms[j], f.cos_pp[i][j], c * w_pos);
        add_dcos(grads.positives[j], positives[j], f.pos_norms[j], positives[i],
                 f.pos_norms[i], f.cos_pp[i][j], c * w_pos);
      }
    }
  }
  return grads;
}

ConseqResult conseq_loss(const std::vector<double>& positive_loglik,
                         const std::vector<double>& negative_loglik) {
  if (positive_loglik.empty() || negative_loglik.empty()) {
    throw Error("conseq_loss: both positive and negative log-likelihoods required");
  }
  for (double ll : positive_loglik) {
    if (ll > 0.0) throw Error("conseq_loss: log-likelihoods must be <= 0");
  }
  for (double ll : negative_loglik) {
    if (ll > 0.0) throw Error("conseq_loss: log-likelihoods must be <= 0");
  }
  ConseqResult result;
  double pos_mean = 0.0;
  for (double ll : positive_loglik) pos_mean += ll;
  pos_mean /= static_cast<double>(positive_loglik.size());

  constexpr double kClamp = 1.0 - 1e-6;
  double neg_mean = 0.0;
  for (double ll : negative_loglik) {
    double p = std::exp(ll);
    if (p > kClamp) {
      p = kClamp;
      result.clamp_engaged = true;
    }
    neg_mean += std::log1p(-p);
  }
  neg_mean /= static_cast<double>(negative_loglik.size());

  result.value = -pos_mean - neg_mean;
  return result;
}

double combined_objective(double mle, double calibration, double lambda_mle,
                          double lambda_ca) {
  return lambda_mle * mle + lambda_ca * calibration;
}

}  // namespace calset
