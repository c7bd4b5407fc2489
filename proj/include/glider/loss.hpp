#pragma once

// APO-zero preference loss with an added NLL term on the chosen sequence,
// evaluated on precomputed sequence log-probabilities:
//
//   rho_w = log pi(y_w) - log ref(y_w)      rho_l = log pi(y_l) - log ref(y_l)
//   apo   = 1 - sigmoid(beta * rho_w) + sigmoid(beta * rho_l)
//   nll   = -alpha * log pi(y_w)            (optionally divided by length)
//   total = apo + nll

#include <cmath>
#include <optional>

#include "glider/core.hpp"
#include "glider/json_io.hpp"

namespace glider {

inline constexpr double kDefaultBeta = 0.1;
inline constexpr double kDefaultAlpha = 1.0;

class LossInputs {
 public:
  LossInputs(double logp_w_policy, double logp_l_policy, double logp_w_ref, double logp_l_ref,
             double beta = kDefaultBeta, double alpha = kDefaultAlpha)
      : logp_w_policy_(logp_w_policy),
        logp_l_policy_(logp_l_policy),
        logp_w_ref_(logp_w_ref),
        logp_l_ref_(logp_l_ref),
        beta_(beta),
        alpha_(alpha) {
    for (double v : {logp_w_policy_, logp_l_policy_, logp_w_ref_, logp_l_ref_, beta_, alpha_}) {
      if (!std::isfinite(v)) throw ValidationError("loss_inputs_finite", "loss inputs must be finite");
    }
    for (double v : {logp_w_policy_, logp_l_policy_, logp_w_ref_, logp_l_ref_}) {
      if (v > 0.0) throw ValidationError("logprob_non_positive", "log-probabilities must be <= 0");
    }
    if (!(beta_ > 0.0)) throw ValidationError("beta_positive", "beta must be > 0");
    if (alpha_ < 0.0) throw ValidationError("alpha_non_negative", "alpha must be >= 0");
  }

  double logp_w_policy() const noexcept { return logp_w_policy_; }
  double logp_l_policy() const noexcept { return logp_l_policy_; }
  double logp_w_ref() const noexcept { return logp_w_ref_; }
  double logp_l_ref() const noexcept { return logp_l_ref_; }
  double beta() const noexcept { return beta_; }
  double alpha() const noexcept { return alpha_; }

 private:
  double logp_w_policy_, logp_l_policy_, logp_w_ref_, logp_l_ref_, beta_, alpha_;
};

struct LossOptions {
  /// Divide the NLL term by the chosen sequence's token count.
  std::optional<int> normalize_by_tokens;
};

struct LossOutput {
  double total;
  double apo_term;
  double nll_term;
  double rho_w;
  double rho_l;
};

/// d total / d each log-probability.
struct LossGradients {
  double logp_w_policy;
  double logp_l_policy;
  double logp_w_ref;
  double logp_l_ref;
};

namespace detail {

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double nll_scale(const LossOptions& options) {
  if (!options.normalize_by_tokens) return 1.0;
  if (*options.normalize_by_tokens <= 0) throw ValidationError("token_count_positive", "token count must be > 0");
  return 1.0 / static_cast<double>(*options.normalize_by_tokens);
}

}  // namespace detail

inline LossOutput apo_zero_nll(const LossInputs& in, const LossOptions& options = {}) {
  const double rho_w = in.logp_w_policy() - in.logp_w_ref();
  const double rho_l = in.logp_l_policy() - in.logp_l_ref();
  // 1 - s(x) == s(-x); this form keeps the term strictly positive.
  const double apo = detail::sigmoid(-in.beta() * rho_w) + detail::sigmoid(in.beta() * rho_l);
  const double nll = -in.alpha() * in.logp_w_policy() * detail::nll_scale(options);
  return LossOutput{apo + nll, apo, nll, rho_w, rho_l};
}

inline LossGradients loss_gradients(const LossInputs& in, const LossOptions& options = {}) {
  const double sw = detail::sigmoid(in.beta() * (in.logp_w_policy() - in.logp_w_ref()));
  const double sl = detail::sigmoid(in.beta() * (in.logp_l_policy() - in.logp_l_ref()));
  const double gw = in.beta() * sw * (1.0 - sw);
  const double gl = in.beta() * sl * (1.0 - sl);
  return LossGradients{-gw - in.alpha() * detail::nll_scale(options), gl, gw, -gl};
}

inline LossInputs loss_inputs_from_json(const json& j) {
  auto num = [&](const char* key) {
    const auto& v = detail::require(j, key);
    if (!v.is_number()) throw ValidationError("schema", std::string("field '") + key + "' must be a number");
    return v.get<double>();
  };
  double beta = j.contains("beta") ? num("beta") : kDefaultBeta;
  double alpha = j.contains("alpha") ? num("alpha") : kDefaultAlpha;
  return LossInputs(num("logp_w_policy"), num("logp_l_policy"), num("logp_w_ref"), num("logp_l_ref"), beta, alpha);
}

inline json to_json(const LossOutput& out) {
  return json{{"total", out.total},
              {"apo_term", out.apo_term},
              {"nll_term", out.nll_term},
              {"rho_w", out.rho_w},
              {"rho_l", out.rho_l}};
}

inline json to_json(const LossGradients& g) {
  return json{{"d_logp_w_policy", g.logp_w_policy},
              {"d_logp_l_policy", g.logp_l_policy},
              {"d_logp_w_ref", g.logp_w_ref},
              {"d_logp_l_ref", g.logp_l_ref}};
}

}  // namespace glider
