#pragma once

// Sequence losses over realized-token log-probabilities.
//
// Every loss returns its value and dL/d(log p_t) for each realized token;
// gradients with respect to logits follow from the softmax chain rule
// (see model.hpp: logit_gradient).

#include <cmath>
#include <limits>
#include <stdexcept>

#include "twa/common.hpp"
#include "twa/tokenizer.hpp"

namespace twa {

/// Lower bound on 1 - p_span; the error-span loss is evaluated at
/// S = min(S, -kSpanClamp).
inline constexpr double kSpanClamp = 1e-7;

template <typename Scalar>
struct LossReport {
  Scalar value{0};
  Vector<Scalar> grad_logp;
};

enum class ErrorSpanLoss {
  Unlikelihood,        // -|w| log(1 - p_span)
  NegativeLikelihood,  // |w| log p_span
  Ignore,              // error tokens contribute nothing
};

struct SequenceLossOptions {
  ErrorSpanLoss error_loss = ErrorSpanLoss::Unlikelihood;
  bool scale_negative_likelihood = true;  // false: NL uses |w| = 1
};

/// log(1 - exp(s)) for s < 0.
template <typename Scalar>
Scalar log1mexp(Scalar s) {
  using std::exp;
  using std::expm1;
  using std::log;
  using std::log1p;
  if (!(s < Scalar(0))) throw std::domain_error("log1mexp requires s < 0");
  if (s > -Scalar(0.69314718055994530942)) return log(-expm1(s));
  return log1p(-exp(s));
}

template <typename Scalar>
Scalar span_logprob(const Eigen::Ref<const Vector<Scalar>>& logp) {
  Scalar s{0};
  for (Eigen::Index t = 0; t < logp.size(); ++t) s += logp[t];
  return s;
}

/// -|w| log(1 - exp(S)) with S the summed span log-probability. The gradient
/// |w| e^S / (1 - e^S) is shared by every token in the span.
template <typename Scalar>
LossReport<Scalar> twa_error_span_loss(const Eigen::Ref<const Vector<Scalar>>& logp, Scalar w) {
  using std::abs;
  using std::exp;
  using std::expm1;
  using std::min;
  const Scalar magnitude = abs(w);
  const Scalar s = min(span_logprob<Scalar>(logp), Scalar(-kSpanClamp));
  LossReport<Scalar> r;
  r.value = -magnitude * log1mexp(s);
  // e^S / (1 - e^S) = 1 / expm1(-S)
  const Scalar ds = magnitude / expm1(-s);
  r.grad_logp = Vector<Scalar>::Constant(logp.size(), ds);
  return r;
}

/// Cross-entropy on an on-trajectory span, or zero when off trajectory.
template <typename Scalar>
LossReport<Scalar> twa_non_error_span_loss(const Eigen::Ref<const Vector<Scalar>>& logp, bool off_trajectory) {
  LossReport<Scalar> r;
  if (off_trajectory) {
    r.grad_logp = Vector<Scalar>::Zero(logp.size());
    return r;
  }
  r.value = -span_logprob<Scalar>(logp);
  r.grad_logp = Vector<Scalar>::Constant(logp.size(), Scalar(-1));
  return r;
}

/// |w| * S. Minimizing drives the span probability toward zero without bound.
template <typename Scalar>
LossReport<Scalar> nl_span_loss(const Eigen::Ref<const Vector<Scalar>>& logp, Scalar w) {
  using std::abs;
  LossReport<Scalar> r;
  r.value = abs(w) * span_logprob<Scalar>(logp);
  r.grad_logp = Vector<Scalar>::Constant(logp.size(), abs(w));
  return r;
}

template <typename Scalar>
LossReport<Scalar> cross_entropy_loss(const Eigen::Ref<const Vector<Scalar>>& logp) {
  return twa_non_error_span_loss<Scalar>(logp, false);
}

/// Sum of span losses under a token weight vector: negative spans use the
/// configured error loss, weight-1 spans cross-entropy, weight-0 spans nothing.
template <typename Scalar>
LossReport<Scalar> twa_sequence_loss(const TokenWeightVector& weights,
                                     const Eigen::Ref<const Vector<Scalar>>& logp,
                                     const SequenceLossOptions& options = {}) {
  if (static_cast<Eigen::Index>(weights.size()) != logp.size()) {
    throw std::invalid_argument("twa_sequence_loss: " + std::to_string(weights.size()) +
                                " weights for " + std::to_string(logp.size()) + " tokens");
  }
  LossReport<Scalar> total;
  total.grad_logp = Vector<Scalar>::Zero(logp.size());
  for (const auto& span : weights.spans) {
    const Eigen::Index len = span.end - span.start;
    const auto segment = logp.segment(span.start, len);
    LossReport<Scalar> part;
    if (span.weight < 0.0) {
      const auto w = static_cast<Scalar>(span.weight);
      switch (options.error_loss) {
        case ErrorSpanLoss::Unlikelihood:
          part = twa_error_span_loss<Scalar>(segment, w);
          break;
        case ErrorSpanLoss::NegativeLikelihood:
          part = nl_span_loss<Scalar>(segment, options.scale_negative_likelihood ? w : Scalar(-1));
          break;
        case ErrorSpanLoss::Ignore:
          continue;
      }
    } else if (span.weight == 0.0) {
      continue;
    } else {
      part = twa_non_error_span_loss<Scalar>(segment, false);
    }
    total.value += part.value;
    total.grad_logp.segment(span.start, len) = part.grad_logp;
  }
  return total;
}

/// Sequence-level analogue: unlikelihood (|w| = 1) on any errored output,
/// cross-entropy otherwise.
template <typename Scalar>
LossReport<Scalar> twa_seq_baseline_loss(bool has_error, const Eigen::Ref<const Vector<Scalar>>& logp) {
  if (has_error) return twa_error_span_loss<Scalar>(logp, Scalar(-1));
  return cross_entropy_loss<Scalar>(logp);
}

template <typename Scalar>
struct DpoLossReport {
  Scalar value{0};
  Scalar grad_preferred{0};     // dL / d log p(preferred)
  Scalar grad_dispreferred{0};  // dL / d log p(dispreferred)
};

/// -log sigmoid(beta * ((lw - rw) - (ll - rl))) on sequence log-probs.
template <typename Scalar>
DpoLossReport<Scalar> dpo_loss(Scalar logp_preferred, Scalar logp_dispreferred, Scalar ref_logp_preferred,
                               Scalar ref_logp_dispreferred, Scalar beta) {
  using std::abs;
  using std::exp;
  using std::log1p;
  using std::max;
  const Scalar z = beta * ((logp_preferred - ref_logp_preferred) - (logp_dispreferred - ref_logp_dispreferred));
  DpoLossReport<Scalar> r;
  // softplus(-z)
  r.value = max(-z, Scalar(0)) + log1p(exp(-abs(z)));
  // sigmoid(-z), evaluated without overflow
  const Scalar sig_neg = z >= Scalar(0) ? exp(-z) / (Scalar(1) + exp(-z)) : Scalar(1) / (Scalar(1) + exp(z));
  r.grad_preferred = -beta * sig_neg;
  r.grad_dispreferred = beta * sig_neg;
  return r;
}

}  // namespace twa
