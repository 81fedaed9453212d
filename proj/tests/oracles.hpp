#pragma once

// Independent reference implementations used by the unit tests and the
// acceptance suite. They favour obviousness over speed.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "twa/annotations.hpp"
#include "twa/compare.hpp"
#include "twa/losses.hpp"
#include "twa/model.hpp"
#include "twa/pairs.hpp"
#include "twa/tokenizer.hpp"

namespace twa::oracle {

/// Per-token weights straight from the rules, one position at a time.
inline std::vector<double> token_weights(const TokenizedOutput& tok, const std::vector<ErrorSpan>& spans,
                                         bool ignore_off_trajectory) {
  const std::size_t n = tok.token_ids.size() - 1;
  std::vector<double> severity(n, 0.0);
  int first_error = -1;
  for (std::size_t t = 0; t < n; ++t) {
    const CharRange r = tok.char_ranges[t + 1];
    for (const auto& s : spans) {
      const int overlap = std::min(r.end, s.end_char) - std::max(r.start, s.start_char);
      if (overlap >= 1) severity[t] = std::max(severity[t], training_weight(s.severity));
    }
    if (severity[t] > 0 && first_error < 0) first_error = static_cast<int>(t);
  }
  std::vector<double> w(n);
  for (std::size_t t = 0; t < n; ++t) {
    if (severity[t] > 0) {
      w[t] = -severity[t];
    } else {
      const bool after = first_error >= 0 && static_cast<int>(t) > first_error;
      w[t] = ignore_off_trajectory && after ? 0.0 : 1.0;
    }
  }
  return w;
}

/// Every (i, j) with i preferred over j, enumerated over all ordered pairs.
inline std::vector<std::tuple<std::string, std::string, std::string>> brute_force_pairs(
    const Dataset& dataset, const PairConfig& config, const TokenCountFn& count) {
  std::vector<std::tuple<std::string, std::string, std::string>> out;
  for (const auto& g : dataset.groups()) {
    std::vector<const AnnotatedExample*> subs, refs;
    for (auto i : g.indices) {
      const auto& ex = dataset.examples[i];
      (ex.is_reference ? refs : subs).push_back(&ex);
    }
    const auto score = [&](const AnnotatedExample* e) { return pair_score(*e, config.score_mode, count); };
    if (config.preferred == PreferredSource::ReferenceOnly) {
      std::vector<const AnnotatedExample*> chosen;
      if (config.dispreferred == DispreferredSource::AllSubmissions) {
        chosen = subs;
      } else if (!subs.empty()) {
        const bool best = config.dispreferred == DispreferredSource::BestSubmission;
        const AnnotatedExample* pick = nullptr;
        for (const auto* s : subs) {
          if (!pick) {
            pick = s;
            continue;
          }
          const double a = score(s), b = score(pick);
          const bool better = best ? a < b : a > b;
          if (better || (a == b && s->system_id < pick->system_id)) pick = s;
        }
        chosen.push_back(pick);
      }
      for (const auto* r : refs) {
        for (const auto* s : chosen) out.emplace_back(g.source_id, r->system_id, s->system_id);
      }
      continue;
    }
    for (const auto* a : subs) {
      for (const auto* b : subs) {
        if (score(a) < score(b)) out.emplace_back(g.source_id, a->system_id, b->system_id);
      }
    }
    if (config.preferred == PreferredSource::ReferenceAndSubmissions) {
      for (const auto* r : refs) {
        for (const auto* s : subs) out.emplace_back(g.source_id, r->system_id, s->system_id);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Rank clusters by exhaustive search: among all 2^(n-1) ways of cutting
/// the best-first order into consecutive clusters, returns the one where
/// every cut sits exactly at the first system significantly different from
/// some earlier member of its cluster. Returns an empty vector when no or
/// several segmentations qualify.
inline std::vector<int> cluster_brute_force(const std::vector<std::size_t>& order,
                                            const std::vector<std::vector<double>>& p, double alpha) {
  const std::size_t n = order.size();
  std::vector<int> found;
  int matches = 0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << (n - 1)); ++mask) {
    std::vector<std::size_t> starts{0};
    for (std::size_t k = 1; k < n; ++k) {
      if (mask >> (k - 1) & 1) starts.push_back(k);
    }
    starts.push_back(n);
    bool consistent = true;
    for (std::size_t c = 0; c + 1 < starts.size() && consistent; ++c) {
      const auto sig_before = [&](std::size_t k) {
        for (std::size_t j = starts[c]; j < k; ++j) {
          if (p[order[k]][order[j]] < alpha) return true;
        }
        return false;
      };
      for (std::size_t k = starts[c] + 1; k < starts[c + 1]; ++k) consistent = consistent && !sig_before(k);
      if (starts[c + 1] < n) consistent = consistent && sig_before(starts[c + 1]);
    }
    if (!consistent) continue;
    ++matches;
    found.assign(n, 0);
    for (std::size_t c = 0; c + 1 < starts.size(); ++c) {
      for (std::size_t k = starts[c]; k < starts[c + 1]; ++k) found[order[k]] = static_cast<int>(c) + 1;
    }
  }
  return matches == 1 ? found : std::vector<int>{};
}

/// Relative error with an absolute floor for near-zero entries.
inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

struct GradientCheck {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
};

/// Compares backward() of `loss(model)` to a five-point central difference
/// over every parameter coordinate. `analytic` must return the loss
/// gradients for the same loss evaluated by `value`.
inline GradientCheck check_parameter_gradient(Seq2SeqModel<double> model,
                                              const std::function<double(const Seq2SeqModel<double>&)>& value,
                                              const Parameters<double>& analytic, double h = 1e-3) {
  GradientCheck out;
  auto grads = analytic.tensors();
  auto params = model.params.tensors();
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (Eigen::Index i = 0; i < params[k]->size(); ++i) {
      double& x = params[k]->data()[i];
      const double saved = x;
      const auto at = [&](double offset) {
        x = saved + offset;
        return value(model);
      };
      const double numeric = (at(-2 * h) - 8 * at(-h) + 8 * at(h) - at(2 * h)) / (12 * h);
      x = saved;
      out.max_relative_error = std::max(out.max_relative_error, relative_error(grads[k]->data()[i], numeric));
      ++out.coordinates;
    }
  }
  return out;
}

}  // namespace twa::oracle

namespace twa::oracle {

enum class LossKind { ErrorSpan, NonErrorSpan, Sequence, NegativeLikelihood, SequenceBaseline, Dpo };

inline const char* loss_kind_name(LossKind k) {
  switch (k) {
    case LossKind::ErrorSpan: return "twa_error_span_loss";
    case LossKind::NonErrorSpan: return "twa_non_error_span_loss";
    case LossKind::Sequence: return "twa_sequence_loss";
    case LossKind::NegativeLikelihood: return "nl_span_loss";
    case LossKind::SequenceBaseline: return "twa_seq_baseline_loss";
    case LossKind::Dpo: return "dpo_loss";
  }
  return "?";
}

/// One random instance of `kind` composed with a random tiny model; returns
/// the worst relative error between backward() and central differences over
/// every parameter coordinate.
inline GradientCheck composed_gradient_check(LossKind kind, std::uint64_t seed) {
  Rng rng(seed);
  ModelConfig c;
  c.vocab_size = 11;
  c.embed_dim = 8;
  c.hidden_dim = 8;
  c.num_heads = 2;
  c.max_src_len = 8;
  c.max_tgt_len = 8;
  c.seed = seed;
  auto model = make_model<double>(c);
  model.params.for_each([&](auto&&, Matrix<double>& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-0.5, 0.5);
  });
  const auto ids = [&](int len) {
    std::vector<int> v{kBos};
    for (int i = 0; i < len; ++i) v.push_back(rng.between(4, c.vocab_size - 1));
    v.push_back(kEos);
    return v;
  };
  const std::vector<int> src = ids(rng.between(1, 5));
  const std::vector<int> tgt = ids(rng.between(1, 5));
  const std::vector<int> other = ids(rng.between(1, 5));
  const Eigen::Index n = static_cast<Eigen::Index>(tgt.size()) - 1;

  TokenWeightVector weights;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double pick = rng.uniform();
    weights.weights.push_back(pick < 0.35 ? -static_cast<double>(rng.between(1, 5)) : pick < 0.5 ? 0.0 : 1.0);
  }
  weights.spans = group_weight_spans(weights.weights);
  const double w = -rng.uniform(0.1, 5.0);
  const bool flag = rng.bernoulli(0.5);
  const double beta = rng.uniform(0.05, 1.0);
  const double ref_w = rng.uniform(-12.0, -2.0), ref_l = rng.uniform(-12.0, -2.0);

  const auto single = [&](const Vector<double>& logp) -> LossReport<double> {
    switch (kind) {
      case LossKind::ErrorSpan: return twa_error_span_loss<double>(logp, w);
      case LossKind::NonErrorSpan: return twa_non_error_span_loss<double>(logp, false);
      case LossKind::Sequence: return twa_sequence_loss<double>(weights, logp);
      case LossKind::NegativeLikelihood: return nl_span_loss<double>(logp, w);
      case LossKind::SequenceBaseline: return twa_seq_baseline_loss<double>(flag, logp);
      case LossKind::Dpo: break;
    }
    return {};
  };
  const auto value = [&](const Seq2SeqModel<double>& m) {
    const auto lp = realized_logprobs<double>(forward(m, src, tgt).logits, tgt);
    if (kind != LossKind::Dpo) return single(lp).value;
    const auto lo = realized_logprobs<double>(forward(m, src, other).logits, other);
    return dpo_loss<double>(lp.sum(), lo.sum(), ref_w, ref_l, beta).value;
  };

  auto grads = model.params.zeros_like();
  auto fp = forward(model, src, tgt);
  const auto lp = realized_logprobs<double>(fp.logits, tgt);
  if (kind != LossKind::Dpo) {
    const auto r = single(lp);
    backward(model, fp.trace, logit_gradient<double>(fp.logits, tgt, r.grad_logp), grads);
  } else {
    auto fo = forward(model, src, other);
    const auto lo = realized_logprobs<double>(fo.logits, other);
    const auto r = dpo_loss<double>(lp.sum(), lo.sum(), ref_w, ref_l, beta);
    backward(model, fp.trace, logit_gradient<double>(fp.logits, tgt, Vector<double>::Constant(n, r.grad_preferred)),
             grads);
    backward(model, fo.trace,
             logit_gradient<double>(fo.logits, other,
                                    Vector<double>::Constant(static_cast<Eigen::Index>(other.size()) - 1,
                                                             r.grad_dispreferred)),
             grads);
  }
  return check_parameter_gradient(model, value, grads);
}

}  // namespace twa::oracle

namespace twa::oracle {

/// Source groups with 0-6 submissions over a small score range (so ties are
/// common) and an optional reference.
inline Dataset random_pair_dataset(Rng& rng, int sources) {
  Dataset d;
  for (int s = 0; s < sources; ++s) {
    const std::string id = "src" + std::to_string(s);
    const int subs = rng.between(0, 6);
    std::vector<int> systems(8);
    for (int k = 0; k < 8; ++k) systems[static_cast<std::size_t>(k)] = k;
    rng.shuffle(systems);
    for (int k = 0; k < subs; ++k) {
      AnnotatedExample ex;
      ex.source_id = id;
      ex.system_id = "sys" + std::to_string(systems[static_cast<std::size_t>(k)]);
      ex.source_text = "s";
      const int len = rng.between(1, 8);
      ex.output_text = std::string(static_cast<std::size_t>(len), 'x');
      const int n = rng.between(0, 2);
      for (int e = 0; e < n; ++e) {
        ex.spans.push_back({0, 1, "c", rng.bernoulli(0.5) ? Severity::Minor : Severity::Major});
      }
      d.examples.push_back(std::move(ex));
    }
    if (rng.bernoulli(0.8)) {
      AnnotatedExample ref;
      ref.source_id = id;
      ref.system_id = "ref";
      ref.source_text = "s";
      ref.output_text = "xx";
      ref.is_reference = true;
      d.examples.push_back(std::move(ref));
    }
  }
  return d;
}

inline std::vector<PairConfig> all_pair_configs() {
  std::vector<PairConfig> out;
  for (auto mode : {ScoreMode::Sum, ScoreMode::Mean}) {
    for (auto d : {DispreferredSource::BestSubmission, DispreferredSource::WorstSubmission,
                   DispreferredSource::AllSubmissions}) {
      out.push_back({PreferredSource::ReferenceOnly, d, mode});
    }
    out.push_back({PreferredSource::AllSubmissions, DispreferredSource::AllSubmissions, mode});
    out.push_back({PreferredSource::ReferenceAndSubmissions, DispreferredSource::AllSubmissions, mode});
  }
  return out;
}

inline int char_count(const AnnotatedExample& ex) { return static_cast<int>(ex.output_text.size()); }

inline std::vector<std::tuple<std::string, std::string, std::string>> pair_keys(const std::vector<PreferencePair>& p) {
  std::vector<std::tuple<std::string, std::string, std::string>> out;
  for (const auto& x : p) out.emplace_back(x.source_id, x.preferred.system_id, x.dispreferred.system_id);
  return out;
}

}  // namespace twa::oracle

namespace twa::oracle {

/// Systems whose per-example scores are planted means plus uniform noise.
inline std::vector<SystemScores> planted_systems(Rng& rng, const std::vector<double>& means, int examples,
                                                 double noise) {
  std::vector<SystemScores> out;
  for (std::size_t s = 0; s < means.size(); ++s) {
    SystemScores sys{"sys" + std::to_string(s), {}};
    for (int i = 0; i < examples; ++i) sys.values.push_back(means[s] + rng.uniform(-noise, noise));
    out.push_back(std::move(sys));
  }
  return out;
}

}  // namespace twa::oracle
