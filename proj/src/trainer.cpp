#include "twa/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "twa/synthetic.hpp"

namespace twa {

Method parse_method(std::string_view s) {
  if (s == "sft") return Method::Sft;
  if (s == "filter_sft") return Method::FilterSft;
  if (s == "twa") return Method::Twa;
  if (s == "twa_seq") return Method::TwaSeq;
  if (s == "twa_nl") return Method::TwaNl;
  if (s == "non_error_only") return Method::NonErrorOnly;
  if (s == "dpo") return Method::Dpo;
  throw UsageError("unknown method '" + std::string(s) + "'");
}

std::string_view name(Method m) {
  switch (m) {
    case Method::Sft: return "sft";
    case Method::FilterSft: return "filter_sft";
    case Method::Twa: return "twa";
    case Method::TwaSeq: return "twa_seq";
    case Method::TwaNl: return "twa_nl";
    case Method::NonErrorOnly: return "non_error_only";
    case Method::Dpo: return "dpo";
  }
  return "";
}

void TrainConfig::validate() const {
  if (batch_size <= 0) throw UsageError("batch_size must be positive");
  if (!(learning_rate > 0.0)) throw UsageError("learning_rate must be positive");
  if (total_steps <= 0) throw UsageError("total_steps must be positive");
  if (eval_every_steps <= 0) throw UsageError("eval_every_steps must be positive");
  if (!(dpo_beta > 0.0)) throw UsageError("dpo_beta must be positive");
  if (max_decode_len < 0) throw UsageError("max_decode_len must be non-negative");
}

void TrainConfig::apply(KeyValues& kv) {
  std::string m;
  take(kv, "method", m);
  if (!m.empty()) method = parse_method(m);
  take(kv, "batch_size", batch_size);
  take(kv, "learning_rate", learning_rate);
  take(kv, "total_steps", total_steps);
  take(kv, "eval_every_steps", eval_every_steps);
  take(kv, "seed", seed);
  take(kv, "ignore_off_trajectory", ignore_off_trajectory);
  take(kv, "dpo_beta", dpo_beta);
  take(kv, "clip_norm", clip_norm);
  take(kv, "nl_scaled", nl_scaled);
  take(kv, "max_decode_len", max_decode_len);
}

void apply_model_keys(KeyValues& kv, ModelConfig& config) {
  take(kv, "embed_dim", config.embed_dim);
  take(kv, "hidden_dim", config.hidden_dim);
  take(kv, "num_heads", config.num_heads);
  take(kv, "max_src_len", config.max_src_len);
  take(kv, "max_tgt_len", config.max_tgt_len);
  take(kv, "init_seed", config.seed);
}

std::vector<TrainingExample> prepare_examples(const Dataset& dataset, const Vocab& vocab, const TrainConfig& config) {
  const Dataset filtered = config.method == Method::FilterSft ? filter_error_free(dataset) : Dataset{};
  const Dataset& source = config.method == Method::FilterSft ? filtered : dataset;
  if (source.empty()) {
    throw DataError(config.method == Method::FilterSft ? "empty filtered dataset" : "empty training dataset");
  }
  std::vector<TrainingExample> out;
  out.reserve(source.size());
  for (const auto& ex : source.examples) {
    TrainingExample te;
    te.src = encode_ids(ex.source_text, vocab);
    const auto tok = encode(ex.output_text, vocab);
    te.tgt = tok.token_ids;
    te.has_error = !ex.spans.empty();
    switch (config.method) {
      case Method::Twa:
      case Method::TwaNl:
      case Method::NonErrorOnly:
        te.weights = assign_token_weights(tok, ex.spans, config.ignore_off_trajectory);
        break;
      default:
        te.weights = uniform_weights(te.tgt.size() - 1);
        break;
    }
    out.push_back(std::move(te));
  }
  return out;
}

std::vector<PairExample> prepare_pairs(const std::vector<PreferencePair>& pairs, const Vocab& vocab) {
  if (pairs.empty()) throw DataError("empty pair dataset");
  std::vector<PairExample> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    out.push_back({encode_ids(p.preferred.source_text, vocab), encode_ids(p.preferred.output_text, vocab),
                   encode_ids(p.dispreferred.output_text, vocab)});
  }
  return out;
}

LossReport<double> example_loss(Method method, const TrainingExample& ex, const Vector<double>& logp,
                                const TrainConfig& config) {
  switch (method) {
    case Method::Sft:
    case Method::FilterSft:
      return cross_entropy_loss<double>(logp);
    case Method::Twa:
      return twa_sequence_loss<double>(ex.weights, logp, {ErrorSpanLoss::Unlikelihood, config.nl_scaled});
    case Method::TwaNl:
      return twa_sequence_loss<double>(ex.weights, logp, {ErrorSpanLoss::NegativeLikelihood, config.nl_scaled});
    case Method::NonErrorOnly:
      return twa_sequence_loss<double>(ex.weights, logp, {ErrorSpanLoss::Ignore, config.nl_scaled});
    case Method::TwaSeq:
      return twa_seq_baseline_loss<double>(ex.has_error, logp);
    case Method::Dpo:
      break;
  }
  throw UsageError("example_loss: DPO is trained on pairs");
}

Metric oracle_edit_metric() {
  return {"oracle_edit_similarity", true,
          [](const std::string& h, const std::string& r) { return oracle_metric(h, r); }};
}

ValidationSet make_validation_set(const Dataset& references, const Vocab& vocab) {
  ValidationSet set;
  for (const auto& ex : references.examples) {
    set.sources.push_back(encode_ids(ex.source_text, vocab));
    set.references.push_back(ex.output_text);
  }
  return set;
}

std::vector<std::string> decode_all(const Seq2SeqModel<double>& model, const ValidationSet& set, const Vocab& vocab,
                                    int max_len) {
  if (max_len <= 0) max_len = model.config.max_tgt_len - 1;
  std::vector<std::string> out;
  out.reserve(set.sources.size());
  for (const auto& src : set.sources) out.push_back(decode(greedy_decode(model, src, max_len), vocab));
  return out;
}

std::vector<double> validation_values(const Seq2SeqModel<double>& model, const ValidationSet& set,
                                      const std::vector<Metric>& metrics, const Vocab& vocab, int max_len) {
  if (metrics.empty()) throw UsageError("validation needs at least one metric");
  const auto hyps = decode_all(model, set, vocab, max_len);
  std::vector<double> values(hyps.size(), 0.0);
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    double v = 0.0;
    for (const auto& m : metrics) {
      const double s = m.score(hyps[i], set.references[i]);
      v += m.higher_is_better ? -s : s;
    }
    values[i] = v / static_cast<double>(metrics.size());
  }
  return values;
}

double validation_score(const Seq2SeqModel<double>& model, const ValidationSet& set,
                        const std::vector<Metric>& metrics, const Vocab& vocab, int max_len) {
  if (metrics.empty()) throw UsageError("validation needs at least one metric");
  if (set.sources.empty()) return 0.0;
  const auto hyps = decode_all(model, set, vocab, max_len);
  double total = 0.0;
  for (const auto& m : metrics) {
    double sum = 0.0;
    for (std::size_t i = 0; i < hyps.size(); ++i) sum += m.score(hyps[i], set.references[i]);
    const double mean = sum / static_cast<double>(hyps.size());
    total += m.higher_is_better ? -mean : mean;
  }
  return total / static_cast<double>(metrics.size());
}

double sequence_logprob(const Seq2SeqModel<double>& model, const std::vector<int>& src, const std::vector<int>& tgt) {
  const auto logits = forward(model, src, tgt).logits;
  const Vector<double> logp = realized_logprobs(logits, std::span<const int>(tgt));
  return span_logprob<double>(logp);
}

double mean_cross_entropy(const Seq2SeqModel<double>& model, const std::vector<TrainingExample>& examples) {
  if (examples.empty()) return 0.0;
  double total = 0.0;
  for (const auto& ex : examples) total -= sequence_logprob(model, ex.src, ex.tgt);
  return total / static_cast<double>(examples.size());
}

namespace {

class Adam {
 public:
  explicit Adam(const Parameters<double>& like, double lr) : m_(like.zeros_like()), v_(like.zeros_like()), lr_(lr) {}

  void step(Parameters<double>& params, const Parameters<double>& grads) {
    ++t_;
    const double bc1 = 1.0 - std::pow(kBeta1, t_);
    const double bc2 = 1.0 - std::pow(kBeta2, t_);
    const auto p = params.tensors();
    const auto g = grads.tensors();
    const auto m = m_.tensors();
    const auto v = v_.tensors();
    for (std::size_t i = 0; i < p.size(); ++i) {
      *m[i] = kBeta1 * *m[i] + (1.0 - kBeta1) * *g[i];
      *v[i] = kBeta2 * *v[i] + (1.0 - kBeta2) * g[i]->cwiseProduct(*g[i]);
      p[i]->array() -= lr_ * (m[i]->array() / bc1) / ((v[i]->array() / bc2).sqrt() + kEps);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  Parameters<double> m_, v_;
  double lr_;
  int t_ = 0;
};

// Seeded reshuffle at each epoch boundary.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    rng_.shuffle(order_);
  }

  std::vector<std::size_t> next(int batch_size) {
    std::vector<std::size_t> batch;
    for (int i = 0; i < batch_size; ++i) {
      if (cursor_ == order_.size()) {
        rng_.shuffle(order_);
        cursor_ = 0;
      }
      batch.push_back(order_[cursor_++]);
    }
    return batch;
  }

 private:
  std::vector<std::size_t> order_;
  Rng rng_;
  std::size_t cursor_ = 0;
};

std::string describe_batch(int step, const std::vector<std::size_t>& batch) {
  std::ostringstream s;
  s << "non-finite loss at step " << step << " (batch examples";
  for (std::size_t i : batch) s << ' ' << i;
  s << ')';
  return s.str();
}

void clip(Parameters<double>& grads, double max_norm) {
  if (max_norm <= 0.0) return;
  const double norm = std::sqrt(squared_norm(grads));
  if (norm > max_norm) scale(grads, max_norm / norm);
}

// Shared optimization loop. `batch_loss` fills `grads` (zeroed) and returns the mean loss.
template <typename BatchLoss>
TrainResult run_training(const Seq2SeqModel<double>& initial, std::size_t n_items, const TrainConfig& config,
                         const ValidationSet& validation, const std::vector<Metric>& metrics, const Vocab& vocab,
                         const StepCallback& on_step, BatchLoss&& batch_loss) {
  config.validate();
  if (n_items == 0) throw DataError("empty training dataset");
  TrainResult result;
  Seq2SeqModel<double> model = initial;
  Adam adam(model.params, config.learning_rate);
  BatchSampler sampler(n_items, derive_seed(config.seed, "shuffle"));
  Parameters<double> grads = model.params.zeros_like();
  bool have_best = false;

  for (int step = 1; step <= config.total_steps; ++step) {
    const auto batch = sampler.next(config.batch_size);
    grads.for_each([](auto&&, Matrix<double>& m) { m.setZero(); });
    const double loss = batch_loss(model, batch, grads);
    if (!std::isfinite(loss) || !all_finite(grads)) throw NumericalError(describe_batch(step, batch));
    clip(grads, config.clip_norm);
    adam.step(model.params, grads);

    StepLog entry{step, loss, false, 0.0};
    if (step % config.eval_every_steps == 0 || step == config.total_steps) {
      // Evaluate a snapshot, never the live parameters.
      auto snapshot = std::make_shared<const Parameters<double>>(model.params);
      const Seq2SeqModel<double> frozen{model.config, *snapshot};
      const double score = validation_score(frozen, validation, metrics, vocab, config.max_decode_len);
      entry.has_validation = true;
      entry.validation_score = score;
      result.checkpoints.push_back({step, score, snapshot});
      if (!have_best || score < result.selected_score) {
        have_best = true;
        result.selected_score = score;
        result.selected_step = step;
        result.model = frozen;
      }
    }
    result.log.push_back(entry);
    if (on_step) on_step(step, model);
  }
  return result;
}

}  // namespace

TrainResult train(const Seq2SeqModel<double>& initial, const std::vector<TrainingExample>& examples,
                  const TrainConfig& config, const ValidationSet& validation, const std::vector<Metric>& metrics,
                  const Vocab& vocab, const StepCallback& on_step) {
  if (config.method == Method::Dpo) throw UsageError("DPO trains on preference pairs; use train_dpo");
  return run_training(initial, examples.size(), config, validation, metrics, vocab, on_step,
                      [&](const Seq2SeqModel<double>& model, const std::vector<std::size_t>& batch,
                          Parameters<double>& grads) {
                        const double inv = 1.0 / static_cast<double>(batch.size());
                        double loss = 0.0;
                        for (std::size_t idx : batch) {
                          const auto& ex = examples[idx];
                          auto fwd = forward(model, ex.src, ex.tgt);
                          const Vector<double> logp = realized_logprobs(fwd.logits, std::span<const int>(ex.tgt));
                          if (!logp.allFinite()) return std::numeric_limits<double>::quiet_NaN();
                          const auto report = example_loss(config.method, ex, logp, config);
                          loss += report.value;
                          const Vector<double> g = report.grad_logp * inv;
                          backward(model, fwd.trace, logit_gradient(fwd.logits, std::span<const int>(ex.tgt), g), grads);
                        }
                        return loss * inv;
                      });
}

TrainResult train_dpo(const Seq2SeqModel<double>& initial, const std::vector<PairExample>& pairs,
                      const TrainConfig& config, const ValidationSet& validation, const std::vector<Metric>& metrics,
                      const Vocab& vocab, const StepCallback& on_step) {
  if (pairs.empty()) throw DataError("empty pair dataset");
  // Frozen reference policy and its cached sequence log-probs.
  const Seq2SeqModel<double> reference = initial;
  std::vector<double> ref_preferred(pairs.size()), ref_dispreferred(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    ref_preferred[i] = sequence_logprob(reference, pairs[i].src, pairs[i].preferred);
    ref_dispreferred[i] = sequence_logprob(reference, pairs[i].src, pairs[i].dispreferred);
  }
  const double beta = config.dpo_beta;

  auto result = run_training(
      initial, pairs.size(), config, validation, metrics, vocab, on_step,
      [&](const Seq2SeqModel<double>& model, const std::vector<std::size_t>& batch, Parameters<double>& grads) {
        const double inv = 1.0 / static_cast<double>(batch.size());
        double loss = 0.0;
        for (std::size_t idx : batch) {
          const auto& p = pairs[idx];
          auto fw = forward(model, p.src, p.preferred);
          auto fl = forward(model, p.src, p.dispreferred);
          const Vector<double> lw = realized_logprobs(fw.logits, std::span<const int>(p.preferred));
          const Vector<double> ll = realized_logprobs(fl.logits, std::span<const int>(p.dispreferred));
          if (!lw.allFinite() || !ll.allFinite()) return std::numeric_limits<double>::quiet_NaN();
          const auto r = dpo_loss<double>(span_logprob<double>(lw), span_logprob<double>(ll), ref_preferred[idx],
                                          ref_dispreferred[idx], beta);
          loss += r.value;
          const Vector<double> gw = Vector<double>::Constant(lw.size(), r.grad_preferred * inv);
          const Vector<double> gl = Vector<double>::Constant(ll.size(), r.grad_dispreferred * inv);
          backward(model, fw.trace, logit_gradient(fw.logits, std::span<const int>(p.preferred), gw), grads);
          backward(model, fl.trace, logit_gradient(fl.logits, std::span<const int>(p.dispreferred), gl), grads);
        }
        return loss * inv;
      });

  result.dpo_reference_start = {ref_preferred.front(), ref_dispreferred.front()};
  result.dpo_reference_end = {sequence_logprob(reference, pairs.front().src, pairs.front().preferred),
                              sequence_logprob(reference, pairs.front().src, pairs.front().dispreferred)};
  return result;
}

void write_training_log(std::ostream& out, const std::vector<StepLog>& log) {
  out << "step,loss,validation_score\n";
  char buf[64];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof buf, "%.10g", e.loss);
    out << e.step << ',' << buf << ',';
    if (e.has_validation) {
      std::snprintf(buf, sizeof buf, "%.10g", e.validation_score);
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace twa
