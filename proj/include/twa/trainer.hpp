#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "twa/annotations.hpp"
#include "twa/config.hpp"
#include "twa/losses.hpp"
#include "twa/model.hpp"
#include "twa/pairs.hpp"
#include "twa/tokenizer.hpp"

namespace twa {

enum class Method {
  Sft,           // cross-entropy on every output
  FilterSft,     // cross-entropy on references and error-free submissions only
  Twa,           // span unlikelihood on errors, cross-entropy elsewhere
  TwaSeq,        // sequence unlikelihood on errored outputs, cross-entropy otherwise
  TwaNl,         // Twa with span negative likelihood in place of unlikelihood
  NonErrorOnly,  // cross-entropy on non-error tokens, error tokens ignored
  Dpo,           // preference pairs against a frozen copy of the initial model
};

Method parse_method(std::string_view s);
std::string_view name(Method m);

/// Defaults are sized for the small synthetic model, not for large-batch
/// fine-tuning of a production translation model.
struct TrainConfig {
  Method method = Method::Twa;
  int batch_size = 16;  // sequences, or pairs for DPO
  double learning_rate = 1e-3;
  int total_steps = 2000;
  int eval_every_steps = 100;
  std::uint64_t seed = 0;
  bool ignore_off_trajectory = true;
  double dpo_beta = 0.1;
  double clip_norm = 1.0;   // global gradient norm; <= 0 disables
  bool nl_scaled = true;    // NL error loss carries |w|
  int max_decode_len = 0;   // 0: model max_tgt_len - 1

  void validate() const;
  /// Consumes recognized keys from `kv`.
  void apply(KeyValues& kv);
};

/// Consumes the model keys (embed_dim, hidden_dim, num_heads, max_src_len,
/// max_tgt_len, init_seed) from `kv`.
void apply_model_keys(KeyValues& kv, ModelConfig& config);

struct TrainingExample {
  std::vector<int> src;
  std::vector<int> tgt;  // BOS ... EOS
  TokenWeightVector weights;
  bool has_error = false;
};

struct PairExample {
  std::vector<int> src;
  std::vector<int> preferred;
  std::vector<int> dispreferred;
};

/// Tokenizes and weights the dataset for `config.method`.
/// FilterSft throws DataError("empty filtered dataset") when nothing survives.
std::vector<TrainingExample> prepare_examples(const Dataset& dataset, const Vocab& vocab, const TrainConfig& config);
std::vector<PairExample> prepare_pairs(const std::vector<PreferencePair>& pairs, const Vocab& vocab);

/// Per-sequence loss for a non-DPO method, as used by train().
LossReport<double> example_loss(Method method, const TrainingExample& ex, const Vector<double>& logp,
                                const TrainConfig& config);

struct Metric {
  std::string name;
  bool higher_is_better = true;
  std::function<double(const std::string& hypothesis, const std::string& reference)> score;
};

/// Normalized edit similarity against the clean reference.
Metric oracle_edit_metric();

struct ValidationSet {
  std::vector<std::vector<int>> sources;
  std::vector<std::string> references;
};

/// Uses every example's source and output text (intended for reference sets).
ValidationSet make_validation_set(const Dataset& references, const Vocab& vocab);

std::vector<std::string> decode_all(const Seq2SeqModel<double>& model, const ValidationSet& set, const Vocab& vocab,
                                    int max_len = 0);

/// Per-example orientation-normalized metric value (lower is better),
/// averaged over metrics.
std::vector<double> validation_values(const Seq2SeqModel<double>& model, const ValidationSet& set,
                                      const std::vector<Metric>& metrics, const Vocab& vocab, int max_len = 0);

/// Mean over metrics (higher-is-better ones negated) of the mean over
/// examples, using greedy decodes. Lower is better.
double validation_score(const Seq2SeqModel<double>& model, const ValidationSet& set,
                        const std::vector<Metric>& metrics, const Vocab& vocab, int max_len = 0);

struct CheckpointRecord {
  int step = 0;
  double validation_score = 0.0;
  std::shared_ptr<const Parameters<double>> snapshot;
};

struct StepLog {
  int step = 0;
  double loss = 0.0;
  bool has_validation = false;
  double validation_score = 0.0;
};

struct TrainResult {
  Seq2SeqModel<double> model;  // selected checkpoint
  int selected_step = 0;
  double selected_score = 0.0;
  std::vector<CheckpointRecord> checkpoints;
  std::vector<StepLog> log;
  // DPO only: reference-policy sequence log-probs for the first pair, cached
  // at the start and recomputed from the frozen snapshot after training.
  std::vector<double> dpo_reference_start;
  std::vector<double> dpo_reference_end;
};

/// Invoked after each optimizer step with the live model (read-only use).
using StepCallback = std::function<void(int step, const Seq2SeqModel<double>& model)>;

/// Adam (0.9, 0.999, 1e-8), constant learning rate, no weight decay, batch
/// loss = mean of per-sequence losses. Validation every eval_every_steps and
/// at the final step; the selected checkpoint is the lowest score, earliest
/// step on ties. Non-finite losses throw NumericalError naming the batch.
TrainResult train(const Seq2SeqModel<double>& initial, const std::vector<TrainingExample>& examples,
                  const TrainConfig& config, const ValidationSet& validation, const std::vector<Metric>& metrics,
                  const Vocab& vocab, const StepCallback& on_step = {});

TrainResult train_dpo(const Seq2SeqModel<double>& initial, const std::vector<PairExample>& pairs,
                      const TrainConfig& config, const ValidationSet& validation, const std::vector<Metric>& metrics,
                      const Vocab& vocab, const StepCallback& on_step = {});

/// Sequence log-probability of tgt[1..] given src.
double sequence_logprob(const Seq2SeqModel<double>& model, const std::vector<int>& src, const std::vector<int>& tgt);

/// Mean per-sequence cross-entropy.
double mean_cross_entropy(const Seq2SeqModel<double>& model, const std::vector<TrainingExample>& examples);

/// CSV: step,loss,validation_score (empty when not evaluated at that step).
void write_training_log(std::ostream& out, const std::vector<StepLog>& log);

}  // namespace twa
