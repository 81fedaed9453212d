#include "twa/experiment.hpp"

#include <algorithm>
#include <numeric>

namespace twa {

std::vector<LadderStep> ablation_ladder() {
  return {{"sft", Method::Sft, false},
          {"non_error_only", Method::NonErrorOnly, false},
          {"span_ul", Method::Twa, false},
          {"twa", Method::Twa, true}};
}

LadderStep negative_likelihood_step() { return {"twa_nl", Method::TwaNl, true}; }

LadderStep ladder_step(const std::string& label) {
  for (const auto& s : ablation_ladder()) {
    if (s.label == label) return s;
  }
  if (label == "twa_nl") return negative_likelihood_step();
  if (label == "twa_seq") return {"twa_seq", Method::TwaSeq, false};
  if (label == "filter_sft") return {"filter_sft", Method::FilterSft, false};
  throw UsageError("unknown ladder step '" + label + "'");
}

ExperimentSpec::ExperimentSpec() {
  task.hard_symbols = 3;
  model.embed_dim = 32;
  model.hidden_dim = 64;
  model.num_heads = 2;
  model.max_src_len = 24;
  model.max_tgt_len = 24;
  task.test_sources = 1000;
  // Pretraining sits on a unigram plateau until attention locks onto
  // positions; a high rate escapes it quickly and checkpoint selection
  // absorbs the loss spikes that come with it.
  pretrain.method = Method::Sft;
  pretrain.learning_rate = 3e-3;
  pretrain.total_steps = 4000;
  pretrain.eval_every_steps = 250;
  // A short, slow fine-tune keeps methods apart instead of letting all of
  // them converge to the clean mapping.
  finetune.learning_rate = 5e-5;
  finetune.total_steps = 80;
  finetune.eval_every_steps = 10;
}

void ExperimentSpec::apply(KeyValues& kv) {
  take(kv, "task_alphabet_size", task.alphabet_size);
  take(kv, "task_min_len", task.min_len);
  take(kv, "task_max_len", task.max_len);
  take(kv, "task_corruption_prob", task.corruption_prob);
  take(kv, "task_span_min", task.span_min);
  take(kv, "task_span_max", task.span_max);
  take(kv, "task_hard_symbols", task.hard_symbols);
  take(kv, "task_validation_sources", task.validation_sources);
  take(kv, "task_test_sources", task.test_sources);
  std::string corruption;
  take(kv, "task_corruption", corruption);
  if (!corruption.empty()) task.corruption = parse_corruption_type(corruption);
  take(kv, "sources", n_sources);
  take(kv, "systems", n_systems);
  apply_model_keys(kv, model);
  take(kv, "pretrain_sentences", pretrain_sentences);
  take(kv, "pretrain_confusion", pretrain_confusion);
  take(kv, "pretrain_steps", pretrain.total_steps);
  take(kv, "pretrain_learning_rate", pretrain.learning_rate);
  take(kv, "pretrain_eval_every_steps", pretrain.eval_every_steps);
  take(kv, "pretrain_batch_size", pretrain.batch_size);
  take(kv, "finetune_steps", finetune.total_steps);
  take(kv, "finetune_learning_rate", finetune.learning_rate);
  take(kv, "finetune_batch_size", finetune.batch_size);
  take(kv, "finetune_eval_every_steps", finetune.eval_every_steps);
  take(kv, "finetune_clip_norm", finetune.clip_norm);
  take(kv, "finetune_nl_scaled", finetune.nl_scaled);
  take(kv, "bootstrap_resamples", bootstrap_resamples);
  take(kv, "alpha", alpha);
}

std::vector<double> oracle_scores(const Seq2SeqModel<double>& model, const ValidationSet& set, const Vocab& vocab) {
  const auto hyps = decode_all(model, set, vocab);
  std::vector<double> out(hyps.size());
  for (std::size_t i = 0; i < hyps.size(); ++i) out[i] = oracle_metric(hyps[i], set.references[i]);
  return out;
}

PreparedExperiment prepare_experiment(const ExperimentSpec& spec, std::uint64_t seed) {
  PreparedExperiment p;
  p.task = generate(spec.task, spec.n_sources, spec.n_systems, derive_seed(seed, "data"));
  const std::string alphabet = [&] {
    std::u32string all = p.task.table.source_alphabet + p.task.table.target_alphabet;
    std::string s;
    for (char32_t c : all) s.push_back(static_cast<char>(c));
    return s;
  }();
  p.vocab = build_vocab({alphabet}, kNumReserved + static_cast<int>(alphabet.size()));
  p.validation = make_validation_set(p.task.validation, p.vocab);
  p.test = make_validation_set(p.task.test, p.vocab);
  p.finetune_data = submissions_only(p.task.train);

  ModelConfig mc = spec.model;
  mc.vocab_size = p.vocab.size();
  mc.seed = derive_seed(seed, "init");
  const auto initial = make_model<double>(mc);

  const Dataset corpus = pretraining_corpus(p.task, spec.pretrain_sentences, spec.pretrain_confusion,
                                            derive_seed(seed, "pretrain"));
  TrainConfig pc = spec.pretrain;
  pc.method = Method::Sft;
  pc.seed = derive_seed(seed, "pretrain_shuffle");
  const auto examples = prepare_examples(corpus, p.vocab, pc);
  p.pretrain_result = train(initial, examples, pc, p.validation, {oracle_edit_metric()}, p.vocab);
  p.base = p.pretrain_result.model;
  return p;
}

StepOutcome run_step(const PreparedExperiment& prepared, const ExperimentSpec& spec, const LadderStep& step,
                     std::uint64_t seed) {
  TrainConfig tc = spec.finetune;
  tc.method = step.method;
  tc.ignore_off_trajectory = step.ignore_off_trajectory;
  tc.seed = derive_seed(seed, "shuffle");
  const auto examples = prepare_examples(prepared.finetune_data, prepared.vocab, tc);
  StepOutcome out;
  out.step = step;
  out.result = train(prepared.base, examples, tc, prepared.validation, {oracle_edit_metric()}, prepared.vocab);
  out.test_scores = oracle_scores(out.result.model, prepared.test, prepared.vocab);
  out.test_mean = std::accumulate(out.test_scores.begin(), out.test_scores.end(), 0.0) /
                  static_cast<double>(std::max<std::size_t>(out.test_scores.size(), 1));
  return out;
}

}  // namespace twa
