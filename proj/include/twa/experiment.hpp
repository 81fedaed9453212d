#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "twa/compare.hpp"
#include "twa/synthetic.hpp"
#include "twa/trainer.hpp"

namespace twa {

/// One rung of the component ablation.
struct LadderStep {
  std::string label;
  Method method = Method::Sft;
  bool ignore_off_trajectory = false;
};

/// sft -> non_error_only -> span_ul -> twa (adds off-trajectory masking).
std::vector<LadderStep> ablation_ladder();
/// Full TWA with span negative likelihood in place of unlikelihood.
LadderStep negative_likelihood_step();
LadderStep ladder_step(const std::string& label);

/// Everything needed to reproduce a synthetic fine-tuning experiment from one seed.
struct ExperimentSpec {
  TaskSpec task;
  int n_sources = 500;
  int n_systems = 6;
  ModelConfig model;              // vocab_size and seed are filled in
  int pretrain_sentences = 2000;
  double pretrain_confusion = 0.8;  // hard-symbol error rate in the base model's data
  TrainConfig pretrain;           // method forced to sft
  TrainConfig finetune;           // method / masking set per ladder step
  int bootstrap_resamples = 1000;
  double alpha = 0.05;

  ExperimentSpec();
  /// Consumes task_*, model, pretrain_* and finetune_* keys.
  void apply(KeyValues& kv);
};

struct PreparedExperiment {
  SyntheticTask task;
  Vocab vocab;
  ValidationSet validation;
  ValidationSet test;
  Dataset finetune_data;  // submissions only
  Seq2SeqModel<double> base;
  TrainResult pretrain_result;
};

/// Named sub-seeds: "data", "init", "pretrain", "shuffle", "bootstrap".
PreparedExperiment prepare_experiment(const ExperimentSpec& spec, std::uint64_t seed);

struct StepOutcome {
  LadderStep step;
  TrainResult result;
  std::vector<double> test_scores;  // oracle edit similarity per test source
  double test_mean = 0.0;
};

StepOutcome run_step(const PreparedExperiment& prepared, const ExperimentSpec& spec, const LadderStep& step,
                     std::uint64_t seed);

std::vector<double> oracle_scores(const Seq2SeqModel<double>& model, const ValidationSet& set, const Vocab& vocab);

}  // namespace twa
