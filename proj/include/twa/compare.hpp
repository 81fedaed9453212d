#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "twa/annotations.hpp"
#include "twa/model.hpp"
#include "twa/tokenizer.hpp"

namespace twa {

struct SystemScores {
  std::string name;
  std::vector<double> values;  // per example, shared index set across systems

  double mean() const;
};

/// Paired bootstrap. The observed mean difference d = mean(a - b) is compared
/// with n_resamples resampled differences d*; a resample "flips" when
/// d* * d <= 0. Two-sided p = min(1, 2 * flips / n_resamples), or with
/// plus_one_smoothing min(1, 2 * (flips + 1) / (n_resamples + 1)).
/// Returns 1.0 when d == 0. Swapping a and b leaves p unchanged.
double pairwise_significance(const SystemScores& a, const SystemScores& b, int n_resamples, std::uint64_t seed,
                             bool plus_one_smoothing = false);

/// Bootstrap percentile interval for mean(a - b).
struct DifferenceInterval {
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};
DifferenceInterval bootstrap_difference(const std::vector<double>& a, const std::vector<double>& b, int n_resamples,
                                        std::uint64_t seed, double confidence = 0.95);

struct ClusterResult {
  std::vector<int> ranks;                 // per input system
  std::vector<std::size_t> order;         // systems sorted best first
  std::vector<std::vector<double>> p_values;  // symmetric, 1 on the diagonal
};

/// Quality clusters: walk systems best first; a system opens a new rank when
/// it differs significantly (p < alpha) from any system already in the
/// current cluster. Each pair (i, j) uses a seed derived from (seed, i, j).
ClusterResult cluster_ranks(const std::vector<SystemScores>& systems, double alpha, int n_resamples,
                            std::uint64_t seed, bool higher_is_better = true);

/// Seed used for the pair of systems with input indices i and j.
std::uint64_t pair_seed(std::uint64_t seed, std::size_t i, std::size_t j);

struct RankChangeRecord {
  std::string source_id;
  std::string system_id;
  std::string token;
  int position = 0;  // index into the weight vector (0 = first token after BOS)
  int base_rank = 0;
  int trained_rank = 0;
  int delta = 0;     // base - trained; positive means the token moved up
  bool in_error_span = false;
};

/// 1 + number of entries strictly greater than logits[index].
template <typename Derived>
int logit_rank(const Eigen::MatrixBase<Derived>& logits, Eigen::Index index) {
  int rank = 1;
  const auto value = logits(index);
  for (Eigen::Index j = 0; j < logits.size(); ++j) {
    if (logits(j) > value) ++rank;
  }
  return rank;
}

std::vector<RankChangeRecord> token_rank_change(const Seq2SeqModel<double>& base, const Seq2SeqModel<double>& trained,
                                                const Dataset& examples, const Vocab& vocab);

}  // namespace twa
