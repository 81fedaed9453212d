#include "twa/compare.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "twa/common.hpp"

namespace twa {

double SystemScores::mean() const {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

namespace {

std::vector<double> differences(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw DataError("paired comparison needs equal lengths (" + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()) + ")");
  }
  if (a.size() < 2) throw DataError("paired comparison needs at least 2 examples");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return d;
}

double resampled_mean(const std::vector<double>& d, std::uint64_t seed) {
  Rng rng(seed);
  double s = 0.0;
  for (std::size_t k = 0; k < d.size(); ++k) s += d[rng.below(d.size())];
  return s / static_cast<double>(d.size());
}

}  // namespace

double pairwise_significance(const SystemScores& a, const SystemScores& b, int n_resamples, std::uint64_t seed,
                             bool plus_one_smoothing) {
  const auto d = differences(a.values, b.values);
  if (n_resamples < 1) throw UsageError("n_resamples must be positive");
  const double observed = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
  if (observed == 0.0) return 1.0;
  int flips = 0;
  for (int r = 0; r < n_resamples; ++r) {
    if (resampled_mean(d, derive_seed(seed, static_cast<std::uint64_t>(r))) * observed <= 0.0) ++flips;
  }
  const double p = plus_one_smoothing ? 2.0 * (flips + 1) / (n_resamples + 1.0) : 2.0 * flips / n_resamples;
  return std::min(1.0, p);
}

DifferenceInterval bootstrap_difference(const std::vector<double>& a, const std::vector<double>& b, int n_resamples,
                                        std::uint64_t seed, double confidence) {
  const auto d = differences(a, b);
  if (n_resamples < 1) throw UsageError("n_resamples must be positive");
  std::vector<double> means(static_cast<std::size_t>(n_resamples));
  for (int r = 0; r < n_resamples; ++r) {
    means[static_cast<std::size_t>(r)] = resampled_mean(d, derive_seed(seed, static_cast<std::uint64_t>(r)));
  }
  std::sort(means.begin(), means.end());
  const double tail = (1.0 - confidence) / 2.0;
  const auto at = [&](double q) {
    const auto idx = static_cast<std::size_t>(std::floor(q * (n_resamples - 1) + 0.5));
    return means[std::min(idx, means.size() - 1)];
  };
  DifferenceInterval out;
  out.mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
  out.lower = at(tail);
  out.upper = at(1.0 - tail);
  return out;
}

std::uint64_t pair_seed(std::uint64_t seed, std::size_t i, std::size_t j) {
  const auto lo = std::min(i, j);
  const auto hi = std::max(i, j);
  return derive_seed(derive_seed(seed, static_cast<std::uint64_t>(lo)), static_cast<std::uint64_t>(hi));
}

ClusterResult cluster_ranks(const std::vector<SystemScores>& systems, double alpha, int n_resamples,
                            std::uint64_t seed, bool higher_is_better) {
  const std::size_t n = systems.size();
  if (n == 0) throw UsageError("cluster_ranks needs at least one system");
  ClusterResult out;
  out.p_values.assign(n, std::vector<double>(n, 1.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double p = pairwise_significance(systems[i], systems[j], n_resamples, pair_seed(seed, i, j));
      out.p_values[i][j] = out.p_values[j][i] = p;
    }
  }

  std::vector<double> means(n);
  for (std::size_t i = 0; i < n; ++i) means[i] = systems[i].mean();
  out.order.resize(n);
  std::iota(out.order.begin(), out.order.end(), std::size_t{0});
  std::stable_sort(out.order.begin(), out.order.end(), [&](std::size_t a, std::size_t b) {
    return higher_is_better ? means[a] > means[b] : means[a] < means[b];
  });

  out.ranks.assign(n, 0);
  int rank = 1;
  std::vector<std::size_t> cluster;
  for (std::size_t idx : out.order) {
    const bool separates = std::any_of(cluster.begin(), cluster.end(),
                                       [&](std::size_t c) { return out.p_values[idx][c] < alpha; });
    if (separates) {
      ++rank;
      cluster.clear();
    }
    cluster.push_back(idx);
    out.ranks[idx] = rank;
  }
  return out;
}

std::vector<RankChangeRecord> token_rank_change(const Seq2SeqModel<double>& base, const Seq2SeqModel<double>& trained,
                                                const Dataset& examples, const Vocab& vocab) {
  if (base.config.vocab_size != trained.config.vocab_size || base.config.vocab_size != vocab.size()) {
    throw DataError("token_rank_change: models and vocabulary disagree on vocabulary size");
  }
  std::vector<RankChangeRecord> records;
  for (const auto& ex : examples.examples) {
    const auto src = encode_ids(ex.source_text, vocab);
    const auto tok = encode(ex.output_text, vocab);
    const auto mask = error_token_mask(tok, ex.spans);
    const auto base_logits = forward(base, src, tok.token_ids).logits;
    const auto trained_logits = forward(trained, src, tok.token_ids).logits;
    for (std::size_t t = 0; t + 1 < tok.token_ids.size(); ++t) {
      const int realized = tok.token_ids[t + 1];
      RankChangeRecord r;
      r.source_id = ex.source_id;
      r.system_id = ex.system_id;
      r.token = realized == kEos ? "</s>" : vocab.token(realized);
      r.position = static_cast<int>(t);
      r.base_rank = logit_rank(base_logits.row(static_cast<Eigen::Index>(t)), realized);
      r.trained_rank = logit_rank(trained_logits.row(static_cast<Eigen::Index>(t)), realized);
      r.delta = r.base_rank - r.trained_rank;
      r.in_error_span = mask[t];
      records.push_back(std::move(r));
    }
  }
  return records;
}

}  // namespace twa
