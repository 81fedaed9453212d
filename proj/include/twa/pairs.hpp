#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "twa/annotations.hpp"

namespace twa {

enum class PreferredSource { ReferenceOnly, AllSubmissions, ReferenceAndSubmissions };
enum class DispreferredSource { BestSubmission, WorstSubmission, AllSubmissions };
enum class ScoreMode { Sum, Mean };

struct PairConfig {
  PreferredSource preferred = PreferredSource::ReferenceAndSubmissions;
  DispreferredSource dispreferred = DispreferredSource::AllSubmissions;
  ScoreMode score_mode = ScoreMode::Sum;

  /// Accepted combinations:
  ///   reference_only x {best_submission, worst_submission, all_submissions}
  ///   all_submissions x all_submissions
  ///   reference_and_submissions x all_submissions
  void validate() const;
};

PreferredSource parse_preferred_source(std::string_view s);
DispreferredSource parse_dispreferred_source(std::string_view s);
ScoreMode parse_score_mode(std::string_view s);
std::string_view name(PreferredSource s);
std::string_view name(DispreferredSource s);
std::string_view name(ScoreMode s);

struct PreferencePair {
  std::string source_id;
  AnnotatedExample preferred;
  AnnotatedExample dispreferred;
};

struct PairResult {
  std::vector<PreferencePair> pairs;  // sorted by (source_id, preferred system, dispreferred system)
  int skipped_sources = 0;            // groups that could not contribute under the config
};

/// Token count used by ScoreMode::Mean. Required only in that mode.
using TokenCountFn = std::function<int(const AnnotatedExample&)>;

/// Lower score is better. References beat every submission of their source
/// by fiat; equal-score submissions are never paired.
PairResult build_pairs(const Dataset& dataset, const PairConfig& config, const TokenCountFn& token_count = {});

double pair_score(const AnnotatedExample& example, ScoreMode mode, const TokenCountFn& token_count);

/// Pair files hold two consecutive dataset records per pair: preferred, then dispreferred.
void write_pairs(std::ostream& out, const std::vector<PreferencePair>& pairs);
std::vector<PreferencePair> parse_pairs(std::istream& in);

}  // namespace twa
