#include "twa/pairs.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <tuple>

#include "twa/common.hpp"

namespace twa {

PreferredSource parse_preferred_source(std::string_view s) {
  if (s == "reference_only") return PreferredSource::ReferenceOnly;
  if (s == "all_submissions") return PreferredSource::AllSubmissions;
  if (s == "reference_and_submissions") return PreferredSource::ReferenceAndSubmissions;
  throw UsageError("unknown preferred source '" + std::string(s) + "'");
}

DispreferredSource parse_dispreferred_source(std::string_view s) {
  if (s == "best_submission") return DispreferredSource::BestSubmission;
  if (s == "worst_submission") return DispreferredSource::WorstSubmission;
  if (s == "all_submissions") return DispreferredSource::AllSubmissions;
  throw UsageError("unknown dispreferred source '" + std::string(s) + "'");
}

ScoreMode parse_score_mode(std::string_view s) {
  if (s == "sum") return ScoreMode::Sum;
  if (s == "mean") return ScoreMode::Mean;
  throw UsageError("unknown score mode '" + std::string(s) + "'");
}

std::string_view name(PreferredSource s) {
  switch (s) {
    case PreferredSource::ReferenceOnly: return "reference_only";
    case PreferredSource::AllSubmissions: return "all_submissions";
    case PreferredSource::ReferenceAndSubmissions: return "reference_and_submissions";
  }
  return "";
}

std::string_view name(DispreferredSource s) {
  switch (s) {
    case DispreferredSource::BestSubmission: return "best_submission";
    case DispreferredSource::WorstSubmission: return "worst_submission";
    case DispreferredSource::AllSubmissions: return "all_submissions";
  }
  return "";
}

std::string_view name(ScoreMode s) { return s == ScoreMode::Sum ? "sum" : "mean"; }

void PairConfig::validate() const {
  const bool ok = preferred == PreferredSource::ReferenceOnly || dispreferred == DispreferredSource::AllSubmissions;
  if (!ok) {
    throw UsageError("unsupported pair configuration " + std::string(name(preferred)) + " / " +
                     std::string(name(dispreferred)));
  }
}

double pair_score(const AnnotatedExample& example, ScoreMode mode, const TokenCountFn& token_count) {
  const double total = mqm_score(example);
  if (mode == ScoreMode::Sum) return total;
  if (!token_count) throw UsageError("mean score mode needs a tokenizer");
  const int n = token_count(example);
  return n > 0 ? total / n : total;
}

PairResult build_pairs(const Dataset& dataset, const PairConfig& config, const TokenCountFn& token_count) {
  config.validate();
  PairResult result;
  for (const auto& group : dataset.groups()) {
    std::vector<const AnnotatedExample*> refs;
    std::vector<std::pair<const AnnotatedExample*, double>> subs;
    for (std::size_t i : group.indices) {
      const auto& ex = dataset.examples[i];
      if (ex.is_reference) {
        refs.push_back(&ex);
      } else {
        subs.emplace_back(&ex, pair_score(ex, config.score_mode, token_count));
      }
    }
    // One reference per source; extra references are ignored.
    const AnnotatedExample* ref = refs.empty() ? nullptr : refs.front();
    const std::size_t before = result.pairs.size();
    const auto add = [&](const AnnotatedExample& better, const AnnotatedExample& worse) {
      result.pairs.push_back({group.source_id, better, worse});
    };

    if (config.preferred == PreferredSource::ReferenceOnly) {
      if (ref != nullptr && !subs.empty()) {
        if (config.dispreferred == DispreferredSource::AllSubmissions) {
          for (const auto& [sub, score] : subs) add(*ref, *sub);
        } else {
          const bool want_best = config.dispreferred == DispreferredSource::BestSubmission;
          const auto* pick = &subs.front();
          for (const auto& cand : subs) {
            const bool better = want_best ? cand.second < pick->second : cand.second > pick->second;
            const bool tie_first = cand.second == pick->second && cand.first->system_id < pick->first->system_id;
            if (better || tie_first) pick = &cand;
          }
          add(*ref, *pick->first);
        }
      }
    } else {
      for (std::size_t i = 0; i < subs.size(); ++i) {
        for (std::size_t j = i + 1; j < subs.size(); ++j) {
          if (subs[i].second == subs[j].second) continue;
          if (subs[i].second < subs[j].second) {
            add(*subs[i].first, *subs[j].first);
          } else {
            add(*subs[j].first, *subs[i].first);
          }
        }
      }
      if (config.preferred == PreferredSource::ReferenceAndSubmissions && ref != nullptr) {
        for (const auto& [sub, score] : subs) add(*ref, *sub);
      }
    }
    if (result.pairs.size() == before) ++result.skipped_sources;
  }
  std::stable_sort(result.pairs.begin(), result.pairs.end(), [](const PreferencePair& a, const PreferencePair& b) {
    return std::tie(a.source_id, a.preferred.system_id, a.dispreferred.system_id) <
           std::tie(b.source_id, b.preferred.system_id, b.dispreferred.system_id);
  });
  return result;
}

void write_pairs(std::ostream& out, const std::vector<PreferencePair>& pairs) {
  for (const auto& p : pairs) {
    out << serialize_record(p.preferred) << '\n' << serialize_record(p.dispreferred) << '\n';
  }
}

std::vector<PreferencePair> parse_pairs(std::istream& in) {
  const Dataset records = parse_dataset(in);
  if (records.size() % 2 != 0) throw DataError("pair file has an odd number of records");
  std::vector<PreferencePair> pairs;
  for (std::size_t i = 0; i < records.size(); i += 2) {
    const auto& a = records.examples[i];
    const auto& b = records.examples[i + 1];
    if (a.source_id != b.source_id) {
      throw DataError("pair at records " + std::to_string(i + 1) + "-" + std::to_string(i + 2) +
                      " mixes source ids");
    }
    pairs.push_back({a.source_id, a, b});
  }
  return pairs;
}

}  // namespace twa
