#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "twa/annotations.hpp"

namespace twa {

enum class CorruptionType { Substitute, Insert, Delete };

CorruptionType parse_corruption_type(std::string_view s);
std::string_view name(CorruptionType c);

/// Toy translation task: sentences over a lowercase source alphabet map
/// character-by-character to an uppercase target alphabet through a seeded
/// bijection. A corrupted submission carries one planted error span, or with
/// hard symbols and substitution, one span at every hard-symbol occurrence.
struct TaskSpec {
  int alphabet_size = 12;
  int min_len = 5;
  int max_len = 10;
  double corruption_prob = 0.5;  // per submission
  int span_min = 1;
  int span_max = 3;
  CorruptionType corruption = CorruptionType::Substitute;
  /// Number of "hard" source symbols. Substitution spans start on every hard
  /// occurrence (other corruption types on one of them); sentences without
  /// one, or hard_symbols = 0, get a single uniformly placed span.
  int hard_symbols = 0;
  int validation_sources = 100;
  int test_sources = 200;

  void validate() const;
};

/// Bijection source -> target plus a fixed-point-free "confusion" map on
/// the target alphabet used to produce systematic errors.
struct TranslationTable {
  std::u32string source_alphabet;
  std::u32string target_alphabet;
  std::vector<int> mapping;    // source index -> target index
  std::vector<int> confusion;  // target index -> different target index
  std::vector<bool> hard;      // per source index

  std::string translate(std::string_view source) const;
  char32_t confuse(char32_t target_char) const;
  int source_index(char32_t c) const;
  int target_index(char32_t c) const;
};

struct SyntheticExample {
  AnnotatedExample example;
  std::string clean_target;
};

struct SyntheticTask {
  TaskSpec spec;
  TranslationTable table;
  Dataset train;       // per source: submissions then one reference
  Dataset validation;  // references only
  Dataset test;        // references only
  std::map<std::string, std::string> clean_targets;  // source_id -> clean translation

  std::vector<SyntheticExample> with_clean_targets(const Dataset& dataset) const;
};

/// Deterministic in (spec, n_sources, n_systems_per_source, seed).
SyntheticTask generate(const TaskSpec& spec, int n_sources, int n_systems_per_source, std::uint64_t seed);

/// Parallel data in which each hard-symbol occurrence starts, with
/// probability `confusion_rate`, a confused span drawn like the submissions'
/// substitution spans. Used to pretrain a base model that makes the same
/// systematic mistakes as the submissions.
Dataset pretraining_corpus(const SyntheticTask& task, int n_sentences, double confusion_rate, std::uint64_t seed);

/// 1 - levenshtein(h, t) / max(|h|, |t|) over Unicode scalar values; 1 for two empty strings.
double oracle_metric(std::string_view hypothesis, std::string_view target);

std::size_t levenshtein(std::u32string_view a, std::u32string_view b);

/// Sidecar table: one "source_id<TAB>json-string" line per source.
void write_clean_targets(const std::string& path, const std::map<std::string, std::string>& table);
std::map<std::string, std::string> read_clean_targets(const std::string& path);

}  // namespace twa
