#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace twa {

enum class Severity { MinorPunctuation, Minor, Major, NonTranslation };

/// MQM penalty: 0.1, 1, 5, 25.
double mqm_penalty(Severity s);
/// Loss weight magnitude. Same as the penalty except NonTranslation, capped at 5.
double training_weight(Severity s);
/// Total order used when spans overlap: NonTranslation > Major > Minor > MinorPunctuation.
int severity_rank(Severity s);

std::string_view severity_name(Severity s);
Severity parse_severity(std::string_view name);

struct ErrorSpan {
  int start_char = 0;  // inclusive, Unicode scalar values
  int end_char = 0;    // exclusive
  std::string category;
  Severity severity = Severity::Minor;

  friend bool operator==(const ErrorSpan&, const ErrorSpan&) = default;
};

struct AnnotatedExample {
  std::string source_id;
  std::string system_id;
  std::string source_text;
  std::string output_text;
  std::vector<ErrorSpan> spans;  // sorted by start_char; overlaps allowed
  bool is_reference = false;

  bool error_free() const { return spans.empty(); }

  friend bool operator==(const AnnotatedExample&, const AnnotatedExample&) = default;
};

/// Throws DataError when spans are out of bounds or a reference carries spans.
/// Sorts spans by (start_char, end_char) in place.
void validate_example(AnnotatedExample& example);

struct SourceGroup {
  std::string source_id;
  std::vector<std::size_t> indices;  // into Dataset::examples, input order
};

/// Examples in input order. Grouping by source_id is derived on demand.
struct Dataset {
  std::vector<AnnotatedExample> examples;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }

  /// Groups in order of first appearance.
  std::vector<SourceGroup> groups() const;

  /// Every example's source_text must agree within its source group.
  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Line-delimited record format, tab separated:
//   source_id  system_id  is_reference(0/1)  "source"  "output"  [spans]
// Text fields are JSON string literals; spans are a JSON array of
// {"s":int,"e":int,"cat":string,"sev":"minor_punct"|"minor"|"major"|"nontranslation"}.
std::string serialize_record(const AnnotatedExample& example);
AnnotatedExample parse_record(std::string_view line);

Dataset parse_dataset(std::istream& in);
Dataset read_dataset(const std::string& path);
void write_dataset(std::ostream& out, const Dataset& dataset);
void write_dataset(const std::string& path, const Dataset& dataset);

double mqm_score(const AnnotatedExample& example);

Dataset filter_error_free(const Dataset& dataset);
/// Drops reference examples.
Dataset submissions_only(const Dataset& dataset);

struct StatsReport {
  std::vector<int> token_counts;            // text tokens, BOS/EOS excluded
  std::vector<double> error_proportions;    // error tokens / text tokens
  double mean_tokens = 0.0;
  double std_tokens = 0.0;
  double mean_error_proportion = 0.0;
  double std_error_proportion = 0.0;
  std::vector<double> histogram_edges;      // bins over [0, 1]
  std::vector<int> histogram_counts;
};

/// Maps an example to (text token count, error token count).
using TokenCounter = std::function<std::pair<int, int>(const AnnotatedExample&)>;

/// Population standard deviations. Empty outputs count as proportion 0.
StatsReport dataset_stats(const Dataset& dataset, const TokenCounter& counter, int bins = 10);

}  // namespace twa
