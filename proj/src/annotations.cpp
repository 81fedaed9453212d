#include "twa/annotations.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <unordered_map>

#include <json.hpp>

#include "twa/common.hpp"
#include "twa/unicode.hpp"

namespace twa {

namespace {

// Penalties in tenths so that sums are exact and order independent.
int penalty_tenths(Severity s) {
  switch (s) {
    case Severity::MinorPunctuation: return 1;
    case Severity::Minor: return 10;
    case Severity::Major: return 50;
    case Severity::NonTranslation: return 250;
  }
  return 0;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

void check_identifier(const std::string& id, const char* what) {
  if (id.empty()) throw DataError(std::string("empty ") + what);
  if (id.find_first_of("\t\n\r") != std::string::npos) {
    throw DataError(std::string(what) + " contains a tab or newline");
  }
}

}  // namespace

double mqm_penalty(Severity s) { return penalty_tenths(s) / 10.0; }

double training_weight(Severity s) {
  return s == Severity::NonTranslation ? 5.0 : mqm_penalty(s);
}

int severity_rank(Severity s) { return static_cast<int>(s); }

std::string_view severity_name(Severity s) {
  switch (s) {
    case Severity::MinorPunctuation: return "minor_punct";
    case Severity::Minor: return "minor";
    case Severity::Major: return "major";
    case Severity::NonTranslation: return "nontranslation";
  }
  return "minor";
}

Severity parse_severity(std::string_view name) {
  if (name == "minor_punct") return Severity::MinorPunctuation;
  if (name == "minor") return Severity::Minor;
  if (name == "major") return Severity::Major;
  if (name == "nontranslation") return Severity::NonTranslation;
  throw DataError("unknown severity '" + std::string(name) + "'");
}

void validate_example(AnnotatedExample& example) {
  check_identifier(example.source_id, "source_id");
  check_identifier(example.system_id, "system_id");
  if (example.is_reference && !example.spans.empty()) {
    throw DataError("reference " + example.source_id + "/" + example.system_id +
                    " carries error spans");
  }
  const auto length = static_cast<long>(utf8_length(example.output_text));
  utf8_length(example.source_text);  // reject invalid UTF-8
  for (const auto& span : example.spans) {
    if (span.start_char < 0 || span.start_char >= span.end_char || span.end_char > length) {
      throw DataError("span [" + std::to_string(span.start_char) + "," +
                      std::to_string(span.end_char) + ") out of bounds for record " +
                      example.source_id + "/" + example.system_id + " (length " +
                      std::to_string(length) + ")");
    }
  }
  std::stable_sort(example.spans.begin(), example.spans.end(),
                   [](const ErrorSpan& a, const ErrorSpan& b) {
                     if (a.start_char != b.start_char) return a.start_char < b.start_char;
                     return a.end_char < b.end_char;
                   });
}

std::vector<SourceGroup> Dataset::groups() const {
  std::vector<SourceGroup> out;
  std::unordered_map<std::string, std::size_t> where;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& id = examples[i].source_id;
    auto [it, inserted] = where.emplace(id, out.size());
    if (inserted) out.push_back(SourceGroup{id, {}});
    out[it->second].indices.push_back(i);
  }
  return out;
}

void Dataset::validate() const {
  for (const auto& group : groups()) {
    const auto& first = examples[group.indices.front()].source_text;
    for (std::size_t i : group.indices) {
      if (examples[i].source_text != first) {
        throw DataError("source_text differs within source group " + group.source_id);
      }
    }
  }
}

std::string serialize_record(const AnnotatedExample& example) {
  nlohmann::ordered_json spans = nlohmann::ordered_json::array();
  for (const auto& span : example.spans) {
    nlohmann::ordered_json s;
    s["s"] = span.start_char;
    s["e"] = span.end_char;
    s["cat"] = span.category;
    s["sev"] = std::string(severity_name(span.severity));
    spans.push_back(std::move(s));
  }
  std::string line;
  line += example.source_id;
  line += '\t';
  line += example.system_id;
  line += '\t';
  line += example.is_reference ? '1' : '0';
  line += '\t';
  line += nlohmann::json(example.source_text).dump();
  line += '\t';
  line += nlohmann::json(example.output_text).dump();
  line += '\t';
  line += spans.dump();
  return line;
}

AnnotatedExample parse_record(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  const auto fields = split_tabs(line);
  if (fields.size() != 6) {
    throw DataError("expected 6 tab-separated fields, found " + std::to_string(fields.size()));
  }
  AnnotatedExample ex;
  ex.source_id = std::string(fields[0]);
  ex.system_id = std::string(fields[1]);
  if (fields[2] == "1") {
    ex.is_reference = true;
  } else if (fields[2] != "0") {
    throw DataError("is_reference must be 0 or 1");
  }
  try {
    const auto src = nlohmann::json::parse(fields[3]);
    const auto out = nlohmann::json::parse(fields[4]);
    if (!src.is_string() || !out.is_string()) throw DataError("text fields must be JSON strings");
    ex.source_text = src.get<std::string>();
    ex.output_text = out.get<std::string>();
    const auto spans = nlohmann::json::parse(fields[5]);
    if (!spans.is_array()) throw DataError("spans must be a JSON array");
    for (const auto& s : spans) {
      if (!s.is_object() || !s.contains("s") || !s.contains("e") || !s.contains("sev")) {
        throw DataError("span objects need s, e and sev");
      }
      ErrorSpan span;
      span.start_char = s.at("s").get<int>();
      span.end_char = s.at("e").get<int>();
      span.category = s.value("cat", std::string());
      span.severity = parse_severity(s.at("sev").get<std::string>());
      ex.spans.push_back(std::move(span));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed JSON field: ") + e.what());
  }
  validate_example(ex);
  return ex;
}

Dataset parse_dataset(std::istream& in) {
  Dataset dataset;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    try {
      dataset.examples.push_back(parse_record(line));
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  dataset.validate();
  return dataset;
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset " + path);
  try {
    return parse_dataset(in);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void write_dataset(std::ostream& out, const Dataset& dataset) {
  for (const auto& ex : dataset.examples) out << serialize_record(ex) << '\n';
}

void write_dataset(const std::string& path, const Dataset& dataset) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  write_dataset(out, dataset);
}

double mqm_score(const AnnotatedExample& example) {
  long tenths = 0;
  for (const auto& span : example.spans) tenths += penalty_tenths(span.severity);
  return static_cast<double>(tenths) / 10.0;
}

Dataset filter_error_free(const Dataset& dataset) {
  Dataset out;
  for (const auto& ex : dataset.examples) {
    if (ex.error_free()) out.examples.push_back(ex);
  }
  return out;
}

Dataset submissions_only(const Dataset& dataset) {
  Dataset out;
  for (const auto& ex : dataset.examples) {
    if (!ex.is_reference) out.examples.push_back(ex);
  }
  return out;
}

StatsReport dataset_stats(const Dataset& dataset, const TokenCounter& counter, int bins) {
  StatsReport report;
  for (const auto& ex : dataset.examples) {
    const auto [tokens, errors] = counter(ex);
    report.token_counts.push_back(tokens);
    report.error_proportions.push_back(tokens > 0 ? static_cast<double>(errors) / tokens : 0.0);
  }
  const auto moments = [](const auto& values, double& mean, double& sd) {
    mean = 0.0;
    sd = 0.0;
    if (values.empty()) return;
    for (auto v : values) mean += static_cast<double>(v);
    mean /= static_cast<double>(values.size());
    for (auto v : values) sd += (static_cast<double>(v) - mean) * (static_cast<double>(v) - mean);
    sd = std::sqrt(sd / static_cast<double>(values.size()));
  };
  moments(report.token_counts, report.mean_tokens, report.std_tokens);
  moments(report.error_proportions, report.mean_error_proportion, report.std_error_proportion);

  bins = std::max(bins, 1);
  report.histogram_counts.assign(static_cast<std::size_t>(bins), 0);
  for (int b = 0; b <= bins; ++b) report.histogram_edges.push_back(static_cast<double>(b) / bins);
  for (double p : report.error_proportions) {
    // Last bin is closed so that proportion 1.0 is counted.
    const int b = std::min(bins - 1, static_cast<int>(std::floor(p * bins)));
    ++report.histogram_counts[static_cast<std::size_t>(b)];
  }
  return report;
}

}  // namespace twa
