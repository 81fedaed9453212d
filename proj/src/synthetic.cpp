#include "twa/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "twa/common.hpp"
#include "twa/unicode.hpp"

namespace twa {

CorruptionType parse_corruption_type(std::string_view s) {
  if (s == "substitute") return CorruptionType::Substitute;
  if (s == "insert") return CorruptionType::Insert;
  if (s == "delete") return CorruptionType::Delete;
  throw UsageError("unknown corruption type '" + std::string(s) + "'");
}

std::string_view name(CorruptionType c) {
  switch (c) {
    case CorruptionType::Substitute: return "substitute";
    case CorruptionType::Insert: return "insert";
    case CorruptionType::Delete: return "delete";
  }
  return "";
}

void TaskSpec::validate() const {
  if (alphabet_size < 2 || alphabet_size > 26) throw UsageError("alphabet_size must be in [2, 26]");
  if (min_len < 1 || max_len < min_len) throw UsageError("invalid sentence length range");
  if (corruption_prob < 0.0 || corruption_prob > 1.0) throw UsageError("corruption_prob must be in [0, 1]");
  if (span_min < 1 || span_max < span_min) throw UsageError("invalid span length range");
  if (hard_symbols < 0 || hard_symbols > alphabet_size) throw UsageError("hard_symbols out of range");
  if (validation_sources < 0 || test_sources < 0) throw UsageError("negative held-out source count");
}

std::string TranslationTable::translate(std::string_view source) const {
  std::u32string out;
  for (char32_t c : utf8_decode(source)) {
    out.push_back(target_alphabet[static_cast<std::size_t>(mapping[static_cast<std::size_t>(source_index(c))])]);
  }
  return utf8_encode(out);
}

int TranslationTable::source_index(char32_t c) const {
  const auto pos = source_alphabet.find(c);
  if (pos == std::u32string::npos) throw DataError("character outside the source alphabet");
  return static_cast<int>(pos);
}

int TranslationTable::target_index(char32_t c) const {
  const auto pos = target_alphabet.find(c);
  if (pos == std::u32string::npos) throw DataError("character outside the target alphabet");
  return static_cast<int>(pos);
}

char32_t TranslationTable::confuse(char32_t c) const {
  return target_alphabet[static_cast<std::size_t>(confusion[static_cast<std::size_t>(target_index(c))])];
}

std::vector<SyntheticExample> SyntheticTask::with_clean_targets(const Dataset& dataset) const {
  std::vector<SyntheticExample> out;
  for (const auto& ex : dataset.examples) {
    const auto it = clean_targets.find(ex.source_id);
    if (it == clean_targets.end()) throw DataError("no clean target for source " + ex.source_id);
    out.push_back({ex, it->second});
  }
  return out;
}

namespace {

TranslationTable make_table(const TaskSpec& spec, Rng& rng) {
  TranslationTable t;
  const auto n = static_cast<std::size_t>(spec.alphabet_size);
  for (std::size_t i = 0; i < n; ++i) {
    t.source_alphabet.push_back(U'a' + static_cast<char32_t>(i));
    t.target_alphabet.push_back(U'A' + static_cast<char32_t>(i));
  }
  t.mapping.resize(n);
  std::iota(t.mapping.begin(), t.mapping.end(), 0);
  rng.shuffle(t.mapping);

  // Successor in a random cyclic order has no fixed points.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  t.confusion.resize(n);
  for (std::size_t i = 0; i < n; ++i) t.confusion[static_cast<std::size_t>(order[i])] = order[(i + 1) % n];

  std::vector<int> symbols(n);
  std::iota(symbols.begin(), symbols.end(), 0);
  rng.shuffle(symbols);
  t.hard.assign(n, false);
  for (int i = 0; i < spec.hard_symbols; ++i) t.hard[static_cast<std::size_t>(symbols[static_cast<std::size_t>(i)])] = true;
  return t;
}

std::u32string random_sentence(const TaskSpec& spec, const TranslationTable& table, Rng& rng) {
  const int len = rng.between(spec.min_len, spec.max_len);
  std::u32string s;
  for (int i = 0; i < len; ++i) {
    s.push_back(table.source_alphabet[rng.below(table.source_alphabet.size())]);
  }
  return s;
}

Severity severity_for_length(int len) { return len >= 4 ? Severity::Major : Severity::Minor; }

// Applies one corruption to `target` (translation of `source`); returns the annotated span.
ErrorSpan corrupt(const TaskSpec& spec, const TranslationTable& table, const std::u32string& source,
                  std::u32string& target, Rng& rng) {
  const int n = static_cast<int>(target.size());
  int len = rng.between(spec.span_min, spec.span_max);
  std::vector<int> anchors;
  if (spec.hard_symbols > 0) {
    for (int i = 0; i < n; ++i) {
      if (table.hard[static_cast<std::size_t>(table.source_index(source[static_cast<std::size_t>(i)]))]) anchors.push_back(i);
    }
  }
  int start = anchors.empty() ? static_cast<int>(rng.below(static_cast<std::uint64_t>(n)))
                              : anchors[rng.below(anchors.size())];

  ErrorSpan span;
  switch (spec.corruption) {
    case CorruptionType::Substitute: {
      len = std::min(len, n - start);
      for (int i = start; i < start + len; ++i) {
        target[static_cast<std::size_t>(i)] = table.confuse(target[static_cast<std::size_t>(i)]);
      }
      span = {start, start + len, "accuracy/mistranslation", severity_for_length(len)};
      break;
    }
    case CorruptionType::Insert: {
      // Inserted text is the confused copy of what follows the insertion point.
      std::u32string inserted;
      for (int i = 0; i < len; ++i) {
        const char32_t base = target[static_cast<std::size_t>(std::min(start + i, n - 1))];
        inserted.push_back(table.confuse(base));
      }
      target.insert(static_cast<std::size_t>(start), inserted);
      span = {start, start + len, "accuracy/addition", severity_for_length(len)};
      break;
    }
    case CorruptionType::Delete: {
      // Keep at least one character so the omission can be anchored.
      len = std::min(len, n - start);
      if (len >= n) len = n - 1;
      if (len <= 0) {
        // Single-character sentence: fall back to substitution.
        target[0] = table.confuse(target[0]);
        span = {0, 1, "accuracy/mistranslation", Severity::Minor};
        break;
      }
      target.erase(static_cast<std::size_t>(start), static_cast<std::size_t>(len));
      // Omission is marked on the character after the gap (or before it at the end).
      const int anchor = start < static_cast<int>(target.size()) ? start : start - 1;
      span = {anchor, anchor + 1, "accuracy/omission", severity_for_length(len)};
      break;
    }
  }
  return span;
}

// Substitution anchored on every hard-symbol occurrence, one span each
// (occurrences already inside an earlier span are skipped).
std::vector<ErrorSpan> corrupt_hard(const TaskSpec& spec, const TranslationTable& table, const std::u32string& source,
                                    std::u32string& target, Rng& rng) {
  const int n = static_cast<int>(target.size());
  std::vector<ErrorSpan> spans;
  int covered = 0;
  for (int i = 0; i < n; ++i) {
    if (i < covered || !table.hard[static_cast<std::size_t>(table.source_index(source[static_cast<std::size_t>(i)]))]) {
      continue;
    }
    const int len = std::min(rng.between(spec.span_min, spec.span_max), n - i);
    for (int k = i; k < i + len; ++k) {
      target[static_cast<std::size_t>(k)] = table.confuse(target[static_cast<std::size_t>(k)]);
    }
    spans.push_back({i, i + len, "accuracy/mistranslation", severity_for_length(len)});
    covered = i + len;
  }
  return spans;
}

std::string numbered(const char* prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%05d", prefix, i);
  return buf;
}

AnnotatedExample reference_example(const std::string& source_id, const std::u32string& source,
                                   const std::string& clean) {
  AnnotatedExample ref;
  ref.source_id = source_id;
  ref.system_id = "ref";
  ref.source_text = utf8_encode(source);
  ref.output_text = clean;
  ref.is_reference = true;
  return ref;
}

}  // namespace

SyntheticTask generate(const TaskSpec& spec, int n_sources, int n_systems_per_source, std::uint64_t seed) {
  spec.validate();
  if (n_sources < 1 || n_systems_per_source < 1) throw UsageError("need at least one source and one system");
  SyntheticTask task;
  task.spec = spec;
  Rng table_rng(derive_seed(seed, "table"));
  task.table = make_table(spec, table_rng);

  Rng rng(derive_seed(seed, "data"));
  for (int s = 0; s < n_sources; ++s) {
    const auto source = random_sentence(spec, task.table, rng);
    const std::string id = numbered("s", s);
    const std::string clean = task.table.translate(utf8_encode(source));
    task.clean_targets[id] = clean;
    for (int k = 0; k < n_systems_per_source; ++k) {
      AnnotatedExample ex;
      ex.source_id = id;
      ex.system_id = numbered("sys", k + 1);
      ex.source_text = utf8_encode(source);
      auto target = utf8_decode(clean);
      if (rng.bernoulli(spec.corruption_prob)) {
        const bool anchored = spec.hard_symbols > 0 && spec.corruption == CorruptionType::Substitute;
        if (anchored) ex.spans = corrupt_hard(spec, task.table, source, target, rng);
        // Sentences without a hard symbol still get one error.
        if (ex.spans.empty()) ex.spans.push_back(corrupt(spec, task.table, source, target, rng));
      }
      ex.output_text = utf8_encode(target);
      task.train.examples.push_back(std::move(ex));
    }
    task.train.examples.push_back(reference_example(id, source, clean));
  }

  Rng held_out(derive_seed(seed, "held_out"));
  const auto fill = [&](Dataset& out, const char* prefix, int count) {
    for (int s = 0; s < count; ++s) {
      const auto source = random_sentence(spec, task.table, held_out);
      const std::string id = numbered(prefix, s);
      const std::string clean = task.table.translate(utf8_encode(source));
      task.clean_targets[id] = clean;
      out.examples.push_back(reference_example(id, source, clean));
    }
  };
  fill(task.validation, "v", spec.validation_sources);
  fill(task.test, "t", spec.test_sources);
  return task;
}

Dataset pretraining_corpus(const SyntheticTask& task, int n_sentences, double confusion_rate, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "pretrain"));
  Dataset out;
  for (int s = 0; s < n_sentences; ++s) {
    const auto source = random_sentence(task.spec, task.table, rng);
    auto target = utf8_decode(task.table.translate(utf8_encode(source)));
    const int n = static_cast<int>(source.size());
    int covered = 0;
    for (int i = 0; i < n; ++i) {
      if (i < covered || !task.table.hard[static_cast<std::size_t>(task.table.source_index(source[static_cast<std::size_t>(i)]))] ||
          !rng.bernoulli(confusion_rate)) {
        continue;
      }
      const int len = std::min(rng.between(task.spec.span_min, task.spec.span_max), n - i);
      for (int k = i; k < i + len; ++k) target[static_cast<std::size_t>(k)] = task.table.confuse(target[static_cast<std::size_t>(k)]);
      covered = i + len;
    }
    AnnotatedExample ex;
    ex.source_id = numbered("p", s);
    ex.system_id = "pretrain";
    ex.source_text = utf8_encode(source);
    ex.output_text = utf8_encode(target);
    out.examples.push_back(std::move(ex));
  }
  return out;
}

std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double oracle_metric(std::string_view hypothesis, std::string_view target) {
  const auto h = utf8_decode(hypothesis);
  const auto t = utf8_decode(target);
  const std::size_t longest = std::max(h.size(), t.size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(levenshtein(h, t)) / static_cast<double>(longest);
}

void write_clean_targets(const std::string& path, const std::map<std::string, std::string>& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& [id, text] : table) out << id << '\t' << nlohmann::json(text).dump() << '\n';
}

std::map<std::string, std::string> read_clean_targets(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open clean-target table " + path);
  std::map<std::string, std::string> table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    try {
      if (tab == std::string::npos) throw DataError("missing tab");
      table[line.substr(0, tab)] = nlohmann::json::parse(line.substr(tab + 1)).get<std::string>();
    } catch (const std::exception& e) {
      throw DataError(path + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return table;
}

}  // namespace twa
