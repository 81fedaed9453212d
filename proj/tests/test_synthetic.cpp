#include <doctest.h>

#include <set>

#include "support.hpp"
#include "twa/synthetic.hpp"
#include "twa/unicode.hpp"

using namespace twa;

namespace {

/// Positions where two equal-length strings differ.
std::set<int> diff_positions(const std::string& a, const std::string& b) {
  const auto x = utf8_decode(a), y = utf8_decode(b);
  REQUIRE(x.size() == y.size());
  std::set<int> out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] != y[i]) out.insert(static_cast<int>(i));
  }
  return out;
}

std::set<int> span_positions(const std::vector<ErrorSpan>& spans) {
  std::set<int> out;
  for (const auto& s : spans) {
    for (int i = s.start_char; i < s.end_char; ++i) out.insert(i);
  }
  return out;
}

}  // namespace

TEST_SUITE("synthetic_task") {
  TEST_CASE("translation table is a bijection with a fixed-point-free confusion") {
    TaskSpec spec;
    spec.hard_symbols = 4;
    const auto task = generate(spec, 5, 2, 3);
    const auto& t = task.table;
    CHECK(t.source_alphabet.size() == 12u);
    CHECK(std::set<int>(t.mapping.begin(), t.mapping.end()).size() == 12u);
    for (std::size_t i = 0; i < t.confusion.size(); ++i) CHECK(t.confusion[i] != static_cast<int>(i));
    CHECK(std::count(t.hard.begin(), t.hard.end(), true) == 4);
  }

  TEST_CASE("corruption probability 0 leaves every submission clean") {
    TaskSpec spec;
    spec.corruption_prob = 0.0;
    const auto task = generate(spec, 30, 4, 1);
    for (const auto& ex : task.train.examples) {
      CHECK(ex.spans.empty());
      CHECK(ex.output_text == task.clean_targets.at(ex.source_id));
    }
  }

  TEST_CASE("substitution spans cover exactly the changed characters") {
    for (int hard : {0, 3}) {
      TaskSpec spec;
      spec.corruption_prob = 1.0;
      spec.hard_symbols = hard;
      const auto task = generate(spec, 60, 5, 2);
      for (const auto& ex : task.train.examples) {
        if (ex.is_reference) {
          CHECK(ex.output_text == task.clean_targets.at(ex.source_id));
          continue;
        }
        CHECK(!ex.spans.empty());
        CHECK(diff_positions(ex.output_text, task.clean_targets.at(ex.source_id)) == span_positions(ex.spans));
        for (const auto& s : ex.spans) {
          CHECK(s.severity == (s.end_char - s.start_char >= 4 ? Severity::Major : Severity::Minor));
        }
      }
    }
  }

  TEST_CASE("hard-symbol spans start on every hard occurrence") {
    TaskSpec spec;
    spec.corruption_prob = 1.0;
    spec.hard_symbols = 3;
    spec.span_max = 1;
    const auto task = generate(spec, 40, 3, 5);
    for (const auto& ex : task.train.examples) {
      if (ex.is_reference) continue;
      const auto src = utf8_decode(ex.source_text);
      std::set<int> hard;
      for (std::size_t i = 0; i < src.size(); ++i) {
        if (task.table.hard[static_cast<std::size_t>(task.table.source_index(src[i]))]) hard.insert(static_cast<int>(i));
      }
      if (!hard.empty()) CHECK(span_positions(ex.spans) == hard);
    }
  }

  TEST_CASE("insert and delete corruptions stay annotated") {
    for (auto type : {CorruptionType::Insert, CorruptionType::Delete}) {
      TaskSpec spec;
      spec.corruption_prob = 1.0;
      spec.corruption = type;
      const auto task = generate(spec, 30, 3, 4);
      for (const auto& ex : task.train.examples) {
        if (ex.is_reference) continue;
        REQUIRE(ex.spans.size() == 1);
        const auto& clean = task.clean_targets.at(ex.source_id);
        CHECK(ex.output_text != clean);
        const auto len = static_cast<int>(utf8_length(ex.output_text));
        CHECK(ex.spans[0].end_char <= len);
        if (type == CorruptionType::Insert) CHECK(len > static_cast<int>(utf8_length(clean)));
        if (type == CorruptionType::Delete) CHECK(len < static_cast<int>(utf8_length(clean)));
      }
    }
  }

  TEST_CASE("generation is deterministic and layouts are consistent") {
    TaskSpec spec;
    const auto a = generate(spec, 20, 6, 42);
    const auto b = generate(spec, 20, 6, 42);
    const auto c = generate(spec, 20, 6, 43);
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
    CHECK(a.clean_targets == b.clean_targets);
    CHECK_FALSE(a.train == c.train);
    CHECK(a.train.size() == 20u * 7u);
    CHECK(a.validation.size() == 100u);
    CHECK(a.test.size() == 200u);
    CHECK_NOTHROW(a.train.validate());
    for (const auto& ex : a.test.examples) CHECK(ex.is_reference);
  }

  TEST_CASE("pretraining corpus confuses only hard symbols") {
    TaskSpec spec;
    spec.hard_symbols = 2;
    spec.span_max = 1;
    const auto task = generate(spec, 5, 1, 8);
    const auto corpus = pretraining_corpus(task, 200, 1.0, 9);
    for (const auto& ex : corpus.examples) {
      const auto src = utf8_decode(ex.source_text);
      const auto diffs = diff_positions(ex.output_text, task.table.translate(ex.source_text));
      for (std::size_t i = 0; i < src.size(); ++i) {
        const bool hard = task.table.hard[static_cast<std::size_t>(task.table.source_index(src[i]))];
        CHECK(hard == (diffs.count(static_cast<int>(i)) == 1));
      }
    }
    const auto none = pretraining_corpus(task, 50, 0.0, 9);
    for (const auto& ex : none.examples) CHECK(ex.output_text == task.table.translate(ex.source_text));
  }

  TEST_CASE("oracle metric examples") {
    CHECK(oracle_metric("ABC", "ABC") == 1.0);
    CHECK(oracle_metric("ab", "cd") == 0.0);
    CHECK(oracle_metric("abc", "abd") == doctest::Approx(2.0 / 3.0));
    CHECK(oracle_metric("", "") == 1.0);
    CHECK(oracle_metric("", "abc") == 0.0);
    CHECK(levenshtein(U"kitten", U"sitting") == 3u);
    Rng rng(1);
    for (int i = 0; i < 200; ++i) {
      std::string a, b;
      for (int k = rng.between(0, 6); k > 0; --k) a.push_back(static_cast<char>('a' + rng.below(3)));
      for (int k = rng.between(0, 6); k > 0; --k) b.push_back(static_cast<char>('a' + rng.below(3)));
      CHECK(oracle_metric(a, b) == oracle_metric(b, a));
      CHECK((oracle_metric(a, b) == 1.0) == (a == b));
    }
  }

  TEST_CASE("clean-target sidecar round-trips") {
    test::TempDir dir("clean");
    const auto task = generate(TaskSpec{}, 10, 2, 1);
    write_clean_targets(dir.file("clean.tsv"), task.clean_targets);
    CHECK(read_clean_targets(dir.file("clean.tsv")) == task.clean_targets);
  }

  TEST_CASE("spec validation") {
    TaskSpec spec;
    spec.corruption_prob = 1.5;
    CHECK_THROWS_AS(generate(spec, 1, 1, 0), UsageError);
    CHECK_THROWS_AS(parse_corruption_type("swap"), UsageError);
  }
}
