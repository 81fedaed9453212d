#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "support.hpp"
#include "twa/annotations.hpp"
#include "twa/unicode.hpp"
#include "twa/tokenizer.hpp"

using namespace twa;
using twa::test::make_example;

namespace {

const char* kTwoSpanLine =
    "s1\tsysA\t0\t\"Guten Morgen\"\t\"Good mornin\"\t"
    "[{\"s\":0,\"e\":4,\"cat\":\"accuracy\",\"sev\":\"major\"},{\"s\":5,\"e\":11,\"cat\":\"fluency/spelling\",\"sev\":\"minor\"}]";

AnnotatedExample random_example(Rng& rng, int index) {
  static const std::u32string pool = U"abcdefgh éü中文ß ";
  AnnotatedExample ex;
  ex.source_id = "src" + std::to_string(index / 3);
  ex.system_id = "sys" + std::to_string(index % 3);
  std::u32string out;
  const int len = rng.between(0, 20);
  for (int i = 0; i < len; ++i) out.push_back(pool[rng.below(pool.size())]);
  ex.source_text = "source \"quoted\"\ttab " + std::to_string(index / 3);
  ex.output_text = utf8_encode(out);
  ex.is_reference = len > 0 && rng.bernoulli(0.1);
  if (!ex.is_reference && len > 0) {
    const int n = rng.between(0, 3);
    for (int k = 0; k < n; ++k) {
      const int s = rng.between(0, len - 1);
      const int e = rng.between(s + 1, len);
      ex.spans.push_back({s, e, "cat/" + std::to_string(k), static_cast<Severity>(rng.below(4))});
    }
    std::stable_sort(ex.spans.begin(), ex.spans.end(), [](const ErrorSpan& a, const ErrorSpan& b) {
      return a.start_char != b.start_char ? a.start_char < b.start_char : a.end_char < b.end_char;
    });
  }
  return ex;
}

}  // namespace

TEST_SUITE("annotations") {
  TEST_CASE("one line with two spans parses into one example") {
    std::istringstream in(std::string(kTwoSpanLine) + "\n");
    const Dataset d = parse_dataset(in);
    REQUIRE(d.size() == 1);
    const auto& ex = d.examples[0];
    CHECK(ex.spans.size() == 2);
    CHECK(ex.spans[0].severity == Severity::Major);
    CHECK(ex.spans[1] == ErrorSpan{5, 11, "fluency/spelling", Severity::Minor});
    CHECK(ex.output_text == "Good mornin");
    CHECK_FALSE(ex.is_reference);
  }

  TEST_CASE("span past the end of the output is a data error") {
    std::istringstream in("s1\tsysA\t0\t\"x\"\t\"abc\"\t[{\"s\":1,\"e\":4,\"cat\":\"c\",\"sev\":\"minor\"}]\n");
    CHECK_THROWS_AS(parse_dataset(in), DataError);
  }

  TEST_CASE("malformed records name the line") {
    std::istringstream in("s1\tsysA\t0\t\"x\"\t\"abc\"\t[]\nbroken line\n");
    try {
      parse_dataset(in);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }

  TEST_CASE("references must not carry spans") {
    std::istringstream in("s1\tref\t1\t\"x\"\t\"abc\"\t[{\"s\":0,\"e\":1,\"cat\":\"c\",\"sev\":\"minor\"}]\n");
    CHECK_THROWS_AS(parse_dataset(in), DataError);
  }

  TEST_CASE("offsets count scalar values, not bytes") {
    AnnotatedExample ex = make_example("s", "a", "中文ü", {{1, 3, "c", Severity::Minor}});
    CHECK_NOTHROW(validate_example(ex));
    ex.spans[0].end_char = 4;
    CHECK_THROWS_AS(validate_example(ex), DataError);
  }

  TEST_CASE("round trip over a randomized 50-example dataset") {
    Rng rng(11);
    Dataset d;
    for (int i = 0; i < 50; ++i) d.examples.push_back(random_example(rng, i));
    std::ostringstream out;
    write_dataset(out, d);
    std::istringstream in(out.str());
    const Dataset back = parse_dataset(in);
    CHECK(back == d);
    for (const auto& ex : d.examples) CHECK(parse_record(serialize_record(ex)) == ex);
  }

  TEST_CASE("mqm_score examples") {
    CHECK(mqm_score(make_example("s", "a", "abcdef")) == 0.0);
    CHECK(mqm_score(make_example("s", "a", "abcdef", {{0, 2, "c", Severity::Major}, {3, 4, "c", Severity::Minor}})) ==
          6.0);
    CHECK(mqm_score(make_example("s", "a", "abcdef",
                                 {{0, 6, "c", Severity::NonTranslation}, {1, 2, "c", Severity::MinorPunctuation}})) ==
          doctest::Approx(25.1).epsilon(1e-12));
  }

  TEST_CASE("penalties and training weights") {
    CHECK(mqm_penalty(Severity::MinorPunctuation) == doctest::Approx(0.1));
    CHECK(mqm_penalty(Severity::Minor) == 1.0);
    CHECK(mqm_penalty(Severity::Major) == 5.0);
    CHECK(mqm_penalty(Severity::NonTranslation) == 25.0);
    CHECK(training_weight(Severity::NonTranslation) == 5.0);
    CHECK(training_weight(Severity::MinorPunctuation) == doctest::Approx(0.1));
    for (auto s : {Severity::MinorPunctuation, Severity::Minor, Severity::Major, Severity::NonTranslation}) {
      CHECK(parse_severity(severity_name(s)) == s);
    }
    CHECK_THROWS_AS(parse_severity("critical"), DataError);
  }

  TEST_CASE("mqm_score is additive and order invariant") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
      AnnotatedExample ex = make_example("s", "a", "abcdefghij");
      const int n = rng.between(0, 6);
      for (int k = 0; k < n; ++k) ex.spans.push_back({0, 1, "c", static_cast<Severity>(rng.below(4))});
      const auto cut = static_cast<std::ptrdiff_t>(rng.below(ex.spans.size() + 1));
      AnnotatedExample a = ex, b = ex;
      a.spans.assign(ex.spans.begin(), ex.spans.begin() + cut);
      b.spans.assign(ex.spans.begin() + cut, ex.spans.end());
      CHECK(mqm_score(ex) == doctest::Approx(mqm_score(a) + mqm_score(b)).epsilon(1e-12));
      AnnotatedExample shuffled = ex;
      rng.shuffle(shuffled.spans);
      CHECK(mqm_score(shuffled) == mqm_score(ex));
    }
  }

  TEST_CASE("filter_error_free") {
    Dataset d;
    d.examples = {make_example("s", "a", "abc", {{0, 1, "c", Severity::Minor}}), make_example("s", "b", "abc"),
                  make_example("s", "c", "abc", {{1, 2, "c", Severity::Major}})};
    CHECK(filter_error_free(d).size() == 1);
    Dataset clean;
    clean.examples = {make_example("s", "a", "x"), make_example("s", "ref", "y", {}, true)};
    CHECK(filter_error_free(clean) == clean);

    Rng rng(3);
    Dataset big;
    for (int i = 0; i < 100; ++i) big.examples.push_back(random_example(rng, i));
    const Dataset kept = filter_error_free(big);
    for (const auto& ex : kept.examples) CHECK(mqm_score(ex) == 0.0);
    CHECK(kept.size() == static_cast<std::size_t>(std::count_if(big.examples.begin(), big.examples.end(),
                                                                [](const auto& e) { return mqm_score(e) == 0.0; })));
    CHECK(filter_error_free(kept) == kept);
  }

  TEST_CASE("submissions_only drops references") {
    Dataset d;
    d.examples = {make_example("s", "a", "x"), make_example("s", "ref", "y", {}, true)};
    const auto subs = submissions_only(d);
    REQUIRE(subs.size() == 1);
    CHECK(subs.examples[0].system_id == "a");
  }

  TEST_CASE("groups preserve first appearance") {
    Dataset d;
    d.examples = {make_example("b", "1", "x"), make_example("a", "1", "x"), make_example("b", "2", "x")};
    const auto g = d.groups();
    REQUIRE(g.size() == 2);
    CHECK(g[0].source_id == "b");
    CHECK(g[0].indices == std::vector<std::size_t>{0, 2});
    CHECK(g[1].indices == std::vector<std::size_t>{1});
  }

  TEST_CASE("error-token proportions") {
    const std::string text = "abcdefghij";
    Vocab v = build_vocab({text}, kNumReserved + 10);
    Dataset d;
    d.examples = {make_example("s", "a", text, {{0, 10, "c", Severity::Minor}}), make_example("s", "b", text),
                  make_example("s", "c", text, {{4, 7, "c", Severity::Major}})};
    const auto r = dataset_stats(d, v);
    CHECK(r.token_counts == std::vector<int>{10, 10, 10});
    CHECK(r.error_proportions[0] == 1.0);
    CHECK(r.error_proportions[1] == 0.0);
    CHECK(r.error_proportions[2] == doctest::Approx(0.3));
    CHECK(r.mean_error_proportion == doctest::Approx(1.3 / 3));
    // Population standard deviation.
    const double m = 1.3 / 3;
    const double var = ((1 - m) * (1 - m) + m * m + (0.3 - m) * (0.3 - m)) / 3;
    CHECK(r.std_error_proportion == doctest::Approx(std::sqrt(var)));
    CHECK(r.histogram_counts[0] == 1);
    CHECK(r.histogram_counts[3] == 1);
    CHECK(r.histogram_counts[9] == 1);
  }
}
