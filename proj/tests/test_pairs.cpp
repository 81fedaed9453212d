#include <doctest.h>

#include <sstream>

#include "oracles.hpp"
#include "support.hpp"
#include "twa/pairs.hpp"

using namespace twa;
using test::make_example;

namespace {

AnnotatedExample with_score(const std::string& system, int minors) {
  std::vector<ErrorSpan> spans(static_cast<std::size_t>(minors), ErrorSpan{0, 1, "c", Severity::Minor});
  return make_example("s", system, "abc", spans);
}

const PairConfig kAll{PreferredSource::AllSubmissions, DispreferredSource::AllSubmissions, ScoreMode::Sum};
const PairConfig kRefAndSubs{PreferredSource::ReferenceAndSubmissions, DispreferredSource::AllSubmissions,
                             ScoreMode::Sum};

}  // namespace

TEST_SUITE("pairs") {
  TEST_CASE("distinct-score submission pairs") {
    Dataset d;
    d.examples = {with_score("s0", 0), with_score("s1", 1), with_score("s2", 1)};
    const auto r = build_pairs(d, kAll);
    REQUIRE(r.pairs.size() == 2);
    CHECK(r.pairs[0].preferred.system_id == "s0");
    CHECK(r.pairs[0].dispreferred.system_id == "s1");
    CHECK(r.pairs[1].dispreferred.system_id == "s2");
  }

  TEST_CASE("references add one pair per submission") {
    Dataset d;
    d.examples = {with_score("a", 0), with_score("b", 2), make_example("s", "ref", "abc", {}, true)};
    const auto subs_only = build_pairs(d, kAll);
    const auto with_ref = build_pairs(d, kRefAndSubs);
    CHECK(with_ref.pairs.size() == subs_only.pairs.size() + 2);
    // An error-free submission still loses to the reference.
    bool ref_over_clean = false;
    for (const auto& p : with_ref.pairs) {
      ref_over_clean = ref_over_clean || (p.preferred.system_id == "ref" && p.dispreferred.system_id == "a");
    }
    CHECK(ref_over_clean);
  }

  TEST_CASE("all-equal scores and no reference give no pairs") {
    Dataset d;
    d.examples = {with_score("a", 1), with_score("b", 1), with_score("c", 1)};
    const auto r = build_pairs(d, kAll);
    CHECK(r.pairs.empty());
    CHECK(r.skipped_sources == 1);
  }

  TEST_CASE("best and worst ties go to the first system id") {
    Dataset d;
    d.examples = {with_score("c", 1), with_score("b", 1), with_score("a", 3), with_score("d", 3),
                  make_example("s", "ref", "abc", {}, true)};
    const auto best = build_pairs(d, {PreferredSource::ReferenceOnly, DispreferredSource::BestSubmission});
    REQUIRE(best.pairs.size() == 1);
    CHECK(best.pairs[0].dispreferred.system_id == "b");
    const auto worst = build_pairs(d, {PreferredSource::ReferenceOnly, DispreferredSource::WorstSubmission});
    REQUIRE(worst.pairs.size() == 1);
    CHECK(worst.pairs[0].dispreferred.system_id == "a");
  }

  TEST_CASE("unsupported combinations are rejected") {
    CHECK_THROWS_AS(PairConfig({PreferredSource::AllSubmissions, DispreferredSource::BestSubmission}).validate(),
                    UsageError);
    CHECK_THROWS_AS(
        PairConfig({PreferredSource::ReferenceAndSubmissions, DispreferredSource::WorstSubmission}).validate(),
        UsageError);
    CHECK_THROWS_AS(parse_preferred_source("everyone"), UsageError);
  }

  TEST_CASE("mean mode divides by token count") {
    Dataset d;
    d.examples = {make_example("s", "long", "abcdefghij", {{0, 1, "c", Severity::Major}}),
                  make_example("s", "short", "ab", {{0, 1, "c", Severity::Minor}})};
    // Sum: short (1) beats long (5). Mean: both score 0.5, so no pair.
    CHECK(build_pairs(d, kAll).pairs.size() == 1);
    PairConfig mean = kAll;
    mean.score_mode = ScoreMode::Mean;
    CHECK(build_pairs(d, mean, oracle::char_count).pairs.empty());
    CHECK_THROWS_AS(build_pairs(d, mean), UsageError);
  }

  TEST_CASE("random groups agree with brute-force enumeration") {
    Rng rng(77);
    const Dataset d = oracle::random_pair_dataset(rng, 150);
    for (const auto& config : oracle::all_pair_configs()) {
      const auto r = build_pairs(d, config, oracle::char_count);
      CHECK(oracle::pair_keys(r.pairs) == oracle::brute_force_pairs(d, config, oracle::char_count));
      for (const auto& p : r.pairs) {
        if (!p.preferred.is_reference) {
          CHECK(pair_score(p.preferred, config.score_mode, oracle::char_count) <
                pair_score(p.dispreferred, config.score_mode, oracle::char_count));
        }
      }
    }
    // Per source: reference_and_submissions = all_submissions + one pair per submission.
    const auto subs = build_pairs(d, kAll).pairs;
    const auto both = build_pairs(d, kRefAndSubs).pairs;
    for (const auto& g : d.groups()) {
      std::size_t n_subs = 0;
      bool has_ref = false;
      for (auto i : g.indices) {
        has_ref = has_ref || d.examples[i].is_reference;
        n_subs += d.examples[i].is_reference ? 0 : 1;
      }
      const auto count = [&](const std::vector<PreferencePair>& v) {
        return std::count_if(v.begin(), v.end(), [&](const auto& p) { return p.source_id == g.source_id; });
      };
      CHECK(count(both) == count(subs) + static_cast<std::ptrdiff_t>(has_ref ? n_subs : 0));
    }
  }

  TEST_CASE("pair files round-trip") {
    Rng rng(5);
    const Dataset d = oracle::random_pair_dataset(rng, 20);
    const auto pairs = build_pairs(d, kRefAndSubs).pairs;
    std::stringstream ss;
    write_pairs(ss, pairs);
    const auto back = parse_pairs(ss);
    REQUIRE(back.size() == pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      CHECK(back[i].preferred == pairs[i].preferred);
      CHECK(back[i].dispreferred == pairs[i].dispreferred);
    }
    std::stringstream odd(serialize_record(pairs.front().preferred) + "\n");
    CHECK_THROWS_AS(parse_pairs(odd), DataError);
  }
}
