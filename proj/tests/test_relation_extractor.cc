#include <algorithm>

#include "doctest.h"
#include "scene2obj/relation_extractor.h"
#include "support/generators.h"
#include "support/oracles.h"
#include "support/temp_dir.h"

using namespace scene2obj;
using scene2obj::testing::Gen;

namespace {

Sentence tagged(std::initializer_list<std::pair<const char*, PosTag>> tokens) {
  Sentence s;
  for (const auto& [w, t] : tokens) s.push_back({w, t, {}});
  return s;
}

constexpr auto V = PosTag::kVerb;
constexpr auto N = PosTag::kNoun;
constexpr auto D = PosTag::kDet;
constexpr auto P = PosTag::kPrep;
constexpr auto A = PosTag::kAdv;
constexpr auto J = PosTag::kAdj;
constexpr auto R = PosTag::kParticle;
constexpr auto I = PosTag::kInfMarker;

RelationSpan span(std::size_t start, std::size_t end) { return {0, start, end, ""}; }

std::vector<std::pair<std::size_t, std::size_t>> bounds(const std::vector<RelationSpan>& spans) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& s : spans) out.emplace_back(s.start, s.end);
  return out;
}

}  // namespace

TEST_CASE("longest match: worked examples") {
  auto m = match_relation_span(tagged({{"drove", V}, {"down", P}}), 0);
  REQUIRE(m);
  CHECK(m->text == "drove down");
  CHECK(match_relation_span(tagged({{"were", V}, {"on", P}}), 0)->text == "were on");
  CHECK(match_relation_span(tagged({{"ran", V}}), 0)->text == "ran");
  auto long_span = match_relation_span(
      tagged({{"sat", V}, {"quietly", A}, {"the", D}, {"old", J}, {"chair", N}, {"near", P}}), 0);
  REQUIRE(long_span);
  CHECK(long_span->text == "sat quietly the old chair near");
  CHECK(long_span->start == 0);
  CHECK(long_span->end == 6);
  // Particle then adverb belong to V; a later W* run without P does not extend it.
  CHECK(match_relation_span(tagged({{"gave", V}, {"up", R}, {"quickly", A}, {"the", D}}), 0)->end ==
        3);
  CHECK(match_relation_span(tagged({{"wants", V}, {"to", I}}), 0)->end == 2);
  CHECK(!match_relation_span(tagged({{"car", N}, {"ran", V}}), 0));
}

TEST_CASE("property: longest match agrees with brute-force enumeration") {
  Gen g(2024);
  for (int i = 0; i < 2000; ++i) {
    const Sentence s = g.sentence(12);
    for (std::size_t v = 0; v < s.size(); ++v) {
      const auto got = match_relation_span(s, v);
      const auto want = scene2obj::testing::oracle_longest_match(s, v);
      REQUIRE(got.has_value() == want.has_value());
      if (got) {
        REQUIRE(got->start == v);
        REQUIRE(got->end == *want);
        REQUIRE(got->text == span_text(s, got->start, got->end));
      }
    }
  }
}

TEST_CASE("lexical constraint") {
  RelationSpan drove{0, 0, 2, "drove down"};
  RelationSpan were{0, 0, 2, "were on"};
  CHECK(apply_lexical_constraint(drove, nullptr));
  const RelationDictionary dict{"drove down"};
  CHECK(apply_lexical_constraint(drove, &dict));
  CHECK(!apply_lexical_constraint(were, &dict));
  RelationSpan shouty{0, 0, 2, "Drove   Down"};
  CHECK(apply_lexical_constraint(shouty, &dict));
}

TEST_CASE("merging: examples") {
  CHECK(bounds(merge_overlapping_spans({span(2, 5), span(4, 7)})) ==
        std::vector<std::pair<std::size_t, std::size_t>>{{2, 7}});
  CHECK(bounds(merge_overlapping_spans({span(0, 2), span(3, 5)})) ==
        std::vector<std::pair<std::size_t, std::size_t>>{{0, 2}, {3, 5}});
  CHECK(bounds(merge_overlapping_spans({span(4, 6), span(0, 3), span(2, 5)})) ==
        std::vector<std::pair<std::size_t, std::size_t>>{{0, 6}});
  // Adjacent spans share no token.
  CHECK(merge_overlapping_spans({span(0, 2), span(2, 4)}).size() == 2);
}

TEST_CASE("property: merging matches union-find components and is idempotent") {
  Gen g(77);
  for (int i = 0; i < 1000; ++i) {
    std::vector<RelationSpan> spans;
    std::vector<std::pair<std::size_t, std::size_t>> raw;
    for (std::size_t k = 0, n = g.size(0, 8); k < n; ++k) {
      const std::size_t a = g.size(0, 20);
      const std::size_t b = a + g.size(1, 5);
      spans.push_back(span(a, b));
      raw.emplace_back(a, b);
    }
    const auto merged = merge_overlapping_spans(spans);
    REQUIRE(bounds(merged) == scene2obj::testing::oracle_merge(raw));
    for (std::size_t k = 1; k < merged.size(); ++k) REQUIRE(merged[k - 1].end <= merged[k].start);
    REQUIRE(bounds(merge_overlapping_spans(merged)) == bounds(merged));
  }
}

TEST_CASE("triples from nearest nouns") {
  const Sentence car = tagged({{"A", D}, {"car", N}, {"drove", V}, {"down", P}, {"the", D},
                               {"street", N}});
  const auto t0 = extract_sentence(car, {});
  REQUIRE(t0.size() == 1);
  CHECK(t0[0] == Triple{"car", "drove down", "street"});

  const Sentence persons = tagged({{"Many", J}, {"persons", N}, {"were", V}, {"on", P},
                                   {"the", D}, {"streets", N}});
  ExtractConfig config;
  config.lemma_map = {{"persons", "person"}, {"streets", "street"}};
  const auto t1 = extract_sentence(persons, config);
  REQUIRE(t1.size() == 1);
  CHECK(t1[0] == Triple{"person", "were on", "street"});

  CHECK(extract_sentence(tagged({{"It", PosTag::kPron}, {"rained", V}, {"heavily", A}}), {})
            .empty());
  // A noun on one side only yields nothing.
  CHECK(extract_sentence(tagged({{"dogs", N}, {"bark", V}}), {}).empty());

  // Lemma column takes effect through the map only when the map says so.
  Sentence with_lemma = car;
  with_lemma[1].lemma = "automobile";
  CHECK(extract_sentence(with_lemma, {})[0].arg1 == "automobile");

  // Sentence-initial capitals still reach the map.
  const Sentence capital = tagged({{"Cars", N}, {"were", V}, {"on", P}, {"Main", N}});
  ExtractConfig cars;
  cars.lemma_map = {{"cars", "car"}};
  const auto t2 = extract_sentence(capital, cars);
  REQUIRE(t2.size() == 1);
  CHECK(t2[0] == Triple{"car", "were on", "main"});
}

TEST_CASE("two disjoint relations and four nouns give two triples") {
  const Sentence s = tagged({{"cats", N}, {"sleep", V}, {"on", P}, {"sofas", N}, {"and", PosTag::kOther},
                             {"dogs", N}, {"run", V}, {"in", P}, {"parks", N}});
  const auto triples = extract_sentence(s, {});
  REQUIRE(triples.size() == 2);
  CHECK(triples[0] == Triple{"cats", "sleep on", "sofas"});
  CHECK(triples[1] == Triple{"dogs", "run in", "parks"});
}

TEST_CASE("property: arguments are the nearest nouns") {
  Gen g(91);
  for (int i = 0; i < 500; ++i) {
    const Sentence s = g.sentence(12);
    std::vector<RelationSpan> spans;
    for (std::size_t v = 0; v < s.size(); ++v) {
      if (auto m = match_relation_span(s, v)) spans.push_back(*m);
    }
    const auto merged = merge_overlapping_spans(spans);
    const auto triples = extract_triples(s, merged, {});
    std::size_t t = 0;
    for (const auto& sp : merged) {
      std::optional<std::size_t> left, right;
      for (std::size_t k = sp.start; k-- > 0;) {
        if (s[k].pos == PosTag::kNoun) {
          left = k;
          break;
        }
      }
      for (std::size_t k = sp.end; k < s.size(); ++k) {
        if (s[k].pos == PosTag::kNoun) {
          right = k;
          break;
        }
      }
      if (!left || !right) continue;
      REQUIRE(t < triples.size());
      CHECK(triples[t].arg1 == s[*left].surface);
      CHECK(triples[t].arg2 == s[*right].surface);
      ++t;
    }
    CHECK(t == triples.size());
  }
}

TEST_CASE("corpus extraction: order, empty corpus, thread independence") {
  CHECK(extract_corpus({}, {}).empty());
  Gen g(3);
  Corpus corpus;
  for (int i = 0; i < 300; ++i) corpus.push_back(g.sentence(12));
  ExtractConfig one;
  ExtractConfig many;
  many.threads = 7;
  const auto a = extract_corpus(corpus, one);
  CHECK(a == extract_corpus(corpus, many));
  std::vector<Triple> sequential;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto t = extract_sentence(corpus[i], one, i);
    sequential.insert(sequential.end(), t.begin(), t.end());
  }
  CHECK(a == sequential);
}

TEST_CASE("dictionary filter drops unknown relations") {
  const Sentence s = tagged({{"cats", N}, {"sleep", V}, {"on", P}, {"sofas", N}});
  ExtractConfig config;
  config.relation_dictionary = RelationDictionary{"run in"};
  CHECK(extract_sentence(s, config).empty());
  config.relation_dictionary = RelationDictionary{"sleep on"};
  CHECK(extract_sentence(s, config).size() == 1);
}

TEST_CASE("records collapse duplicates in first-seen order") {
  const std::vector<Triple> t{{"a", "r", "b"}, {"c", "r", "d"}, {"a", "r", "b"}};
  const auto rec = to_records(t);
  REQUIRE(rec.size() == 2);
  CHECK(rec[0] == TripleRecord{"a", "r", "b", 2});
  CHECK(rec[1] == TripleRecord{"c", "r", "d", 1});
}
