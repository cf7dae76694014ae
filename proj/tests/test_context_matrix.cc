#include "doctest.h"
#include "scene2obj/context_matrix.h"
#include "support/generators.h"
#include "support/temp_dir.h"

using namespace scene2obj;
using scene2obj::testing::Gen;
using scene2obj::testing::TempDir;

namespace {

std::shared_ptr<const Vocabulary> street_vocab() {
  return std::make_shared<Vocabulary>(Vocabulary::build({"street", "beach"}, {"car", "person"}));
}

}  // namespace

TEST_CASE("counting: both argument orders sum, relation text ignored") {
  const auto vocab = street_vocab();
  auto m = count_relations({{"car", "drove down", "street", 1}}, vocab);
  CHECK(m.at(0, 0) == 1);
  CHECK(m.total() == 1);
  m = count_relations({{"car", "drove down", "street", 1}, {"street", "has", "car", 1}}, vocab);
  CHECK(m.at(0, 0) == 2);
  m = count_relations({{"car", "near", "person", 4}}, vocab);
  CHECK(m.total() == 0);
  m = count_relations({{"person", "x", "beach", 3}, {"beach", "y", "person", 2}}, vocab);
  CHECK(m.at(1, 1) == 5);
}

TEST_CASE("counting goes through the lemma map") {
  auto vocab = std::make_shared<Vocabulary>(
      Vocabulary::build({"street"}, {"car"}, {{"streets", "street"}, {"cars", "car"}}));
  CHECK(count_relations({{"cars", "on", "streets", 2}}, vocab).at(0, 0) == 2);
}

TEST_CASE("property: order symmetry, additivity, thread independence") {
  Gen g(8);
  for (int round = 0; round < 100; ++round) {
    const auto vocab = g.vocabulary(g.size(1, 6), g.size(1, 6));
    std::vector<std::string> names = vocab->scenes();
    names.insert(names.end(), vocab->objects().begin(), vocab->objects().end());
    names.push_back("unknown");
    std::vector<TripleRecord> a, b, flipped;
    for (std::size_t i = 0, n = g.size(0, 40); i < n; ++i) {
      TripleRecord t{names[g.size(0, names.size() - 1)], "r", names[g.size(0, names.size() - 1)],
                     static_cast<std::int64_t>(g.size(1, 4))};
      (g.coin() ? a : b).push_back(t);
      flipped.push_back({t.arg2, "other", t.arg1, t.count});
    }
    std::vector<TripleRecord> all = a;
    all.insert(all.end(), b.begin(), b.end());
    const ContextMatrix whole = count_relations(all, vocab);
    ContextMatrix sum = count_relations(a, vocab);
    sum += count_relations(b, vocab);
    CHECK(whole == sum);
    CHECK(count_relations(all, vocab, 5) == whole);
    std::vector<TripleRecord> flipped_all;
    for (const auto& t : all) flipped_all.push_back({t.arg2, "x", t.arg1, t.count});
    CHECK(count_relations(flipped_all, vocab) == whole);
  }
}

TEST_CASE("self-similarity uses the global maximum and is idempotent") {
  auto vocab = std::make_shared<Vocabulary>(Vocabulary::build({"street"}, {"street", "car"}));
  ContextMatrix m(vocab);
  m.set(0, 0, 3);
  m.set(0, 1, 7);
  const ContextMatrix once = apply_self_similarity(m);
  CHECK(once.at(0, 0) == 7);
  CHECK(once.at(0, 1) == 7);
  CHECK(apply_self_similarity(once) == once);

  ContextMatrix zero(vocab);
  CHECK(apply_self_similarity(zero).at(0, 0) == 0);

  const auto plain = street_vocab();
  ContextMatrix p(plain);
  p.set(1, 0, 4);
  CHECK(apply_self_similarity(p) == p);
}

TEST_CASE("annotation matrix counts distinct types per image") {
  const auto vocab = street_vocab();
  auto r = matrix_from_annotations({{"i1", "street", {"car", "car", "person"}}}, vocab);
  CHECK(r.matrix.at(0, 0) == 1);
  CHECK(r.matrix.at(0, 1) == 1);
  r = matrix_from_annotations(
      {{"i1", "street", {"car"}}, {"i2", "street", {"car"}}, {"i3", "forest", {"car"}},
       {"i4", "beach", {"car", "tree"}}},
      vocab);
  CHECK(r.matrix.at(0, 0) == 2);
  CHECK(r.matrix.at(1, 0) == 1);
  CHECK(r.skipped_images == 1);
  CHECK(r.unknown_objects == 1);
  CHECK(matrix_from_annotations({}, vocab).matrix.total() == 0);
}

TEST_CASE("matrix set rejects negatives and bad indices") {
  ContextMatrix m(street_vocab());
  CHECK_THROWS(m.set(0, 0, -1));
  CHECK_THROWS(m.set(2, 0, 1));
  CHECK_THROWS(m.set(0, 2, 1));
  m.set(0, 0, 3);
  m.set(0, 0, 0);
  CHECK(m.entries().empty());
}

TEST_CASE("matrix file: round trip, sorted rows, errors") {
  TempDir dir;
  Gen g(4);
  for (int round = 0; round < 20; ++round) {
    const ContextMatrix m = g.matrix(8, 8);
    save_matrix(m, dir.file("m.tsv"), {"test"});
    CHECK(load_matrix(dir.file("m.tsv"), m.vocab_ptr()) == m);
  }
  const auto vocab = street_vocab();
  ContextMatrix m(vocab);
  m.set(0, 1, 2);
  m.set(1, 0, 5);
  save_matrix(m, dir.file("s.tsv"));
  CHECK(TempDir::read(dir.file("s.tsv")) == "beach\tcar\t5\nstreet\tperson\t2\n");
  CHECK_THROWS_AS(load_matrix(dir.write("d.tsv", "street\tcar\t1\nstreet\tcar\t2\n"), vocab),
                  ParseError);
  CHECK_THROWS_AS(load_matrix(dir.write("n.tsv", "street\tcar\t-1\n"), vocab), ParseError);
  CHECK_THROWS_AS(load_matrix(dir.write("u.tsv", "street\ttree\t1\n"), vocab), ParseError);

  const Vocabulary from_file = vocabulary_from_matrix_file(dir.file("s.tsv"));
  CHECK(from_file.scenes() == std::vector<std::string>{"beach", "street"});
  CHECK(from_file.objects() == std::vector<std::string>{"car", "person"});
}
