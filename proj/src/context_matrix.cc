#include "scene2obj/context_matrix.h"

#include <algorithm>
#include <mutex>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>

#include "scene2obj/parallel.h"
#include "scene2obj/tsv.h"

namespace scene2obj {

ContextMatrix::ContextMatrix(std::shared_ptr<const Vocabulary> vocab) : vocab_(std::move(vocab)) {
  if (!vocab_) throw std::invalid_argument("context matrix needs a vocabulary");
}

std::int64_t ContextMatrix::at(std::size_t scene, std::size_t object) const {
  const auto it = entries_.find({scene, object});
  return it == entries_.end() ? 0 : it->second;
}

void ContextMatrix::set(std::size_t scene, std::size_t object, std::int64_t value) {
  if (scene >= num_scenes() || object >= num_objects()) {
    throw std::invalid_argument("matrix index out of range");
  }
  if (value < 0) throw std::invalid_argument("negative count");
  if (value == 0) {
    entries_.erase({scene, object});
  } else {
    entries_[{scene, object}] = value;
  }
}

void ContextMatrix::add(std::size_t scene, std::size_t object, std::int64_t delta) {
  set(scene, object, at(scene, object) + delta);
}

std::int64_t ContextMatrix::total() const {
  std::int64_t sum = 0;
  for (const auto& [key, value] : entries_) sum += value;
  return sum;
}

std::int64_t ContextMatrix::max_count() const {
  std::int64_t best = 0;
  for (const auto& [key, value] : entries_) best = std::max(best, value);
  return best;
}

std::vector<std::vector<std::int64_t>> ContextMatrix::to_dense() const {
  std::vector<std::vector<std::int64_t>> dense(num_scenes(),
                                               std::vector<std::int64_t>(num_objects(), 0));
  for (const auto& [key, value] : entries_) dense[key.first][key.second] = value;
  return dense;
}

ContextMatrix& ContextMatrix::operator+=(const ContextMatrix& other) {
  if (vocab_ != other.vocab_) throw std::invalid_argument("matrices use different vocabularies");
  for (const auto& [key, value] : other.entries_) entries_[key] += value;
  return *this;
}

ContextMatrix count_relations(const std::vector<TripleRecord>& triples,
                              std::shared_ptr<const Vocabulary> vocab, unsigned threads) {
  if (!vocab || vocab->num_scenes() == 0 || vocab->num_objects() == 0) {
    throw std::invalid_argument("count_relations needs a nonempty vocabulary");
  }
  // Integer sums are order independent, so any partition gives the same matrix.
  std::vector<ContextMatrix> partial;
  std::mutex mu;
  parallel_chunks(triples.size(), threads, [&](std::size_t begin, std::size_t end) {
    ContextMatrix m(vocab);
    for (std::size_t i = begin; i < end; ++i) {
      const auto& t = triples[i];
      if (auto s = vocab->scene_index(t.arg2), o = vocab->object_index(t.arg1); s && o) {
        m.add(*s, *o, t.count);
      }
      if (auto s = vocab->scene_index(t.arg1), o = vocab->object_index(t.arg2); s && o) {
        m.add(*s, *o, t.count);
      }
    }
    std::lock_guard<std::mutex> lock(mu);
    partial.push_back(std::move(m));
  });
  ContextMatrix result(vocab);
  for (const auto& m : partial) result += m;
  return result;
}

ContextMatrix apply_self_similarity(ContextMatrix matrix) {
  const std::int64_t peak = matrix.max_count();
  const Vocabulary& v = matrix.vocab();
  for (std::size_t s = 0; s < v.num_scenes(); ++s) {
    for (std::size_t o = 0; o < v.num_objects(); ++o) {
      if (v.scenes()[s] == v.objects()[o]) matrix.set(s, o, peak);
    }
  }
  return matrix;
}

AnnotationMatrix matrix_from_annotations(const std::vector<ImageAnnotation>& annotations,
                                         std::shared_ptr<const Vocabulary> vocab) {
  AnnotationMatrix result{ContextMatrix(vocab), 0, 0};
  for (const auto& a : annotations) {
    const auto s = vocab->scene_index(a.scene_label);
    if (!s) {
      ++result.skipped_images;
      continue;
    }
    std::set<std::size_t> present;
    for (const auto& name : a.objects) {
      if (auto o = vocab->object_index(name)) {
        present.insert(*o);
      } else {
        ++result.unknown_objects;
      }
    }
    for (std::size_t o : present) result.matrix.add(*s, o, 1);
  }
  return result;
}

void save_matrix(const ContextMatrix& matrix, const std::filesystem::path& path,
                 const std::vector<std::string>& header) {
  const Vocabulary& v = matrix.vocab();
  std::vector<std::tuple<const std::string*, const std::string*, std::int64_t>> rows;
  rows.reserve(matrix.entries().size());
  for (const auto& [key, value] : matrix.entries()) {
    rows.emplace_back(&v.scenes()[key.first], &v.objects()[key.second], value);
  }
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (*std::get<0>(a) != *std::get<0>(b)) return *std::get<0>(a) < *std::get<0>(b);
    return *std::get<1>(a) < *std::get<1>(b);
  });
  auto out = tsv::open_output(path, header);
  for (const auto& [scene, object, value] : rows) {
    out << *scene << '\t' << *object << '\t' << value << '\n';
  }
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

ContextMatrix load_matrix(const std::filesystem::path& path,
                          std::shared_ptr<const Vocabulary> vocab) {
  ContextMatrix matrix(vocab);
  std::set<ContextMatrix::Key> seen;
  tsv::LineReader reader(path);
  std::string line;
  while (reader.next(line)) {
    if (line.empty()) continue;
    const auto f = tsv::split(line, '\t');
    if (f.size() != 3) reader.fail("expected scene<TAB>object<TAB>count");
    const auto s = vocab->scene_index(f[0]);
    if (!s) reader.fail("unknown scene '" + std::string(f[0]) + "'");
    const auto o = vocab->object_index(f[1]);
    if (!o) reader.fail("unknown object '" + std::string(f[1]) + "'");
    std::int64_t count = 0;
    if (!tsv::parse_int(f[2], count)) reader.fail("count is not an integer");
    if (count < 0) reader.fail("negative count");
    if (!seen.insert({*s, *o}).second) reader.fail("duplicate (scene, object) row");
    matrix.set(*s, *o, count);
  }
  return matrix;
}

Vocabulary vocabulary_from_matrix_file(const std::filesystem::path& path) {
  std::vector<std::string> scenes, objects;
  std::set<std::string, std::less<>> seen_scenes, seen_objects;
  tsv::LineReader reader(path);
  std::string line;
  while (reader.next(line)) {
    if (line.empty()) continue;
    const auto f = tsv::split(line, '\t');
    if (f.size() != 3) reader.fail("expected scene<TAB>object<TAB>count");
    if (seen_scenes.emplace(f[0]).second) scenes.emplace_back(f[0]);
    if (seen_objects.emplace(f[1]).second) objects.emplace_back(f[1]);
  }
  if (scenes.empty()) throw ParseError(path.string(), 0, "matrix file has no entries");
  return Vocabulary::build(scenes, objects);
}

}  // namespace scene2obj
