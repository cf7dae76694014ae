// Scene-by-object relation counts.

#ifndef SCENE2OBJ_CONTEXT_MATRIX_H_
#define SCENE2OBJ_CONTEXT_MATRIX_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <utility>
#include <vector>

#include "scene2obj/corpus_io.h"

namespace scene2obj {

// Sparse S x O matrix of nonnegative counts over a fixed vocabulary.
// Zero entries are not stored.
class ContextMatrix {
 public:
  using Key = std::pair<std::size_t, std::size_t>;  // (scene, object)

  explicit ContextMatrix(std::shared_ptr<const Vocabulary> vocab);

  const Vocabulary& vocab() const { return *vocab_; }
  std::shared_ptr<const Vocabulary> vocab_ptr() const { return vocab_; }
  std::size_t num_scenes() const { return vocab_->num_scenes(); }
  std::size_t num_objects() const { return vocab_->num_objects(); }

  std::int64_t at(std::size_t scene, std::size_t object) const;
  // Throws std::invalid_argument on negative values or bad indices.
  void set(std::size_t scene, std::size_t object, std::int64_t value);
  void add(std::size_t scene, std::size_t object, std::int64_t delta);

  // Nonzero entries in (scene, object) index order.
  const std::map<Key, std::int64_t>& entries() const { return entries_; }

  std::int64_t total() const;
  std::int64_t max_count() const;
  std::vector<std::vector<std::int64_t>> to_dense() const;

  // Elementwise sum; both operands must share the vocabulary object.
  ContextMatrix& operator+=(const ContextMatrix& other);

  bool operator==(const ContextMatrix& other) const {
    return vocab_ == other.vocab_ && entries_ == other.entries_;
  }

 private:
  std::shared_ptr<const Vocabulary> vocab_;
  std::map<Key, std::int64_t> entries_;
};

// Adds each triple's count to C[scene, object] for both argument orders:
// (object, ., scene) and (scene, ., object). Arguments resolve through the
// vocabulary's lemma map; relation text is ignored, as are triples that do
// not pair a scene with an object.
ContextMatrix count_relations(const std::vector<TripleRecord>& triples,
                              std::shared_ptr<const Vocabulary> vocab, unsigned threads = 1);

// Sets every entry whose canonical scene and object names coincide to the
// largest count in the matrix.
ContextMatrix apply_self_similarity(ContextMatrix matrix);

struct AnnotationMatrix {
  ContextMatrix matrix;
  std::size_t skipped_images = 0;   // scene label not in the vocabulary
  std::size_t unknown_objects = 0;  // object mentions not in the vocabulary
};

// Each image adds 1 to C[scene, o] for every distinct object type o it holds.
AnnotationMatrix matrix_from_annotations(const std::vector<ImageAnnotation>& annotations,
                                         std::shared_ptr<const Vocabulary> vocab);

// Sparse `scene<TAB>object<TAB>count`, sorted by scene name then object name.
void save_matrix(const ContextMatrix& matrix, const std::filesystem::path& path,
                 const std::vector<std::string>& header = {});
ContextMatrix load_matrix(const std::filesystem::path& path,
                          std::shared_ptr<const Vocabulary> vocab);

// Builds a vocabulary from the names used in a matrix file (canonical names
// in order of first appearance). For tools given only a matrix.
Vocabulary vocabulary_from_matrix_file(const std::filesystem::path& path);

}  // namespace scene2obj

#endif  // SCENE2OBJ_CONTEXT_MATRIX_H_
