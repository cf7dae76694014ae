// Loaders and writers for every on-disk format used by scene2obj.
//
// All files are UTF-8 and TAB-separated. Lines starting with '#' are
// comments and are ignored by every loader. Loaders either parse a file
// completely or throw ParseError naming the first offending line.

#ifndef SCENE2OBJ_CORPUS_IO_H_
#define SCENE2OBJ_CORPUS_IO_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace scene2obj {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::string path, std::size_t line, const std::string& what);

  const std::string& path() const { return path_; }
  // 1-based; 0 when the error concerns the file as a whole.
  std::size_t line() const { return line_; }

 private:
  std::string path_;
  std::size_t line_;
};

// Coarse part-of-speech classes understood by the relation matcher.
enum class PosTag {
  kVerb,
  kParticle,
  kAdv,
  kNoun,
  kAdj,
  kPron,
  kDet,
  kPrep,
  kInfMarker,
  kOther,
};

std::string_view to_string(PosTag tag);

// Maps tag strings (coarse names and Penn Treebank tags) to coarse classes.
using PosMap = std::map<std::string, PosTag, std::less<>>;

// Coarse names map to themselves; Penn Treebank tags map per the table
// shipped in data/penn_to_coarse.tsv.
const PosMap& default_pos_map();
PosMap load_pos_map(const std::filesystem::path& path);
// Strings missing from the map become kOther.
PosTag parse_pos_tag(std::string_view tag, const PosMap& map = default_pos_map());

struct TaggedToken {
  std::string surface;
  PosTag pos = PosTag::kOther;
  std::optional<std::string> lemma;

  bool operator==(const TaggedToken&) const = default;
};

using Sentence = std::vector<TaggedToken>;
using Corpus = std::vector<Sentence>;

Corpus load_tagged_corpus(const std::filesystem::path& path,
                          const PosMap& pos_map = default_pos_map());
void save_tagged_corpus(const Corpus& corpus, const std::filesystem::path& path,
                        const std::vector<std::string>& header = {});

// One line of a triples file. Arguments are kept verbatim.
struct TripleRecord {
  std::string arg1;
  std::string relation;
  std::string arg2;
  std::int64_t count = 1;

  bool operator==(const TripleRecord&) const = default;
};

std::vector<TripleRecord> load_triples(const std::filesystem::path& path);
void save_triples(const std::vector<TripleRecord>& triples,
                  const std::filesystem::path& path,
                  const std::vector<std::string>& header = {});

using LemmaMap = std::map<std::string, std::string, std::less<>>;

LemmaMap load_lemma_map(const std::filesystem::path& path);
std::vector<std::string> load_name_list(const std::filesystem::path& path);
void save_lemma_map(const LemmaMap& lemma_map, const std::filesystem::path& path,
                    const std::vector<std::string>& header = {});
void save_name_list(const std::vector<std::string>& names, const std::filesystem::path& path,
                    const std::vector<std::string>& header = {});

// Scene and object name lists after lemma mapping and deduplication.
//
// Every canonical name remembers the original names that were merged into
// it, so per-label results can be summarized on the canonical level.
class Vocabulary {
 public:
  // Throws std::invalid_argument when either list is empty.
  static Vocabulary build(const std::vector<std::string>& scene_names,
                          const std::vector<std::string>& object_names,
                          LemmaMap lemma_map = {});

  std::size_t num_scenes() const { return scenes_.size(); }
  std::size_t num_objects() const { return objects_.size(); }
  const std::vector<std::string>& scenes() const { return scenes_; }
  const std::vector<std::string>& objects() const { return objects_; }
  const std::vector<std::string>& scene_originals(std::size_t s) const {
    return scene_originals_[s];
  }
  const std::vector<std::string>& object_originals(std::size_t o) const {
    return object_originals_[o];
  }
  const LemmaMap& lemma_map() const { return lemma_map_; }

  // Applies the lemma map; names without an entry map to themselves.
  std::string canonical(std::string_view name) const;

  // Accepts canonical names, original names, and any surface form the lemma
  // map sends to a canonical name.
  std::optional<std::size_t> scene_index(std::string_view name) const;
  std::optional<std::size_t> object_index(std::string_view name) const;

  // Human-readable records of names merged during build().
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  std::vector<std::string> scenes_;
  std::vector<std::string> objects_;
  std::vector<std::vector<std::string>> scene_originals_;
  std::vector<std::vector<std::string>> object_originals_;
  std::unordered_map<std::string, std::size_t> scene_lookup_;
  std::unordered_map<std::string, std::size_t> object_lookup_;
  LemmaMap lemma_map_;
  std::vector<std::string> warnings_;
};

Vocabulary load_vocabulary(const std::filesystem::path& scene_path,
                           const std::filesystem::path& object_path,
                           const std::optional<std::filesystem::path>& lemma_map_path = {});

struct ImageAnnotation {
  std::string image_id;
  std::string scene_label;
  std::vector<std::string> objects;  // multiset, file order

  bool operator==(const ImageAnnotation&) const = default;
};

std::vector<ImageAnnotation> load_annotations(const std::filesystem::path& path);
void save_annotations(const std::vector<ImageAnnotation>& annotations,
                      const std::filesystem::path& path,
                      const std::vector<std::string>& header = {});

// Names in annotations that the vocabulary cannot resolve.
struct UnknownNames {
  std::vector<std::string> scenes;   // image ids with an unknown scene label
  std::vector<std::string> objects;  // distinct unknown object names
};
UnknownNames find_unknown_names(const std::vector<ImageAnnotation>& annotations,
                                const Vocabulary& vocab);

struct SceneScoreRow {
  std::string image_id;
  std::vector<std::pair<std::string, double>> scores;  // file order

  bool operator==(const SceneScoreRow&) const = default;
};

// Rows must be grouped by image. Every row needs at least one nonzero
// score; negative scores are rejected unless allow_negative is set (logits
// intended for softmax normalization).
std::vector<SceneScoreRow> load_scene_scores(const std::filesystem::path& path,
                                             bool allow_negative = false);
void save_scene_scores(const std::vector<SceneScoreRow>& rows,
                       const std::filesystem::path& path,
                       const std::vector<std::string>& header = {});

struct Box {
  double x1 = 0;
  double y1 = 0;
  double x2 = 0;
  double y2 = 0;

  double area() const { return (x2 - x1) * (y2 - y1); }
  bool well_ordered() const { return x1 < x2 && y1 < y2; }
  bool operator==(const Box&) const = default;
};

struct DetectionRecord {
  std::string image_id;
  std::string class_name;
  double score = 0;
  Box box;
  std::optional<bool> tp_label;

  bool operator==(const DetectionRecord&) const = default;
};

std::vector<DetectionRecord> load_detections(const std::filesystem::path& path);
void save_detections(const std::vector<DetectionRecord>& detections,
                     const std::filesystem::path& path,
                     const std::vector<std::string>& header = {});

// Ground-truth boxes: `image_id<TAB>class<TAB>x1,y1,x2,y2`.
struct GroundTruthBox {
  std::string image_id;
  std::string class_name;
  Box box;

  bool operator==(const GroundTruthBox&) const = default;
};

std::vector<GroundTruthBox> load_ground_truth_boxes(const std::filesystem::path& path);
void save_ground_truth_boxes(const std::vector<GroundTruthBox>& boxes,
                             const std::filesystem::path& path,
                             const std::vector<std::string>& header = {});

// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

}  // namespace scene2obj

#endif  // SCENE2OBJ_CORPUS_IO_H_
