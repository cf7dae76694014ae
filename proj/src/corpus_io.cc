#include "scene2obj/corpus_io.h"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <set>
#include <system_error>

#include "scene2obj/tsv.h"

namespace scene2obj {

ParseError::ParseError(std::string path, std::size_t line, const std::string& what)
    : std::runtime_error(path + (line > 0 ? ":" + std::to_string(line) : "") + ": " + what),
      path_(std::move(path)),
      line_(line) {}

namespace tsv {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

LineReader::LineReader(const std::filesystem::path& path)
    : in_(path), path_(path.string()) {
  if (!in_) throw ParseError(path_, 0, "cannot open file");
}

bool LineReader::next(std::string& line) {
  while (std::getline(in_, line)) {
    ++line_number_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty() && line.front() == '#') continue;
    return true;
  }
  return false;
}

void LineReader::fail(const std::string& message) const {
  throw ParseError(path_, line_number_, message);
}

bool parse_int(std::string_view text, std::int64_t& value) {
  if (text.empty()) return false;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  return ec == std::errc() && ptr == end;
}

bool parse_double(std::string_view text, double& value) {
  if (text.empty()) return false;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  return ec == std::errc() && ptr == end;
}

std::ofstream open_output(const std::filesystem::path& path,
                          const std::vector<std::string>& header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  for (const auto& line : header) out << "# " << line << '\n';
  return out;
}

}  // namespace tsv

std::string format_double(double value) {
  std::array<char, 64> buf;
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), ptr);
}

namespace {

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Box parse_box(std::string_view text, const tsv::LineReader& reader) {
  const auto parts = tsv::split(text, ',');
  if (parts.size() != 4) reader.fail("box must be x1,y1,x2,y2");
  Box box;
  double* coords[] = {&box.x1, &box.y1, &box.x2, &box.y2};
  for (std::size_t i = 0; i < 4; ++i) {
    if (!tsv::parse_double(parts[i], *coords[i]) || !std::isfinite(*coords[i])) {
      reader.fail("bad box coordinate '" + std::string(parts[i]) + "'");
    }
  }
  if (!box.well_ordered()) reader.fail("box is not well ordered (need x1<x2, y1<y2)");
  return box;
}

std::string format_box(const Box& box) {
  return format_double(box.x1) + "," + format_double(box.y1) + "," +
         format_double(box.x2) + "," + format_double(box.y2);
}

}  // namespace

std::string_view to_string(PosTag tag) {
  switch (tag) {
    case PosTag::kVerb: return "verb";
    case PosTag::kParticle: return "particle";
    case PosTag::kAdv: return "adv";
    case PosTag::kNoun: return "noun";
    case PosTag::kAdj: return "adj";
    case PosTag::kPron: return "pron";
    case PosTag::kDet: return "det";
    case PosTag::kPrep: return "prep";
    case PosTag::kInfMarker: return "infmarker";
    case PosTag::kOther: return "other";
  }
  return "other";
}

const PosMap& default_pos_map() {
  static const PosMap map = [] {
    PosMap m;
    for (PosTag t : {PosTag::kVerb, PosTag::kParticle, PosTag::kAdv, PosTag::kNoun,
                     PosTag::kAdj, PosTag::kPron, PosTag::kDet, PosTag::kPrep,
                     PosTag::kInfMarker, PosTag::kOther}) {
      m.emplace(std::string(to_string(t)), t);
    }
    // Penn Treebank. Keep in sync with data/penn_to_coarse.tsv.
    for (const char* t : {"VB", "VBD", "VBG", "VBN", "VBP", "VBZ", "MD"}) m.emplace(t, PosTag::kVerb);
    m.emplace("RP", PosTag::kParticle);
    for (const char* t : {"RB", "RBR", "RBS", "WRB"}) m.emplace(t, PosTag::kAdv);
    for (const char* t : {"NN", "NNS", "NNP", "NNPS"}) m.emplace(t, PosTag::kNoun);
    for (const char* t : {"JJ", "JJR", "JJS"}) m.emplace(t, PosTag::kAdj);
    for (const char* t : {"PRP", "PRP$", "WP", "WP$"}) m.emplace(t, PosTag::kPron);
    for (const char* t : {"DT", "PDT", "WDT"}) m.emplace(t, PosTag::kDet);
    m.emplace("IN", PosTag::kPrep);
    m.emplace("TO", PosTag::kInfMarker);
    return m;
  }();
  return map;
}

PosMap load_pos_map(const std::filesystem::path& path) {
  PosMap map;
  for (PosTag t : {PosTag::kVerb, PosTag::kParticle, PosTag::kAdv, PosTag::kNoun,
                   PosTag::kAdj, PosTag::kPron, PosTag::kDet, PosTag::kPrep,
                   PosTag::kInfMarker, PosTag::kOther}) {
    map.emplace(std::string(to_string(t)), t);
  }
  tsv::LineReader reader(path);
  std::string line;
  while (reader.next(line)) {
    if (line.empty()) continue;
    const auto f = tsv::split(line, '\t');
    if (f.size() != 2) reader.fail("expected tag<TAB>coarse");
    const auto coarse = default_pos_map().find(f[1]);
    if (coarse == default_pos_map().end() || to_string(coarse->second) != f[1]) {
      reader.fail("unknown coarse tag '" + std::string(f[1]) + "'");
    }
    map[std::string(f[0])] = coarse->second;
  }
  return map;
}

PosTag parse_pos_tag(std::string_view tag, const PosMap& map) {
  const auto it = map.find(tag);
  return it == map.end() ? PosTag::kOther : it->second;
}

Corpus load_tagged_corpus(const std::filesystem::path& path, const PosMap& pos_map) {
  tsv::LineReader reader(path);
  Corpus corpus;
  Sentence current;
  std::string line;
  while (reader.next(line)) {
    if (line.empty()) {
      if (!current.empty()) corpus.push_back(std::move(current));
      current.clear();
      continue;
    }
    const auto f = tsv::split(line, '\t');
    if (f.size() < 2 || f.size() > 3) {
      reader.fail("expected surface<TAB>pos[<TAB>lemma], got " + std::to_string(f.size()) +
                  " column(s)");
    }
    if (f[0].empty()) reader.fail("empty surface form");
    TaggedToken token{std::string(f[0]), parse_pos_tag(f[1], pos_map), std::nullopt};
    if (f.size() == 3 && !f[2].empty()) token.lemma = std::string(f[2]);
    current.push_back(std::move(token));
  }
  if (!current.empty()) corpus.push_back(std::move(current));
  return corpus;
}

void save_tagged_corpus(const Corpus& corpus, const std::filesystem::path& path,
                        const std::vector<std::string>& header) {
  auto out = tsv::open_output(path, header);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (i > 0) out << '\n';
    for (const auto& tok : corpus[i]) {
      out << tok.surface << '\t' << to_string(tok.pos);
      if (tok.lemma) out << '\t' << *tok.lemma;
      out << '\n';
    }
  }
  finish(out, path);
}

void save_lemma_map(const LemmaMap& lemma_map, const std::filesystem::path& path,
                    const std::vector<std::string>& header) {
  auto out = tsv::open_output(path, header);
  for (const auto& [surface, lemma] : lemma_map) out << surface << '\t' << lemma << '\n';
  finish(out, path);
}

void save_name_list(const std::vector<std::string>& names, const std::filesystem::path& path,
                    const std::vector<std::string>& header) {
  auto out = tsv::open_output(path, header);
  for (const auto& name : names) out << name << '\n';
  finish(out, path);
}

std::vector<TripleRecord> load_triples(const std::filesystem::path& path) {
  tsv::LineReader reader(path);
  std::vector<TripleRecord> triples;
  std::string line;
  while (reader.next(line)) {
    if (line.empty()) continue;
    const auto f = tsv::split(line, '\t');
    if (f.size() < 3 || f.size() > 4) {
      reader.fail("expected arg1<TAB>relation<TAB>arg2[<TAB>count]");
    }
    if (f[0].empty() || f[2].empty()) reader.fail("empty argument");
    TripleRecord t{std::string(f[0]), std::string(f[1]), std::string(f[2]), 1};
    if (f.size() == 4) {
      if (!tsv::parse_int(f[3], t.count)) {
        reader.fail("count is not an integer: '" + std::string(f[3]) + "'");
      }
      if (t.count <= 0) reader.fail("count must be positive");
    }
    triples.push_back(std::move(t));
  }
  return triples;
}

void save_triples(const std::vector<TripleRecord>& triples,
                  const std::filesystem::path& path,
                  const std::vector<std::string>& header) {
  auto out = tsv::open_output(path, header);
  for (const auto& t : triples) {
    out << t.arg1 << '\t' << t.relation << '\t' << t.arg2 << '\t' << t.count << '\n';
  }
  finish(out, path);
}

LemmaMap load_lemma_map(const std::filesystem::path& path) {
  tsv::LineReader reader(path);
  LemmaMap map;
  std::string line;
  while (reader.next(line)) {
    if (line.empty()) continue;
    const auto f = tsv::split(line, '\t');
    if (f.size() != 2 || f[0].empty() || f[1].empty()) {
      reader.fail("expected surface<TAB>lemma");
    }
    const auto [it, inserted] = map.emplace(std::string(f[0]), std::string(f[1]));
    if (!inserted && it->second != f[1]) {
      reader.fail("conflicting lemma for '" + std::string(f[0]) + "'");
    }
  }
  return map;
}

std::vector<std::string> load_name_list(const std::filesystem::path& path) {
  tsv::LineReader reader(path);
  std::vector<std::string> names;
  std::string line;
  while (reader.next(line)) {
    if (line.empty()) continue;
    if (line.find('\t') != std::string::npos) reader.fail("names may not contain TAB");
    names.push_back(line);
  }
  if (names.empty()) throw ParseError(path.string(), 0, "empty name list");
  return names;
}

Vocabulary Vocabulary::build(const std::vector<std::string>& scene_names,
                             const std::vector<std::string>& object_names,
                             LemmaMap lemma_map) {
  if (scene_names.empty()) throw std::invalid_argument("vocabulary needs at least one scene");
  if (object_names.empty()) throw std::invalid_argument("vocabulary needs at least one object");
  Vocabulary v;
  v.lemma_map_ = std::move(lemma_map);

  auto add = [&v](const std::vector<std::string>& names, const char* kind,
                  std::vector<std::string>& canon,
                  std::vector<std::vector<std::string>>& originals,
                  std::unordered_map<std::string, std::size_t>& lookup) {
    for (const auto& name : names) {
      if (name.empty()) throw std::invalid_argument(std::string("empty ") + kind + " name");
      std::string c = v.canonical(name);
      auto it = std::find(canon.begin(), canon.end(), c);
      std::size_t idx;
      if (it == canon.end()) {
        idx = canon.size();
        canon.push_back(c);
        originals.emplace_back();
        lookup.emplace(c, idx);
      } else {
        idx = static_cast<std::size_t>(it - canon.begin());
        v.warnings_.push_back(std::string(kind) + " '" + name + "' merged into '" + c + "'");
      }
      auto& orig = originals[idx];
      if (std::find(orig.begin(), orig.end(), name) == orig.end()) orig.push_back(name);
      lookup.emplace(name, idx);
    }
  };
  add(scene_names, "scene", v.scenes_, v.scene_originals_, v.scene_lookup_);
  add(object_names, "object", v.objects_, v.object_originals_, v.object_lookup_);
  return v;
}

std::string Vocabulary::canonical(std::string_view name) const {
  const auto it = lemma_map_.find(name);
  return it == lemma_map_.end() ? std::string(name) : it->second;
}

std::optional<std::size_t> Vocabulary::scene_index(std::string_view name) const {
  if (auto it = scene_lookup_.find(std::string(name)); it != scene_lookup_.end()) {
    return it->second;
  }
  if (auto it = scene_lookup_.find(canonical(name)); it != scene_lookup_.end()) {
    return it->second;
  }
  return std::nullopt;
}

std::optional<std::size_t> Vocabulary::object_index(std::string_view name) const {
  if (auto it = object_lookup_.find(std::string(name)); it != object_lookup_.end()) {
    return it->second;
  }
  if (auto it = object_lookup_.find(canonical(name)); it != object_lookup_.end()) {
    return it->second;
  }
  return std::nullopt;
}

Vocabulary load_vocabulary(const std::filesystem::path& scene_path,
                           const std::filesystem::path& object_path,
                           const std::optional<std::filesystem::path>& lemma_map_path) {
  LemmaMap lemmas;
  if (lemma_map_path) lemmas = load_lemma_map(*lemma_map_path);
  return Vocabulary::build(load_name_list(scene_path), load_name_list(object_path),
                           std::move(lemmas));
}

std::vector<ImageAnnotation> load_annotations(const std::filesystem::path& path) {
  tsv::LineReader reader(path);
  std::vector<ImageAnnotation> annotations;
  std::set<std::string, std::less<>> seen;
  std::string line;
  while (reader.next(line)) {
    if (line.empty()) continue;
    const auto f = tsv::split(line, '\t');
    if (f.size() < 2 || f.size() > 3) {
      reader.fail("expected image_id<TAB>scene<TAB>obj1,obj2,...");
    }
    if (f[0].empty()) reader.fail("empty image id");
    if (f[1].empty()) reader.fail("empty scene label");
    if (!seen.emplace(f[0]).second) reader.fail("duplicate image id '" + std::string(f[0]) + "'");
    ImageAnnotation a{std::string(f[0]), std::string(f[1]), {}};
    if (f.size() == 3 && !f[2].empty()) {
      for (auto obj : tsv::split(f[2], ',')) {
        if (obj.empty()) reader.fail("empty object name");
        a.objects.emplace_back(obj);
      }
    }
    annotations.push_back(std::move(a));
  }
  return annotations;
}

void save_annotations(const std::vector<ImageAnnotation>& annotations,
                      const std::filesystem::path& path,
                      const std::vector<std::string>& header) {
  auto out = tsv::open_output(path, header);
  for (const auto& a : annotations) {
    out << a.image_id << '\t' << a.scene_label << '\t';
    for (std::size_t i = 0; i < a.objects.size(); ++i) {
      if (i > 0) out << ',';
      out << a.objects[i];
    }
    out << '\n';
  }
  finish(out, path);
}

UnknownNames find_unknown_names(const std::vector<ImageAnnotation>& annotations,
                                const Vocabulary& vocab) {
  UnknownNames unknown;
  std::set<std::string> objects;
  for (const auto& a : annotations) {
    if (!vocab.scene_index(a.scene_label)) unknown.scenes.push_back(a.image_id);
    for (const auto& o : a.objects) {
      if (!vocab.object_index(o)) objects.insert(o);
    }
  }
  unknown.objects.assign(objects.begin(), objects.end());
  return unknown;
}

std::vector<SceneScoreRow> load_scene_scores(const std::filesystem::path& path,
                                             bool allow_negative) {
  tsv::LineReader reader(path);
  std::vector<SceneScoreRow> rows;
  std::set<std::string, std::less<>> finished;
  std::size_t row_start_line = 0;

  auto close_row = [&]() {
    if (rows.empty()) return;
    const auto& row = rows.back();
    const bool any_positive = std::any_of(row.scores.begin(), row.scores.end(),
                                          [](const auto& p) { return p.second != 0.0; });
    if (!any_positive) {
      throw ParseError(reader.path(), row_start_line,
                       "image '" + row.image_id + "' has no nonzero score");
    }
    finished.insert(row.image_id);
  };

  std::string line;
  while (reader.next(line)) {
    if (line.empty()) continue;
    const auto f = tsv::split(line, '\t');
    if (f.size() != 3) reader.fail("expected image_id<TAB>scene<TAB>score");
    if (f[0].empty() || f[1].empty()) reader.fail("empty image id or scene name");
    double score = 0;
    if (!tsv::parse_double(f[2], score) || !std::isfinite(score)) {
      reader.fail("bad score '" + std::string(f[2]) + "'");
    }
    if (score < 0 && !allow_negative) reader.fail("negative score");
    if (rows.empty() || rows.back().image_id != f[0]) {
      close_row();
      if (finished.count(f[0])) {
        reader.fail("rows for image '" + std::string(f[0]) + "' are not contiguous");
      }
      rows.push_back({std::string(f[0]), {}});
      row_start_line = reader.line_number();
    }
    auto& scores = rows.back().scores;
    if (std::any_of(scores.begin(), scores.end(),
                    [&](const auto& p) { return p.first == f[1]; })) {
      reader.fail("duplicate scene '" + std::string(f[1]) + "' for image");
    }
    scores.emplace_back(std::string(f[1]), score);
  }
  close_row();
  return rows;
}

void save_scene_scores(const std::vector<SceneScoreRow>& rows,
                       const std::filesystem::path& path,
                       const std::vector<std::string>& header) {
  auto out = tsv::open_output(path, header);
  for (const auto& row : rows) {
    for (const auto& [scene, score] : row.scores) {
      out << row.image_id << '\t' << scene << '\t' << format_double(score) << '\n';
    }
  }
  finish(out, path);
}

std::vector<DetectionRecord> load_detections(const std::filesystem::path& path) {
  tsv::LineReader reader(path);
  std::vector<DetectionRecord> detections;
  std::string line;
  while (reader.next(line)) {
    if (line.empty()) continue;
    const auto f = tsv::split(line, '\t');
    if (f.size() < 4 || f.size() > 5) {
      reader.fail("expected image_id<TAB>class<TAB>score<TAB>x1,y1,x2,y2[<TAB>tp|fp]");
    }
    if (f[0].empty() || f[1].empty()) reader.fail("empty image id or class");
    DetectionRecord d;
    d.image_id = std::string(f[0]);
    d.class_name = std::string(f[1]);
    if (!tsv::parse_double(f[2], d.score) || !std::isfinite(d.score)) {
      reader.fail("bad score '" + std::string(f[2]) + "'");
    }
    d.box = parse_box(f[3], reader);
    if (f.size() == 5) {
      if (f[4] == "tp") {
        d.tp_label = true;
      } else if (f[4] == "fp") {
        d.tp_label = false;
      } else {
        reader.fail("label must be tp or fp");
      }
    }
    detections.push_back(std::move(d));
  }
  return detections;
}

void save_detections(const std::vector<DetectionRecord>& detections,
                     const std::filesystem::path& path,
                     const std::vector<std::string>& header) {
  auto out = tsv::open_output(path, header);
  for (const auto& d : detections) {
    out << d.image_id << '\t' << d.class_name << '\t' << format_double(d.score) << '\t'
        << format_box(d.box);
    if (d.tp_label) out << '\t' << (*d.tp_label ? "tp" : "fp");
    out << '\n';
  }
  finish(out, path);
}

std::vector<GroundTruthBox> load_ground_truth_boxes(const std::filesystem::path& path) {
  tsv::LineReader reader(path);
  std::vector<GroundTruthBox> boxes;
  std::string line;
  while (reader.next(line)) {
    if (line.empty()) continue;
    const auto f = tsv::split(line, '\t');
    if (f.size() != 3) reader.fail("expected image_id<TAB>class<TAB>x1,y1,x2,y2");
    if (f[0].empty() || f[1].empty()) reader.fail("empty image id or class");
    boxes.push_back({std::string(f[0]), std::string(f[1]), parse_box(f[2], reader)});
  }
  return boxes;
}

void save_ground_truth_boxes(const std::vector<GroundTruthBox>& boxes,
                             const std::filesystem::path& path,
                             const std::vector<std::string>& header) {
  auto out = tsv::open_output(path, header);
  for (const auto& b : boxes) {
    out << b.image_id << '\t' << b.class_name << '\t' << format_box(b.box) << '\n';
  }
  finish(out, path);
}

}  // namespace scene2obj
