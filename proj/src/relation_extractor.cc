#include "scene2obj/relation_extractor.h"

#include <algorithm>
#include <cctype>
#include <map>
#include <tuple>

#include "scene2obj/parallel.h"
#include "scene2obj/tsv.h"

namespace scene2obj {

namespace {

bool is_w(PosTag t) {
  return t == PosTag::kNoun || t == PosTag::kAdj || t == PosTag::kAdv ||
         t == PosTag::kPron || t == PosTag::kDet;
}

bool is_p(PosTag t) {
  return t == PosTag::kPrep || t == PosTag::kParticle || t == PosTag::kInfMarker;
}

}  // namespace

std::string span_text(const Sentence& sentence, std::size_t start, std::size_t end) {
  std::string text;
  for (std::size_t i = start; i < end; ++i) {
    if (i > start) text += ' ';
    text += sentence[i].surface;
  }
  return text;
}

std::string normalize_relation(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += static_cast<char>(std::tolower(c));
  }
  return out;
}

std::optional<RelationSpan> match_relation_span(const Sentence& sentence,
                                                std::size_t verb_index,
                                                std::size_t sentence_index) {
  const std::size_t n = sentence.size();
  if (verb_index >= n || sentence[verb_index].pos != PosTag::kVerb) return std::nullopt;
  auto tag = [&](std::size_t i) { return i < n ? sentence[i].pos : PosTag::kOther; };

  // Every end position reachable by V = verb particle? adv?.
  std::vector<std::size_t> v_ends{verb_index + 1};
  if (tag(verb_index + 1) == PosTag::kParticle) v_ends.push_back(verb_index + 2);
  for (std::size_t i = 0, count = v_ends.size(); i < count; ++i) {
    if (tag(v_ends[i]) == PosTag::kAdv) v_ends.push_back(v_ends[i] + 1);
  }

  std::size_t best = verb_index + 1;
  for (std::size_t v_end : v_ends) {
    best = std::max(best, v_end);
    // W* P: a P token at any position reachable through W tokens closes a
    // match. Zero W tokens covers V P.
    for (std::size_t j = v_end; j < n; ++j) {
      if (is_p(tag(j))) best = std::max(best, j + 1);
      if (!is_w(tag(j))) break;
    }
  }
  return RelationSpan{sentence_index, verb_index, best, span_text(sentence, verb_index, best)};
}

bool apply_lexical_constraint(const RelationSpan& span, const RelationDictionary* dictionary) {
  if (dictionary == nullptr) return true;
  return dictionary->count(normalize_relation(span.text)) > 0;
}

std::vector<RelationSpan> merge_overlapping_spans(std::vector<RelationSpan> spans) {
  if (spans.size() < 2) return spans;
  std::sort(spans.begin(), spans.end(), [](const RelationSpan& a, const RelationSpan& b) {
    return a.start != b.start ? a.start < b.start : a.end < b.end;
  });
  std::vector<RelationSpan> merged;
  merged.push_back(spans.front());
  for (std::size_t i = 1; i < spans.size(); ++i) {
    RelationSpan& last = merged.back();
    // Half-open spans share a token iff the next one starts before the
    // current one ends.
    if (spans[i].start < last.end) {
      if (spans[i].end > last.end) {
        last.end = spans[i].end;
        last.text.clear();
      }
    } else {
      merged.push_back(spans[i]);
    }
  }
  return merged;
}

std::vector<Triple> extract_triples(const Sentence& sentence,
                                    const std::vector<RelationSpan>& spans,
                                    const LemmaMap& lemma_map) {
  auto lemma = [&](const TaggedToken& token) {
    const std::string& base = token.lemma ? *token.lemma : token.surface;
    if (const auto it = lemma_map.find(base); it != lemma_map.end()) return it->second;
    std::string lower = base;
    for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    const auto it = lemma_map.find(lower);
    return it == lemma_map.end() ? lower : it->second;
  };
  std::vector<Triple> triples;
  for (const auto& span : spans) {
    std::optional<std::size_t> left;
    for (std::size_t i = span.start; i-- > 0;) {
      if (sentence[i].pos == PosTag::kNoun) {
        left = i;
        break;
      }
    }
    if (!left) continue;
    std::optional<std::size_t> right;
    for (std::size_t i = span.end; i < sentence.size(); ++i) {
      if (sentence[i].pos == PosTag::kNoun) {
        right = i;
        break;
      }
    }
    if (!right) continue;
    triples.push_back({lemma(sentence[*left]), span_text(sentence, span.start, span.end),
                       lemma(sentence[*right])});
  }
  return triples;
}

std::vector<Triple> extract_sentence(const Sentence& sentence, const ExtractConfig& config,
                                     std::size_t sentence_index) {
  const RelationDictionary* dict =
      config.relation_dictionary ? &*config.relation_dictionary : nullptr;
  std::vector<RelationSpan> spans;
  for (std::size_t i = 0; i < sentence.size(); ++i) {
    auto span = match_relation_span(sentence, i, sentence_index);
    if (span && apply_lexical_constraint(*span, dict)) spans.push_back(std::move(*span));
  }
  return extract_triples(sentence, merge_overlapping_spans(std::move(spans)), config.lemma_map);
}

std::vector<Triple> extract_corpus(const Corpus& corpus, const ExtractConfig& config) {
  std::vector<std::vector<Triple>> per_sentence(corpus.size());
  parallel_chunks(corpus.size(), config.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      per_sentence[i] = extract_sentence(corpus[i], config, i);
    }
  });
  std::vector<Triple> triples;
  for (auto& part : per_sentence) {
    triples.insert(triples.end(), std::make_move_iterator(part.begin()),
                   std::make_move_iterator(part.end()));
  }
  return triples;
}

RelationDictionary load_relation_dictionary(const std::filesystem::path& path) {
  tsv::LineReader reader(path);
  RelationDictionary dict;
  std::string line;
  while (reader.next(line)) {
    std::string norm = normalize_relation(line);
    if (!norm.empty()) dict.insert(std::move(norm));
  }
  return dict;
}

std::vector<TripleRecord> to_records(const std::vector<Triple>& triples) {
  std::vector<TripleRecord> records;
  std::map<std::tuple<std::string_view, std::string_view, std::string_view>, std::size_t> index;
  for (const auto& t : triples) {
    const auto key = std::make_tuple(std::string_view(t.arg1), std::string_view(t.relation),
                                     std::string_view(t.arg2));
    const auto it = index.find(key);
    if (it != index.end()) {
      ++records[it->second].count;
      continue;
    }
    index.emplace(key, records.size());
    records.push_back({t.arg1, t.relation, t.arg2, 1});
  }
  return records;
}

}  // namespace scene2obj
