// Verb-phrase relation extraction over POS-tagged sentences.
//
// A relation phrase starts at a verb and is the longest token sequence
// matching
//
//   V | V P | V W* P
//   V = verb particle? adv?
//   W = noun | adj | adv | pron | det
//   P = prep | particle | infmarker
//
// Overlapping phrases within a sentence are merged, and each phrase becomes
// a triple (left noun, phrase, right noun) from the nearest noun on either
// side.

#ifndef SCENE2OBJ_RELATION_EXTRACTOR_H_
#define SCENE2OBJ_RELATION_EXTRACTOR_H_

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "scene2obj/corpus_io.h"

namespace scene2obj {

struct RelationSpan {
  std::size_t sentence_index = 0;
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // exclusive
  std::string text;

  bool operator==(const RelationSpan&) const = default;
};

struct Triple {
  std::string arg1;
  std::string relation;
  std::string arg2;

  bool operator==(const Triple&) const = default;
};

using RelationDictionary = std::set<std::string, std::less<>>;

// Surface forms of [start, end) joined by single spaces.
std::string span_text(const Sentence& sentence, std::size_t start, std::size_t end);

// Lowercases and collapses runs of whitespace.
std::string normalize_relation(std::string_view text);

// Longest grammar-conforming span starting at verb_index; nullopt when that
// token is not a verb. A lone verb always matches.
std::optional<RelationSpan> match_relation_span(const Sentence& sentence,
                                                std::size_t verb_index,
                                                std::size_t sentence_index = 0);

// True when no dictionary is given or the normalized span text is in it.
bool apply_lexical_constraint(const RelationSpan& span,
                              const RelationDictionary* dictionary);

// Replaces every group of spans connected by shared tokens with one span
// covering the group. Output is sorted by start and pairwise disjoint.
// A span that grew during merging has its text cleared; extract_triples
// re-renders relation text from the tokens either way.
std::vector<RelationSpan> merge_overlapping_spans(std::vector<RelationSpan> spans);

// One triple per span with a noun on both sides. A noun's lemma column, or
// its surface when there is none, goes through lemma_map as is and then
// lowercased; unmapped nouns come out lowercased. The relation is the
// surface text of the span's tokens.
std::vector<Triple> extract_triples(const Sentence& sentence,
                                    const std::vector<RelationSpan>& spans,
                                    const LemmaMap& lemma_map);

struct ExtractConfig {
  LemmaMap lemma_map;
  std::optional<RelationDictionary> relation_dictionary;
  unsigned threads = 1;
};

// Match at every verb, filter, merge, extract; results in sentence order.
std::vector<Triple> extract_sentence(const Sentence& sentence, const ExtractConfig& config,
                                     std::size_t sentence_index = 0);
std::vector<Triple> extract_corpus(const Corpus& corpus, const ExtractConfig& config);

RelationDictionary load_relation_dictionary(const std::filesystem::path& path);

// Collapses identical triples into counted records, in first-seen order.
std::vector<TripleRecord> to_records(const std::vector<Triple>& triples);

}  // namespace scene2obj

#endif  // SCENE2OBJ_RELATION_EXTRACTOR_H_
