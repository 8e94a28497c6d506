#pragma once

// Corpus ingestion: plain-text books -> sentence-aligned chunks with
// author/book/subject provenance, plus author-disjoint split assignment.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace stylerm {

struct AuthorRecord {
    std::string author_id;
    std::string display_name;
    std::set<std::string> subjects;
};

struct BookRecord {
    std::string book_id;
    std::string author_id;
    std::string title;
    std::string subject;
    std::string text;  // normalized, front/back matter already stripped
};

struct SentenceSpan {
    std::size_t start = 0;  // character offset, inclusive
    std::size_t end = 0;    // character offset, exclusive
    std::size_t word_count = 0;
};

enum class ChunkKind { original, refilled };

struct ChunkRecord {
    std::string chunk_id;
    std::string book_id;
    std::string author_id;
    std::string subject;
    std::string title;
    std::vector<SentenceSpan> sentences;  // offsets into `text`
    std::string text;
    std::size_t word_count = 0;
    ChunkKind kind = ChunkKind::original;
    std::optional<double> masking_ratio;  // present iff kind == refilled

    std::string sentence_text(std::size_t index) const;
};

enum class Split { train, validation, test };

const char* split_name(Split s);
Split split_from_name(const std::string& name);

struct SplitAssignment {
    std::map<std::string, Split> by_author;
    std::uint64_t seed = 0;
    double train_ratio = 0, val_ratio = 0, test_ratio = 0;

    Split split_of(const std::string& author_id) const;
};

struct BookMeta {
    std::string author_id;
    std::string display_name;
    std::string title;
    std::string subject;
};

// Whitespace-delimited token count; punctuation counts with its token.
// This is the single word-counting rule shared by chunking, masking and
// the length reward.
std::size_t count_words(const std::string& text);

// Reads a UTF-8 text file, normalizes line endings to \n and collapses
// runs of blank lines. Throws if the subject is not in `subjects` or the
// body is empty after normalization.
BookRecord ingest_book(const std::string& path, const BookMeta& meta,
                       const std::set<std::string>& subjects);

// Same normalization applied to an in-memory body.
BookRecord ingest_text(std::string text, const BookMeta& meta,
                       const std::set<std::string>& subjects);

// Rule-based splitter: a break occurs after terminal punctuation (.!?)
// followed by whitespace and an uppercase letter or opening quote, with a
// fixed abbreviation guard list. Text with no terminal punctuation yields
// a single span.
std::vector<SentenceSpan> segment_sentences(const std::string& text);

// Greedy whole-sentence packing: a chunk closes once word_count reaches
// target_words; a trailing remainder shorter than 0.5*target is dropped.
// Returns an empty vector when the book is too short for one chunk.
std::vector<ChunkRecord> make_chunks(const BookRecord& book, std::size_t target_words);

// Per-subject seeded shuffle and cut at ratio boundaries, so every
// subject is represented in every split. Authors are disjoint across
// splits by construction.
SplitAssignment split_authors(const std::vector<AuthorRecord>& authors,
                              double train_ratio, double val_ratio, double test_ratio,
                              std::uint64_t seed);

// Line-delimited persistence (JSONL).
void write_chunks(const std::string& path, const std::vector<ChunkRecord>& chunks);
std::vector<ChunkRecord> read_chunks(const std::string& path);
void write_split(const std::string& path, const SplitAssignment& split);
SplitAssignment read_split(const std::string& path);

// Manifest: one JSON object per line with fields path, author, title, subject
// (optional display_name).
std::vector<std::pair<std::string, BookMeta>> read_manifest(const std::string& path);

}  // namespace stylerm
