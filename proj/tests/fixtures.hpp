#pragma once

// Seeded synthetic corpus used across the test suites: every book draws
// words uniformly from one shared vocabulary, so with no injected author
// signal the same/cross similarity distributions coincide.

#include "stylerm/corpus.hpp"

#include <cstdint>
#include <vector>

namespace stylerm::testing {

struct FixtureCorpus {
    std::vector<AuthorRecord> authors;
    std::vector<BookRecord> books;
    std::string subject;
};

FixtureCorpus make_fixture_corpus(std::size_t n_authors, std::size_t books_per_author,
                                  std::size_t approx_words_per_book, std::uint64_t seed,
                                  const std::string& subject = "Adventure stories");

// A story-like text with the given word count; ends with the marker line
// when requested.
std::string make_story(std::size_t words, bool with_end_marker, std::uint64_t seed = 1);

}  // namespace stylerm::testing
