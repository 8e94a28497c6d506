#include "fixtures.hpp"

#include <cctype>
#include <random>
#include <set>
#include <sstream>

namespace stylerm::testing {

namespace {

std::vector<std::string> shared_vocabulary() {
    std::vector<std::string> vocab;
    static const char* stems[] = {"river", "stone", "lantern", "meadow", "harbor",
                                  "ember",  "cedar", "sparrow", "willow", "thunder"};
    for (const char* stem : stems)
        for (int i = 0; i < 40; ++i)
            vocab.push_back(std::string(stem) + std::to_string(i));
    return vocab;
}

std::string make_text(std::size_t approx_words, std::mt19937_64& rng) {
    static const std::vector<std::string> vocab = shared_vocabulary();
    std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
    std::uniform_int_distribution<int> sentence_len(6, 14);

    std::ostringstream out;
    std::size_t words = 0;
    while (words < approx_words) {
        int len = sentence_len(rng);
        for (int k = 0; k < len; ++k) {
            std::string w = vocab[pick(rng)];
            if (k == 0) w[0] = static_cast<char>(std::toupper(w[0]));
            out << w << (k + 1 == len ? "" : " ");
        }
        out << ". ";
        words += static_cast<std::size_t>(len);
    }
    return out.str();
}

}  // namespace

FixtureCorpus make_fixture_corpus(std::size_t n_authors, std::size_t books_per_author,
                                  std::size_t approx_words_per_book, std::uint64_t seed,
                                  const std::string& subject) {
    FixtureCorpus out;
    out.subject = subject;
    std::set<std::string> subjects{subject};
    std::mt19937_64 rng(seed);
    for (std::size_t a = 0; a < n_authors; ++a) {
        AuthorRecord author;
        author.author_id = "author" + std::to_string(a);
        author.display_name = "Author " + std::to_string(a);
        author.subjects = {subject};
        out.authors.push_back(author);
        for (std::size_t b = 0; b < books_per_author; ++b) {
            BookMeta meta;
            meta.author_id = author.author_id;
            meta.display_name = author.display_name;
            meta.title = "Book " + std::to_string(a) + "-" + std::to_string(b);
            meta.subject = subject;
            out.books.push_back(
                ingest_text(make_text(approx_words_per_book, rng), meta, subjects));
        }
    }
    return out;
}

std::string make_story(std::size_t words, bool with_end_marker, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::size_t marker_words = with_end_marker ? 2 : 0;  // "THE END."
    std::string body = make_text(words - marker_words, rng);
    // make_text emits whole sentences; trim or pad to the exact count
    std::vector<std::string> toks;
    std::istringstream in(body);
    std::string w;
    while (in >> w) toks.push_back(w);
    while (toks.size() > words - marker_words) toks.pop_back();
    while (toks.size() < words - marker_words) toks.push_back("ember1.");
    std::ostringstream out;
    for (std::size_t i = 0; i < toks.size(); ++i) out << (i ? " " : "") << toks[i];
    if (with_end_marker) out << "\n\nTHE END.\n";
    return out.str();
}

}  // namespace stylerm::testing
