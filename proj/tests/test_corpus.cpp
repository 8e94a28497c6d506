#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fixtures.hpp"
#include "stylerm/corpus.hpp"

#include <cstdio>
#include <fstream>
#include <random>

using namespace stylerm;

namespace {
const std::set<std::string> kSubjects{"Adventure stories", "Historical fiction"};

BookRecord tiny_book(const std::string& text) {
    BookMeta meta{"a1", "Author One", "Tiny", "Adventure stories"};
    return ingest_text(text, meta, kSubjects);
}
}  // namespace

TEST_CASE("ingest normalizes and validates") {
    BookMeta meta{"a1", "Author One", "T", "Adventure stories"};
    BookRecord b = ingest_text("Line one.\r\n\r\n\r\n\r\nLine two.", meta, kSubjects);
    CHECK(b.text == "Line one.\n\nLine two.");
    CHECK(b.book_id == "a1/T");

    SUBCASE("unknown subject rejected") {
        BookMeta bad = meta;
        bad.subject = "Poetry";
        CHECK_THROWS_AS(ingest_text("x", bad, kSubjects), std::invalid_argument);
    }
    SUBCASE("whitespace-only body rejected") {
        CHECK_THROWS_AS(ingest_text(" \n \t \n ", meta, kSubjects), std::invalid_argument);
    }
    SUBCASE("identical bytes give identical records") {
        BookRecord b2 = ingest_text("Line one.\r\n\r\n\r\n\r\nLine two.", meta, kSubjects);
        CHECK(b2.text == b.text);
        CHECK(b2.book_id == b.book_id);
    }
}

TEST_CASE("sentence segmentation") {
    SUBCASE("two terminated sentences") {
        auto spans = segment_sentences("It rained. He left.");
        REQUIRE(spans.size() == 2);
        CHECK(spans[0].word_count == 2);
        CHECK(spans[1].word_count == 2);
    }
    SUBCASE("abbreviation guard") {
        auto spans = segment_sentences("Mr. Smith left. She stayed.");
        REQUIRE(spans.size() == 2);
        std::string text = "Mr. Smith left. She stayed.";
        CHECK(text.substr(spans[0].start, spans[0].end - spans[0].start) == "Mr. Smith left.");
    }
    SUBCASE("no terminal punctuation yields one span") {
        auto spans = segment_sentences("no punctuation here");
        REQUIRE(spans.size() == 1);
        CHECK(spans[0].word_count == 3);
    }
    SUBCASE("question and exclamation marks break") {
        auto spans = segment_sentences("Really? Yes! Good.");
        CHECK(spans.size() == 3);
    }
    SUBCASE("quote after terminator") {
        auto spans = segment_sentences("\"Stop.\" He ran.");
        CHECK(spans.size() == 2);
    }
    SUBCASE("spans ordered, non-overlapping, cover non-whitespace") {
        std::string text = "One two. Three four! Five? Six.";
        auto spans = segment_sentences(text);
        for (std::size_t i = 1; i < spans.size(); ++i) CHECK(spans[i - 1].end <= spans[i].start);
        std::size_t words = 0;
        for (const auto& sp : spans) words += sp.word_count;
        CHECK(words == count_words(text));
    }
}

TEST_CASE("word counting") {
    CHECK(count_words("") == 0);
    CHECK(count_words("one") == 1);
    CHECK(count_words("  a  b\tc\nd ") == 4);
    CHECK(count_words("end. of, line!") == 3);  // punctuation rides with its token
}

TEST_CASE("chunking") {
    SUBCASE("exact division") {
        // 10 sentences of 100 words each, target 500 -> 2 chunks of 500
        std::string text;
        for (int s = 0; s < 10; ++s) {
            text += "Word";
            for (int w = 1; w < 100; ++w) text += " word";
            text += ". ";
        }
        auto chunks = make_chunks(tiny_book(text), 500);
        REQUIRE(chunks.size() == 2);
        CHECK(chunks[0].word_count == 500);
        CHECK(chunks[1].word_count == 500);
    }
    SUBCASE("remainder below half target dropped") {
        // 12 sentences of 100 words, target 500 -> two 500-word chunks, 200 dropped
        std::string text;
        for (int s = 0; s < 12; ++s) {
            text += "Word";
            for (int w = 1; w < 100; ++w) text += " word";
            text += ". ";
        }
        auto chunks = make_chunks(tiny_book(text), 500);
        REQUIRE(chunks.size() == 2);
        CHECK(chunks[0].word_count == 500);
        CHECK(chunks[1].word_count == 500);
    }
    SUBCASE("book shorter than one chunk yields nothing") {
        std::string text;
        for (int s = 0; s < 3; ++s) {
            text += "Word";
            for (int w = 1; w < 100; ++w) text += " word";
            text += ". ";
        }
        CHECK(make_chunks(tiny_book(text), 500).empty());
    }
    SUBCASE("target out of range rejected") {
        CHECK_THROWS_AS(make_chunks(tiny_book("One. Two."), 400), std::invalid_argument);
        CHECK_THROWS_AS(make_chunks(tiny_book("One. Two."), 3001), std::invalid_argument);
    }
    SUBCASE("chunk text reconstructs from sentence spans") {
        auto fx = stylerm::testing::make_fixture_corpus(2, 1, 2000, 11);
        for (const BookRecord& b : fx.books)
            for (const ChunkRecord& c : make_chunks(b, 500)) {
                std::string rebuilt;
                std::size_t words = 0;
                for (std::size_t i = 0; i < c.sentences.size(); ++i) {
                    const SentenceSpan& sp = c.sentences[i];
                    CHECK(sp.start < sp.end);
                    words += sp.word_count;
                }
                // spans tile the chunk text: first starts at 0, last ends at size
                CHECK(c.sentences.front().start == 0);
                CHECK(c.sentences.back().end == c.text.size());
                CHECK(words == c.word_count);
                rebuilt = c.text.substr(c.sentences.front().start,
                                        c.sentences.back().end - c.sentences.front().start);
                CHECK(rebuilt == c.text);
            }
    }
}

TEST_CASE("author splits") {
    auto fx = stylerm::testing::make_fixture_corpus(10, 1, 600, 3);

    SUBCASE("reproducible 8/1/1") {
        SplitAssignment s1 = split_authors(fx.authors, 0.8, 0.1, 0.1, 7);
        SplitAssignment s2 = split_authors(fx.authors, 0.8, 0.1, 0.1, 7);
        CHECK(s1.by_author == s2.by_author);
        int counts[3] = {0, 0, 0};
        for (const auto& [_, s] : s1.by_author) ++counts[static_cast<int>(s)];
        CHECK(counts[0] == 8);
        CHECK(counts[1] == 1);
        CHECK(counts[2] == 1);
    }
    SUBCASE("different seed changes the shuffle") {
        SplitAssignment s1 = split_authors(fx.authors, 0.8, 0.1, 0.1, 7);
        SplitAssignment s2 = split_authors(fx.authors, 0.8, 0.1, 0.1, 8);
        CHECK(s1.by_author != s2.by_author);  // 10 authors, collision practically excluded
    }
    SUBCASE("zero ratio rejected") {
        CHECK_THROWS_AS(split_authors(fx.authors, 0.5, 0.5, 0.0, 1), std::invalid_argument);
    }
    SUBCASE("ratios must sum to one") {
        CHECK_THROWS_AS(split_authors(fx.authors, 0.5, 0.3, 0.1, 1), std::invalid_argument);
    }
    SUBCASE("too few authors in a subject") {
        auto small = stylerm::testing::make_fixture_corpus(2, 1, 600, 3);
        CHECK_THROWS_AS(split_authors(small.authors, 0.8, 0.1, 0.1, 1), std::invalid_argument);
    }
    SUBCASE("disjoint and exhaustive") {
        SplitAssignment s = split_authors(fx.authors, 0.6, 0.2, 0.2, 42);
        CHECK(s.by_author.size() == fx.authors.size());
        for (const AuthorRecord& a : fx.authors) CHECK_NOTHROW(s.split_of(a.author_id));
    }
    SUBCASE("every subject lands in every split") {
        std::vector<AuthorRecord> authors;
        for (int subj = 0; subj < 2; ++subj)
            for (int i = 0; i < 5; ++i) {
                AuthorRecord a;
                a.author_id = "s" + std::to_string(subj) + "a" + std::to_string(i);
                a.subjects = {subj == 0 ? "Adventure stories" : "Historical fiction"};
                authors.push_back(a);
            }
        SplitAssignment s = split_authors(authors, 0.6, 0.2, 0.2, 5);
        for (int subj = 0; subj < 2; ++subj) {
            std::set<Split> seen;
            for (int i = 0; i < 5; ++i)
                seen.insert(s.split_of("s" + std::to_string(subj) + "a" + std::to_string(i)));
            CHECK(seen.size() == 3);
        }
    }
}

TEST_CASE("chunk store and split round-trip") {
    auto fx = stylerm::testing::make_fixture_corpus(3, 2, 1500, 9);
    std::vector<ChunkRecord> chunks;
    for (const BookRecord& b : fx.books)
        for (ChunkRecord& c : make_chunks(b, 500)) chunks.push_back(std::move(c));
    REQUIRE(!chunks.empty());

    std::string path = "test_corpus_chunks.jsonl";
    write_chunks(path, chunks);
    std::vector<ChunkRecord> back = read_chunks(path);
    REQUIRE(back.size() == chunks.size());
    CHECK(back[0].chunk_id == chunks[0].chunk_id);
    CHECK(back[0].text == chunks[0].text);
    CHECK(back[0].sentences.size() == chunks[0].sentences.size());

    SplitAssignment s = split_authors(fx.authors, 0.4, 0.3, 0.3, 2);
    write_split("test_corpus_split.jsonl", s);
    SplitAssignment s2 = read_split("test_corpus_split.jsonl");
    CHECK(s2.by_author == s.by_author);
    CHECK(s2.seed == s.seed);
    std::remove(path.c_str());
    std::remove("test_corpus_split.jsonl");
}
