#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fixtures.hpp"
#include "stylerm/pairset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

using namespace stylerm;

namespace {

ChunkRecord chunk_of_sentence_lengths(const std::vector<std::size_t>& lengths) {
    ChunkRecord c;
    c.chunk_id = "fixture";
    c.book_id = "b";
    c.author_id = "a";
    c.subject = "Adventure stories";
    c.title = "T";
    c.kind = ChunkKind::original;
    for (std::size_t len : lengths) {
        std::string sent;
        for (std::size_t w = 0; w < len; ++w) sent += (w ? " w" : "W");
        sent += ".";
        SentenceSpan sp;
        if (!c.text.empty()) c.text += ' ';
        sp.start = c.text.size();
        c.text += sent;
        sp.end = c.text.size();
        sp.word_count = len;
        c.sentences.push_back(sp);
        c.word_count += len;
    }
    return c;
}

// Brute-force evaluation of the label function, independent of pair_label.
double oracle_x(double r1, double r2) {
    double f = (1.0 - r1 * r1) * (1.0 - r2 * r2);
    return f * f;
}
double oracle_s(double x) { return std::floor(10.0 * x + 0.5) / 10.0; }

}  // namespace

TEST_CASE("mask planning") {
    SUBCASE("uniform lengths") {
        ChunkRecord c = chunk_of_sentence_lengths(std::vector<std::size_t>(10, 10));
        MaskPlan plan = plan_mask(c, 0.3);
        CHECK(plan.masked_indices.size() == 3);
        CHECK(plan.achieved_ratio == doctest::Approx(0.3).epsilon(1e-12));
        CHECK(plan.target_ratio == 0.3);
    }
    SUBCASE("longest-first greedy, fixture below sentence minimum") {
        ChunkRecord c = chunk_of_sentence_lengths({40, 30, 20, 10});
        CHECK_THROWS_AS(plan_mask(c, 0.5), std::invalid_argument);  // < 10 sentences
        MaskPlan plan = plan_mask(c, 0.5, /*min_sentences=*/1);
        CHECK(plan.masked_indices == std::vector<std::size_t>{0, 1});
        CHECK(plan.achieved_ratio == doctest::Approx(0.7).epsilon(1e-12));
    }
    SUBCASE("ties broken by lower index") {
        ChunkRecord c = chunk_of_sentence_lengths({10, 10, 10, 10});
        MaskPlan plan = plan_mask(c, 0.5, 1);
        CHECK(plan.masked_indices == std::vector<std::size_t>{0, 1});
    }
    SUBCASE("off-grid ratio rejected") {
        ChunkRecord c = chunk_of_sentence_lengths(std::vector<std::size_t>(10, 10));
        CHECK_THROWS_AS(plan_mask(c, 0.35), std::invalid_argument);
    }
    SUBCASE("refilled chunk rejected") {
        ChunkRecord c = chunk_of_sentence_lengths(std::vector<std::size_t>(10, 10));
        c.kind = ChunkKind::refilled;
        CHECK_THROWS_AS(plan_mask(c, 0.3), std::invalid_argument);
    }
}

TEST_CASE("refilling") {
    ChunkRecord c = chunk_of_sentence_lengths(std::vector<std::size_t>(12, 8));
    MaskPlan plan = plan_mask(c, 0.3);
    TestGenerationClient gen(99);

    SUBCASE("unmasked sentences byte-identical, counts preserved") {
        RefilledChunk rf = apply_refill(c, plan, gen);
        CHECK(rf.chunk.sentences.size() == c.sentences.size());
        CHECK(rf.chunk.kind == ChunkKind::refilled);
        REQUIRE(rf.chunk.masking_ratio.has_value());
        CHECK(*rf.chunk.masking_ratio == 0.3);
        std::set<std::size_t> masked(plan.masked_indices.begin(), plan.masked_indices.end());
        for (std::size_t i = 0; i < c.sentences.size(); ++i) {
            if (masked.count(i)) continue;
            CHECK(rf.chunk.sentence_text(i) == c.sentence_text(i));
        }
        CHECK(rf.source_chunk_id == c.chunk_id);
    }
    SUBCASE("deterministic replay") {
        TestGenerationClient gen_a(7), gen_b(7);
        RefilledChunk r1 = apply_refill(c, plan, gen_a);
        RefilledChunk r2 = apply_refill(c, plan, gen_b);
        CHECK(r1.chunk.text == r2.chunk.text);
        CHECK(r1.chunk.chunk_id == r2.chunk.chunk_id);
    }
    SUBCASE("empty replacement rejected") {
        struct EmptyGen : GenerationClient {
            std::string id = "empty";
            const std::string& descriptor() const override { return id; }
            std::string refill(const RefillRequest&) override { return "  "; }
        } bad;
        CHECK_THROWS_AS(apply_refill(c, plan, bad), std::runtime_error);
    }
    SUBCASE("placeholder leakage rejected") {
        struct LeakGen : GenerationClient {
            std::string id = "leak";
            const std::string& descriptor() const override { return id; }
            std::string refill(const RefillRequest&) override {
                return std::string("still ") + kMaskPlaceholder;
            }
        } bad;
        CHECK_THROWS_AS(apply_refill(c, plan, bad), std::runtime_error);
    }
    SUBCASE("plan must belong to the chunk") {
        ChunkRecord other = c;
        other.chunk_id = "different";
        CHECK_THROWS_AS(apply_refill(other, plan, gen), std::invalid_argument);
    }
}

TEST_CASE("label function") {
    SUBCASE("hand-evaluated fixtures") {
        PairLabel l = pair_label(0.5, 0.5);
        CHECK(l.x == doctest::Approx(0.31640625).epsilon(1e-12));
        CHECK(l.s == 0.3);
        l = pair_label(0.2, 0.4);
        CHECK(l.x == doctest::Approx(0.65028096).epsilon(1e-9));
        CHECK(l.s == 0.7);
        l = pair_label(0.4, 0.4);
        CHECK(l.x == doctest::Approx(0.49787136).epsilon(1e-9));
        CHECK(l.s == 0.5);  // midpoint, discarded downstream
        l = pair_label(0.1, 0.1);
        CHECK(l.x == doctest::Approx(0.96059601).epsilon(1e-9));
        CHECK(l.s == 1.0);  // extreme, discarded downstream
    }
    SUBCASE("off-grid rejected") {
        CHECK_THROWS_AS(pair_label(0.35, 0.4), std::invalid_argument);
        CHECK_THROWS_AS(pair_label(0.0, 0.4), std::invalid_argument);
    }
    SUBCASE("grid closure against brute force") {
        std::set<double> impl, oracle;
        for (double r1 : masking_grid())
            for (double r2 : masking_grid()) {
                impl.insert(pair_label(r1, r2).s);
                oracle.insert(oracle_s(oracle_x(r1, r2)));
            }
        CHECK(impl == oracle);
    }
    SUBCASE("x strictly decreasing in each ratio") {
        auto grid = masking_grid();
        for (double fixed : grid)
            for (std::size_t i = 1; i < grid.size(); ++i) {
                CHECK(pair_label(grid[i], fixed).x < pair_label(grid[i - 1], fixed).x);
                CHECK(pair_label(fixed, grid[i]).x < pair_label(fixed, grid[i - 1]).x);
            }
    }
    SUBCASE("symmetry") {
        for (double r1 : masking_grid())
            for (double r2 : masking_grid())
                CHECK(pair_label(r1, r2).s == pair_label(r2, r1).s);
    }
}

TEST_CASE("pair set construction") {
    auto fx = stylerm::testing::make_fixture_corpus(8, 2, 4000, 21);
    std::vector<ChunkRecord> chunks;
    for (const BookRecord& b : fx.books)
        for (ChunkRecord& c : make_chunks(b, 500)) chunks.push_back(std::move(c));
    SplitAssignment splits = split_authors(fx.authors, 0.5, 0.25, 0.25, 13);
    TestGenerationClient gen(5);

    SUBCASE("zero targets is a no-op") {
        PairSetManifest m = build_pairset(chunks, splits, {0, 1}, gen);
        CHECK(m.pairs.empty());
        CHECK(gen.calls() == 0);
    }

    SUBCASE("manifest validates and counts match") {
        PairSetConfig cfg{6, 17};
        PairSetManifest m = build_pairset(chunks, splits, cfg, gen);
        REQUIRE(!m.pairs.empty());

        std::map<std::string, ChunkRecord> by_id;
        for (const ChunkRecord& c : chunks) by_id[c.chunk_id] = c;
        for (const ChunkRecord& c : m.refilled) by_id[c.chunk_id] = c;

        for (const PairExample& p : m.pairs) {
            auto err = validate_pair(p, by_id, splits);
            INFO(p.left_chunk_id << " / " << p.right_chunk_id << ": " << err.value_or(""));
            CHECK(!err.has_value());
        }
        // recorded counts equal actual counts
        std::map<std::tuple<std::string, std::string, double>, std::size_t> actual;
        for (const PairExample& p : m.pairs)
            ++actual[{split_name(p.split), p.subject, p.label}];
        CHECK(actual == m.counts);

        // no duplicate unordered pair within a split
        std::set<std::tuple<std::string, std::string, std::string>> seen;
        for (const PairExample& p : m.pairs) {
            std::string a = std::min(p.left_chunk_id, p.right_chunk_id);
            std::string b = std::max(p.left_chunk_id, p.right_chunk_id);
            CHECK(seen.insert({split_name(p.split), a, b}).second);
        }
        // every bin either met target or recorded a shortfall
        std::set<std::tuple<std::string, std::string, double>> short_keys;
        for (const BinShortfall& sf : m.shortfalls)
            short_keys.insert({split_name(sf.split), sf.subject, sf.label});
        std::vector<double> bins = intermediate_bins();
        bins.push_back(0.0);
        bins.push_back(1.0);
        for (Split sp : {Split::train, Split::validation, Split::test})
            for (double label : bins) {
                std::tuple<std::string, std::string, double> key{split_name(sp), fx.subject,
                                                                 label};
                std::size_t got = actual.count(key) ? actual[key] : 0;
                if (got < cfg.targets_per_bin) CHECK(short_keys.count(key) == 1);
            }
    }

    SUBCASE("deterministic rebuild") {
        TestGenerationClient g1(5), g2(5);
        PairSetManifest m1 = build_pairset(chunks, splits, {4, 17}, g1);
        PairSetManifest m2 = build_pairset(chunks, splits, {4, 17}, g2);
        write_manifest("pairs_a.jsonl", m1);
        write_manifest("pairs_b.jsonl", m2);
        std::ifstream fa("pairs_a.jsonl"), fb("pairs_b.jsonl");
        std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
        std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
        CHECK(sa == sb);
        std::remove("pairs_a.jsonl");
        std::remove("pairs_b.jsonl");
    }

    SUBCASE("single-author subject reports cross-author shortfall") {
        auto lone = stylerm::testing::make_fixture_corpus(3, 2, 4000, 4);
        std::vector<ChunkRecord> lone_chunks;
        for (const BookRecord& b : lone.books)
            for (ChunkRecord& c : make_chunks(b, 500)) lone_chunks.push_back(std::move(c));
        SplitAssignment lone_splits = split_authors(lone.authors, 0.34, 0.33, 0.33, 1);
        TestGenerationClient g(2);
        PairSetManifest m = build_pairset(lone_chunks, lone_splits, {5, 3}, g);
        // each split holds exactly one author: s=0.0 bins must all be short
        bool found = false;
        for (const BinShortfall& sf : m.shortfalls)
            if (sf.label == 0.0 && sf.achieved == 0) found = true;
        CHECK(found);
    }

    SUBCASE("manifest round-trip") {
        PairSetManifest m = build_pairset(chunks, splits, {3, 8}, gen);
        write_manifest("pairs_rt.jsonl", m);
        PairSetManifest back = read_manifest_pairs("pairs_rt.jsonl");
        CHECK(back.pairs.size() == m.pairs.size());
        CHECK(back.counts == m.counts);
        CHECK(back.config.seed == m.config.seed);
        CHECK(back.shortfalls.size() == m.shortfalls.size());
        std::remove("pairs_rt.jsonl");
    }
}
