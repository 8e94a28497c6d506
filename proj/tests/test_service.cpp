#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fixtures.hpp"
#include "stylerm/service.hpp"

#include <httplib.h>
#include <json.hpp>

using json = nlohmann::json;
using namespace stylerm;

namespace {

struct Harness {
    TestEmbeddingBackend backend{7, 0.5};
    EmbeddingCache cache;
    StubJudgeClient judge{"7"};
    ScoringContext ctx;
    std::string candidate;
    std::string reference;

    Harness() {
        candidate = stylerm::testing::make_story(1350, true, 11);
        reference = stylerm::testing::make_story(1400, true, 12);
        ctx.backend = &backend;
        ctx.cache = &cache;
        ctx.judge = &judge;
        ctx.weights = RewardWeights{};
        ctx.prompt_context = "Write an adventure story.";
        ctx.anchors_id = "none";
    }

    ScoreRequest request() const {
        ScoreRequest req;
        req.candidate_text = candidate;
        req.reference_text = reference;
        return req;
    }
};

}  // namespace

TEST_CASE("request validation") {
    Harness h;
    ScoreRequest req = h.request();
    CHECK_NOTHROW(req.validate());
    SUBCASE("both reference forms rejected") {
        req.reference_set_id = "set";
        CHECK_THROWS_AS(req.validate(), std::invalid_argument);
    }
    SUBCASE("neither reference form rejected") {
        req.reference_text.reset();
        CHECK_THROWS_AS(req.validate(), std::invalid_argument);
    }
    SUBCASE("empty candidate rejected") {
        req.candidate_text.clear();
        CHECK_THROWS_AS(req.validate(), std::invalid_argument);
    }
}

TEST_CASE("library scoring path") {
    Harness h;
    ScoreResponse resp = score(h.request(), h.ctx);
    CHECK(resp.backend_id == h.backend.backend_id());
    CHECK(resp.judge_id == "stub-judge");
    CHECK(resp.breakdown.completeness == 1.0);
    CHECK(resp.breakdown.content == doctest::Approx(0.7).epsilon(1e-12));
    // composite recomputes from components
    double expect = 0.6 * resp.breakdown.style_raw + 0.3 * 0.7 + 0.1 * 1.0;
    CHECK(resp.breakdown.composite == doctest::Approx(expect).epsilon(1e-12));

    SUBCASE("identical style inputs give the stub fixture composite") {
        // candidate scored against itself: cosine 1, so 0.6 + 0.21 + 0.1 with
        // judge 7 and a complete in-range story
        ScoreRequest req = h.request();
        req.reference_text = h.candidate;
        ScoreResponse self = score(req, h.ctx);
        CHECK(self.breakdown.style_raw == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(self.breakdown.composite == doctest::Approx(0.91).epsilon(1e-9));
    }
    SUBCASE("calibrated mode requires anchors") {
        ScoreRequest req = h.request();
        req.mode = StyleMode::calibrated;
        CHECK_THROWS_AS(score(req, h.ctx), std::invalid_argument);
        h.ctx.anchors = CalibrationAnchors{0.2261, 0.8158, "fixture"};
        ScoreResponse r = score(req, h.ctx);
        CHECK(r.breakdown.mode == StyleMode::calibrated);
        CHECK(r.breakdown.style_calibrated ==
              doctest::Approx(calibrate_style(r.breakdown.style_raw, *h.ctx.anchors))
                  .epsilon(1e-12));
    }
    SUBCASE("reference set sampling is seed-stable") {
        auto fx = stylerm::testing::make_fixture_corpus(3, 1, 2000, 5);
        std::vector<ChunkRecord> chunks;
        for (const BookRecord& b : fx.books)
            for (ChunkRecord& c : make_chunks(b, 500)) chunks.push_back(std::move(c));
        REQUIRE(chunks.size() >= 2);
        h.ctx.reference_sets["fiction"] = chunks;

        ScoreRequest req = h.request();
        req.reference_text.reset();
        req.reference_set_id = "fiction";
        req.seed = 42;
        ScoreResponse r1 = score(req, h.ctx);
        ScoreResponse r2 = score(req, h.ctx);
        CHECK(!r1.resolved_reference_chunk_id.empty());
        CHECK(r1.resolved_reference_chunk_id == r2.resolved_reference_chunk_id);
        CHECK(r1.breakdown.composite == r2.breakdown.composite);

        req.reference_set_id = "missing";
        CHECK_THROWS_AS(score(req, h.ctx), std::invalid_argument);
    }
}

TEST_CASE("wire codecs") {
    json body{{"candidate_text", "hello world"},
              {"reference_text", "ref text"},
              {"mode", "calibrated"},
              {"options", {{"seed", 9}}}};
    ScoreRequest req = score_request_from_json(body.dump());
    CHECK(req.candidate_text == "hello world");
    CHECK(req.reference_text == "ref text");
    CHECK(req.mode == StyleMode::calibrated);
    CHECK(req.seed == 9);
    CHECK_THROWS(score_request_from_json("not json"));
    CHECK_THROWS(score_request_from_json("{}"));

    ScoreResponse resp;
    resp.breakdown.style_raw = 0.25;
    resp.breakdown.composite = 0.5;
    resp.backend_id = "b";
    json out = json::parse(score_response_to_json(resp));
    CHECK(out["breakdown"]["style_raw"] == 0.25);
    CHECK(out["breakdown"]["composite"] == 0.5);
    CHECK(out["backend_id"] == "b");
}

TEST_CASE("http service") {
    Harness h;
    ServeConfig cfg;
    cfg.port = 0;  // ephemeral
    RewardService service(h.ctx, cfg);
    int port = service.start_async();
    REQUIRE(port > 0);
    httplib::Client client("127.0.0.1", port);
    client.set_read_timeout(30, 0);

    SUBCASE("health") {
        auto res = client.Get("/v1/health");
        REQUIRE(res);
        CHECK(res->status == 200);
        json body = json::parse(res->body);
        CHECK(body["status"] == "ok");
    }
    SUBCASE("score equals the library call byte for byte") {
        ScoreRequest req = h.request();
        ScoreResponse direct = score(req, h.ctx);
        json body{{"candidate_text", h.candidate}, {"reference_text", h.reference}};
        auto res = client.Post("/v1/score", body.dump(), "application/json");
        REQUIRE(res);
        REQUIRE(res->status == 200);
        json got = json::parse(res->body);
        CHECK(got["breakdown"]["composite"].get<double>() == direct.breakdown.composite);
        CHECK(got["breakdown"]["style_raw"].get<double>() == direct.breakdown.style_raw);
        CHECK(got["breakdown"]["content"].get<double>() == direct.breakdown.content);
        CHECK(got["breakdown"]["completeness"].get<double>() ==
              direct.breakdown.completeness);
    }
    SUBCASE("stub composite fixture 0.79") {
        // style 0.8 cannot be forced through embeddings; exercised at the
        // composite level instead and the service path is checked for parity
        ContentJudgeResult content;
        content.raw_integer = 7;
        content.rescaled = 0.7;
        RewardBreakdown b =
            composite_reward(0.8, content, 1.0, RewardWeights{}, StyleMode::raw, std::nullopt);
        CHECK(b.composite == doctest::Approx(0.79).epsilon(1e-12));
    }
    SUBCASE("batch preserves order and isolates failures") {
        json items = json::array();
        items.push_back({{"candidate_text", h.candidate}, {"reference_text", h.reference}});
        items.push_back({{"candidate_text", h.candidate}});  // invalid: no reference
        items.push_back({{"candidate_text", h.reference}, {"reference_text", h.candidate}});
        auto res = client.Post("/v1/score/batch", items.dump(), "application/json");
        REQUIRE(res);
        REQUIRE(res->status == 200);
        json got = json::parse(res->body);
        REQUIRE(got.is_array());
        REQUIRE(got.size() == 3);
        CHECK(got[0].contains("breakdown"));
        CHECK(got[1].contains("error"));
        CHECK(got[2].contains("breakdown"));
        // order: first result matches the first request, not the third
        ScoreResponse first = score(h.request(), h.ctx);
        CHECK(got[0]["breakdown"]["composite"].get<double>() == first.breakdown.composite);
    }
    SUBCASE("batch size limit") {
        json items = json::array();
        for (std::size_t i = 0; i < cfg.max_batch + 1; ++i)
            items.push_back({{"candidate_text", "x"}, {"reference_text", "y"}});
        auto res = client.Post("/v1/score/batch", items.dump(), "application/json");
        REQUIRE(res);
        CHECK(res->status == 400);
    }
    SUBCASE("similarity endpoint") {
        json body{{"text_a", h.candidate}, {"text_b", h.candidate}};
        auto res = client.Post("/v1/similarity", body.dump(), "application/json");
        REQUIRE(res);
        REQUIRE(res->status == 200);
        json got = json::parse(res->body);
        CHECK(got["similarity"].get<double>() == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("malformed json is a 400 with an error body") {
        auto res = client.Post("/v1/score", "{not json", "application/json");
        REQUIRE(res);
        CHECK(res->status == 400);
        json got = json::parse(res->body);
        CHECK(got.contains("error"));
    }
    SUBCASE("invalid request is a 400") {
        auto res = client.Post("/v1/score", json{{"candidate_text", "x"}}.dump(),
                               "application/json");
        REQUIRE(res);
        CHECK(res->status == 400);
    }
    service.stop();
}

TEST_CASE("bearer auth") {
    Harness h;
    ServeConfig cfg;
    cfg.port = 0;
    cfg.bearer_token = "sekrit";
    RewardService service(h.ctx, cfg);
    int port = service.start_async();
    httplib::Client client("127.0.0.1", port);

    auto res = client.Get("/v1/health");
    REQUIRE(res);
    CHECK(res->status == 401);

    httplib::Headers auth{{"Authorization", "Bearer sekrit"}};
    res = client.Get("/v1/health", auth);
    REQUIRE(res);
    CHECK(res->status == 200);
    service.stop();
}
