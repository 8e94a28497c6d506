#include "stylerm/service.hpp"

#include <chrono>
#include <random>
#include <stdexcept>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace stylerm {

using nlohmann::json;

void ScoreRequest::validate() const {
    if (candidate_text.empty()) throw std::invalid_argument("candidate_text is empty");
    bool has_ref = reference_text.has_value();
    bool has_set = reference_set_id.has_value();
    if (has_ref == has_set)
        throw std::invalid_argument(
            "exactly one of reference_text / reference_set_id must be present");
}

ScoreResponse score(const ScoreRequest& req, const ScoringContext& ctx) {
    req.validate();
    if (!ctx.backend) throw std::runtime_error("no embedding backend configured");
    if (!ctx.judge) throw std::runtime_error("no judge client configured");
    auto t0 = std::chrono::steady_clock::now();

    ScoreResponse resp;
    std::string reference;
    if (req.reference_text) {
        reference = *req.reference_text;
    } else {
        auto it = ctx.reference_sets.find(*req.reference_set_id);
        if (it == ctx.reference_sets.end() || it->second.empty())
            throw std::invalid_argument("unknown or empty reference set: " +
                                        *req.reference_set_id);
        std::uint64_t seed = req.seed.value_or(
            std::chrono::steady_clock::now().time_since_epoch().count());
        std::mt19937_64 rng(seed);
        const ChunkRecord& pick = it->second[rng() % it->second.size()];
        reference = pick.text;
        resp.resolved_reference_chunk_id = pick.chunk_id;
    }
    if (reference.empty()) throw std::invalid_argument("empty reference text");

    const RewardWeights weights = req.weights_override.value_or(ctx.weights);
    const LengthPolicy policy = req.length_policy_override.value_or(ctx.length_policy);
    if (req.mode == StyleMode::calibrated && !ctx.anchors)
        throw std::invalid_argument("calibrated mode requested but no anchors configured");

    EmbeddingVector u = embed_text(req.candidate_text, *ctx.backend, ctx.cache);
    EmbeddingVector v = embed_text(reference, *ctx.backend, ctx.cache);
    double similarity = cosine_similarity(u, v);

    ContentJudgeResult content =
        content_reward(req.candidate_text, ctx.prompt_context, *ctx.judge);
    double completeness = completeness_reward(req.candidate_text, policy);

    resp.breakdown =
        composite_reward(similarity, content, completeness, weights, req.mode, ctx.anchors);
    resp.backend_id = ctx.backend->backend_id();
    resp.judge_id = ctx.judge->descriptor();
    resp.anchors_id = ctx.anchors_id;
    resp.elapsed_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
    return resp;
}

// --- wire codecs ------------------------------------------------------------

ScoreRequest score_request_from_json(const std::string& body) {
    json j = json::parse(body);
    ScoreRequest req;
    req.candidate_text = j.at("candidate_text").get<std::string>();
    if (j.contains("reference_text")) req.reference_text = j.at("reference_text").get<std::string>();
    if (j.contains("reference_set_id"))
        req.reference_set_id = j.at("reference_set_id").get<std::string>();
    std::string mode = j.value("mode", "raw");
    if (mode == "raw") req.mode = StyleMode::raw;
    else if (mode == "calibrated") req.mode = StyleMode::calibrated;
    else throw std::invalid_argument("unknown mode: " + mode);
    if (j.contains("options")) {
        const json& o = j.at("options");
        if (o.contains("weights")) {
            RewardWeights w;
            w.style = o.at("weights").at("style");
            w.content = o.at("weights").at("content");
            w.completeness = o.at("weights").at("completeness");
            w.validate();
            req.weights_override = w;
        }
        if (o.contains("length_policy")) {
            const json& lp = o.at("length_policy");
            LengthPolicy p;
            p.w_min = lp.value("w_min", p.w_min);
            p.w_lo = lp.value("w_lo", p.w_lo);
            p.w_hi = lp.value("w_hi", p.w_hi);
            p.w_over = lp.value("w_over", p.w_over);
            p.end_marker = lp.value("end_marker", p.end_marker);
            req.length_policy_override = p;
        }
        if (o.contains("seed")) req.seed = o.at("seed").get<std::uint64_t>();
    }
    return req;
}

std::string score_response_to_json(const ScoreResponse& resp) {
    const RewardBreakdown& b = resp.breakdown;
    json j{{"breakdown",
            {{"style_raw", b.style_raw},
             {"style_calibrated", b.style_calibrated},
             {"content", b.content},
             {"completeness", b.completeness},
             {"composite", b.composite},
             {"mode", b.mode == StyleMode::raw ? "raw" : "calibrated"},
             {"weights",
              {{"style", b.weights.style},
               {"content", b.weights.content},
               {"completeness", b.weights.completeness}}}}},
           {"backend_id", resp.backend_id},
           {"judge_id", resp.judge_id},
           {"anchors_id", resp.anchors_id},
           {"elapsed_ms", resp.elapsed_ms}};
    if (b.anchors)
        j["breakdown"]["anchors"] = {{"a", b.anchors->a}, {"b", b.anchors->b}};
    if (!resp.resolved_reference_chunk_id.empty())
        j["resolved_reference_chunk_id"] = resp.resolved_reference_chunk_id;
    return j.dump();
}

// --- HTTP service -----------------------------------------------------------

struct RewardService::Impl {
    ScoringContext ctx;
    ServeConfig cfg;
    httplib::Server server;
    std::thread worker;
    int bound_port = 0;

    Impl(ScoringContext c, ServeConfig s) : ctx(std::move(c)), cfg(std::move(s)) {
        install_routes();
    }

    bool authorized(const httplib::Request& req) const {
        if (cfg.bearer_token.empty()) return true;
        return req.get_header_value("Authorization") == "Bearer " + cfg.bearer_token;
    }

    void install_routes() {
        server.Get("/v1/health", [this](const httplib::Request& req, httplib::Response& res) {
            if (!authorized(req)) { fail(res, 401, "request", "unauthorized"); return; }
            json j{{"status", "ok"},
                   {"backend_id", ctx.backend ? ctx.backend->backend_id() : ""},
                   {"judge_id", ctx.judge ? ctx.judge->descriptor() : ""},
                   {"anchors_id", ctx.anchors_id}};
            res.set_content(j.dump(), "application/json");
        });

        server.Post("/v1/score", [this](const httplib::Request& req, httplib::Response& res) {
            if (!authorized(req)) { fail(res, 401, "request", "unauthorized"); return; }
            handle_one(req.body, res);
        });

        server.Post("/v1/score/batch",
                    [this](const httplib::Request& req, httplib::Response& res) {
            if (!authorized(req)) { fail(res, 401, "request", "unauthorized"); return; }
            json batch;
            try {
                batch = json::parse(req.body);
                if (!batch.is_array()) throw std::invalid_argument("batch body must be an array");
                if (batch.size() > cfg.max_batch)
                    throw std::invalid_argument("batch exceeds max size " +
                                                std::to_string(cfg.max_batch));
            } catch (const std::exception& e) {
                fail(res, 400, "request", e.what());
                return;
            }
            // order-preserving, per-item error isolation
            json out = json::array();
            for (const json& item : batch) {
                try {
                    ScoreRequest sr = score_request_from_json(item.dump());
                    out.push_back(json::parse(score_response_to_json(score(sr, ctx))));
                } catch (const std::invalid_argument& e) {
                    out.push_back(json{{"error", e.what()}, {"component", "request"}});
                } catch (const std::exception& e) {
                    out.push_back(json{{"error", e.what()}, {"component", "backend"}});
                }
            }
            res.set_content(out.dump(), "application/json");
        });

        server.Post("/v1/similarity",
                    [this](const httplib::Request& req, httplib::Response& res) {
            if (!authorized(req)) { fail(res, 401, "request", "unauthorized"); return; }
            try {
                json j = json::parse(req.body);
                std::string a = j.at("text_a"), b = j.at("text_b");
                if (a.empty() || b.empty()) throw std::invalid_argument("empty text");
                EmbeddingVector u = embed_text(a, *ctx.backend, ctx.cache);
                EmbeddingVector v = embed_text(b, *ctx.backend, ctx.cache);
                json out{{"similarity", cosine_similarity(u, v)},
                         {"backend_id", ctx.backend->backend_id()}};
                res.set_content(out.dump(), "application/json");
            } catch (const std::invalid_argument& e) {
                fail(res, 400, "request", e.what());
            } catch (const json::exception& e) {
                fail(res, 400, "request", e.what());
            } catch (const std::exception& e) {
                fail(res, 500, "embedding backend", e.what());
            }
        });
    }

    void handle_one(const std::string& body, httplib::Response& res) {
        try {
            ScoreRequest sr = score_request_from_json(body);
            res.set_content(score_response_to_json(score(sr, ctx)), "application/json");
        } catch (const json::exception& e) {
            fail(res, 400, "request", e.what());
        } catch (const std::invalid_argument& e) {
            fail(res, 400, "request", e.what());
        } catch (const std::exception& e) {
            fail(res, 500, "scoring backend", e.what());
        }
    }

    static void fail(httplib::Response& res, int status, const std::string& component,
                     const std::string& message) {
        res.status = status;
        res.set_content(json{{"error", message}, {"component", component}}.dump(),
                        "application/json");
    }
};

RewardService::RewardService(ScoringContext ctx, ServeConfig cfg)
    : impl_(std::make_unique<Impl>(std::move(ctx), std::move(cfg))) {}

RewardService::~RewardService() { stop(); }

void RewardService::run() {
    if (!impl_->server.listen(impl_->cfg.host, impl_->cfg.port))
        throw std::runtime_error("cannot listen on " + impl_->cfg.host + ":" +
                                 std::to_string(impl_->cfg.port));
}

int RewardService::start_async() {
    int port = impl_->cfg.port;
    if (port == 0) {
        port = impl_->server.bind_to_any_port(impl_->cfg.host);
        if (port <= 0) throw std::runtime_error("cannot bind service port");
    } else if (!impl_->server.bind_to_port(impl_->cfg.host, port)) {
        throw std::runtime_error("cannot bind port " + std::to_string(port));
    }
    impl_->bound_port = port;
    impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return port;
}

void RewardService::stop() {
    if (impl_ && impl_->server.is_running()) impl_->server.stop();
    if (impl_ && impl_->worker.joinable()) impl_->worker.join();
}

}  // namespace stylerm
