#pragma once

// Reward-scoring front end: the resolved-request scoring path shared by the
// CLI and the HTTP service, plus the /v1 service itself.

#include "stylerm/embed.hpp"
#include "stylerm/pairset.hpp"
#include "stylerm/reward.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace stylerm {

struct ScoreRequest {
    std::string candidate_text;
    std::optional<std::string> reference_text;
    std::optional<std::string> reference_set_id;
    StyleMode mode = StyleMode::raw;
    std::optional<RewardWeights> weights_override;
    std::optional<LengthPolicy> length_policy_override;
    std::optional<std::uint64_t> seed;  // reference-set sampling

    void validate() const;  // exactly one of reference_text / reference_set_id
};

struct ScoreResponse {
    RewardBreakdown breakdown;
    std::string backend_id;
    std::string judge_id;
    std::string anchors_id;
    std::string resolved_reference_chunk_id;  // set when a reference set was used
    double elapsed_ms = 0;
};

struct ScoringContext {
    EmbeddingBackend* backend = nullptr;
    EmbeddingCache* cache = nullptr;
    JudgeClient* judge = nullptr;
    std::optional<CalibrationAnchors> anchors;
    std::string anchors_id;
    RewardWeights weights;
    LengthPolicy length_policy;
    std::string prompt_context;  // judge prompt context for all requests
    // reference_set_id -> chunks
    std::map<std::string, std::vector<ChunkRecord>> reference_sets;
};

// The single scoring path. The HTTP service calls exactly this, so service
// responses are bit-identical to direct library calls.
ScoreResponse score(const ScoreRequest& req, const ScoringContext& ctx);

struct ServeConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::size_t max_batch = 64;
    std::string bearer_token;  // empty = no auth
};

class RewardService {
public:
    RewardService(ScoringContext ctx, ServeConfig cfg);
    ~RewardService();

    // Blocks until stop() is called from another thread.
    void run();
    // Binds to an ephemeral or fixed port and serves in a background thread.
    // Returns the bound port.
    int start_async();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// JSON codecs for the wire format (exposed for tests).
ScoreRequest score_request_from_json(const std::string& body);
std::string score_response_to_json(const ScoreResponse& resp);

}  // namespace stylerm
