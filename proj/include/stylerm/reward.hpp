#pragma once

// Reward math: quartile-anchored style calibration, piecewise length score,
// end-marker completeness gate, judge-based content score, and the weighted
// composite served to RL trainers.

#include "stylerm/stats.hpp"

#include <memory>
#include <optional>
#include <string>

namespace stylerm {

struct CalibrationAnchors {
    double a = 0;  // Q25 of cross-author similarity
    double b = 0;  // Q75 of same-author similarity
    std::string source;  // report identity + chunk size

    void validate() const;
};

struct LengthPolicy {
    std::size_t w_min = 500;
    std::size_t w_lo = 1200;
    std::size_t w_hi = 1500;
    std::size_t w_over = 1600;
    std::string end_marker = "THE END.";
};

struct RewardWeights {
    double style = 0.6;
    double content = 0.3;
    double completeness = 0.1;

    void validate() const;  // all in [0,1], sum 1 within 1e-9
};

struct ContentJudgeResult {
    int raw_integer = 0;       // 0-9
    double rescaled = 0;       // raw/10
    std::string judge_descriptor;
    std::string prompt_fingerprint;  // sha256 of the rendered prompt
};

enum class StyleMode { raw, calibrated };

struct RewardBreakdown {
    double style_raw = 0;
    double style_calibrated = 0;
    double content = 0;       // [0, 0.9]
    double completeness = 0;  // [0, 1]
    double composite = 0;
    StyleMode mode = StyleMode::raw;
    RewardWeights weights;
    std::optional<CalibrationAnchors> anchors;
};

// a = cross.q25, b = same.q75 from the pooled (all-subject) cell at the given
// chunk size. Throws on a missing cell or degenerate separation (b <= a).
CalibrationAnchors fit_anchors(const BenchmarkReport& report, std::size_t chunk_size);

// clamp((s - a)/(b - a), 0, 1)
double calibrate_style(double similarity, const CalibrationAnchors& anchors);

// Piecewise length score: 0 below w_min, ramp w/w_lo up to w_lo, plateau 1
// through w_over, then 1 - sqrt((w - w_over)/w_hi) clamped at 0.
double length_score(std::size_t words, const LengthPolicy& policy = {});

// length_score(word count) gated by an exact end-marker match on the final
// non-empty line (compared after trimming surrounding whitespace).
double completeness_reward(const std::string& text, const LengthPolicy& policy = {});

class JudgeClient {
public:
    virtual ~JudgeClient() = default;
    virtual const std::string& descriptor() const = 0;
    // Sends a rendered prompt, returns the judge's raw reply text.
    virtual std::string complete(const std::string& rendered_prompt) = 0;
};

// Test judge replying with a fixed text.
class StubJudgeClient : public JudgeClient {
public:
    explicit StubJudgeClient(std::string reply)
        : reply_(std::move(reply)), id_("stub-judge") {}
    const std::string& descriptor() const override { return id_; }
    std::string complete(const std::string&) override { return reply_; }

private:
    std::string reply_, id_;
};

// HTTP judge speaking {rendered_prompt} -> {text}.
class RemoteJudgeClient : public JudgeClient {
public:
    RemoteJudgeClient(std::string host, int port, std::string path = "/judge",
                      int timeout_sec = 60, int retries = 1);
    const std::string& descriptor() const override { return id_; }
    std::string complete(const std::string& rendered_prompt) override;

private:
    std::string id_, host_, path_;
    int port_, timeout_sec_, retries_;
};

// The rubric template shipped with the engine; {prompt} and {response_text}
// are substituted on render.
const std::string& content_judge_template();
std::string render_judge_prompt(const std::string& prompt_context,
                                const std::string& candidate_text);

// Parses the first standalone integer 0-9 from a judge reply. Returns
// nullopt when no such integer exists.
std::optional<int> parse_judge_score(const std::string& reply);

// Renders the rubric, queries the judge (one retry on an unparsable reply),
// and rescales the integer score by /10.
ContentJudgeResult content_reward(const std::string& candidate_text,
                                  const std::string& prompt_context, JudgeClient& judge);

// composite = w_style * style + w_content * content.rescaled + w_comp * completeness,
// with style = raw similarity or its calibration depending on mode.
RewardBreakdown composite_reward(double style_raw, const ContentJudgeResult& content,
                                 double completeness, const RewardWeights& weights,
                                 StyleMode mode,
                                 const std::optional<CalibrationAnchors>& anchors);

void write_anchors(const std::string& path, const CalibrationAnchors& anchors);
CalibrationAnchors read_anchors(const std::string& path);

}  // namespace stylerm
