#include "stylerm/reward.hpp"

#include "stylerm/hash.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <httplib.h>
#include <json.hpp>

namespace stylerm {

using nlohmann::json;

void CalibrationAnchors::validate() const {
    if (!std::isfinite(a) || !std::isfinite(b))
        throw std::invalid_argument("anchors must be finite");
    if (b <= a) throw std::invalid_argument("degenerate separation: b <= a");
}

void RewardWeights::validate() const {
    for (double w : {style, content, completeness})
        if (w < 0 || w > 1) throw std::invalid_argument("weight out of [0,1]");
    if (std::abs(style + content + completeness - 1.0) > 1e-9)
        throw std::invalid_argument("weights must sum to 1");
}

CalibrationAnchors fit_anchors(const BenchmarkReport& report, std::size_t chunk_size) {
    const BenchmarkCell* cell = report.find(chunk_size, "");
    if (!cell || !cell->skipped_reason.empty() || !cell->cross || !cell->same)
        throw std::invalid_argument("no pooled benchmark cell at chunk size " +
                                    std::to_string(chunk_size));
    CalibrationAnchors anchors;
    anchors.a = cell->cross->q25;
    anchors.b = cell->same->q75;
    anchors.source = report.backend_id + "@" + std::to_string(chunk_size) + "w";
    anchors.validate();
    return anchors;
}

double calibrate_style(double similarity, const CalibrationAnchors& anchors) {
    anchors.validate();
    double x = (similarity - anchors.a) / (anchors.b - anchors.a);
    return std::max(0.0, std::min(1.0, x));
}

double length_score(std::size_t words, const LengthPolicy& p) {
    if (p.w_min >= p.w_lo || p.w_lo > p.w_over || p.w_hi == 0)
        throw std::invalid_argument("invalid length policy");
    double w = static_cast<double>(words);
    if (words < p.w_min) return 0.0;
    if (words < p.w_lo) return w / static_cast<double>(p.w_lo);
    if (words <= p.w_over) return 1.0;
    double over = (w - static_cast<double>(p.w_over)) / static_cast<double>(p.w_hi);
    return std::max(0.0, 1.0 - std::sqrt(over));
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string final_nonempty_line(const std::string& text) {
    std::size_t end = text.size();
    while (end > 0) {
        std::size_t nl = text.rfind('\n', end - 1);
        std::size_t start = nl == std::string::npos ? 0 : nl + 1;
        std::string line = trim(text.substr(start, end - start));
        if (!line.empty()) return line;
        if (nl == std::string::npos) break;
        end = nl;
    }
    return {};
}

}  // namespace

double completeness_reward(const std::string& text, const LengthPolicy& policy) {
    if (final_nonempty_line(text) != policy.end_marker) return 0.0;
    return length_score(count_words(text), policy);
}

// --- content judging --------------------------------------------------------

const std::string& content_judge_template() {
    static const std::string tmpl = R"(### Task
Return ONLY one integer 0-9.

You are given:
1) <input_prompt> (contains Author/Title, the requested plot, and constraints)
2) <text> (the generated story)

You must compute:
A) Plot adherence (YES/NO)
B) Writing BaseScore (0-9) from Grammar/Clarity/Coherence/Concision
C) FinalScore with the rules below

<input_prompt>
{prompt}
</input_prompt>

<text>
{response_text}
</text>

### Step 1 - Extract requirements from <input_prompt> (must do internally)
- Extract REQUIRED_PLOT as the text between the word "about" and the phrase "in this style." in the Task line.
If you cannot reliably extract REQUIRED_PLOT, set Adherence = NO.
- Extract FORBIDDEN strings: the Author value and the Title value (from the Style Target block), if present.
- Extract REQUIRED_ENDING: final line must be exactly "THE END."

### Step 2 - Plot adherence (STRICT)
Adherence = YES only if the story is clearly about REQUIRED_PLOT (not a different topic), i.e. the main situation/topic matches.
Otherwise Adherence = NO.

### Step 3 - Writing BaseScore (0-9) (must follow internally)
Rate ONLY basic writing quality (ignore creativity and plot quality).

A) Subscore each aspect: 0 (bad) / 1 (ok) / 2 (good)
B) POINTS = sum (0-8)
C) BaseScore = POINTS (0-8)
D) Upgrade 8->9 ONLY if publication-ready (no noticeable errors or awkwardness)

Guides:
- Grammar: 0 blocks meaning / 1 some errors / 2 clean
- Clarity: 0 often unclear / 1 mostly clear / 2 consistently clear
- Coherence: 0 disjoint / 1 some jumps / 2 smooth flow
- Concision: 0 very wordy / 1 some wordiness / 2 tight

### Step 4 - Hard constraint penalties (STRICT)
- If the last non-empty line is not exactly: THE END.  => FinalScore = 0
- Else if the story text contains the Author name or the Title (case-insensitive, substring match) => cap FinalScore at 2

### Step 5 - Final score rule (STRICT)
- If Adherence = YES: FinalScore = BaseScore (then apply caps above if triggered)
- If Adherence = NO: FinalScore = floor(BaseScore / 2) (then apply caps above if triggered)

Output ONLY the integer FinalScore (0-9).
Score:
)";
    return tmpl;
}

std::string render_judge_prompt(const std::string& prompt_context,
                                const std::string& candidate_text) {
    std::string out = content_judge_template();
    auto replace_all = [&](const std::string& from, const std::string& to) {
        std::size_t pos = 0;
        while ((pos = out.find(from, pos)) != std::string::npos) {
            out.replace(pos, from.size(), to);
            pos += to.size();
        }
    };
    replace_all("{prompt}", prompt_context);
    replace_all("{response_text}", candidate_text);
    return out;
}

std::optional<int> parse_judge_score(const std::string& reply) {
    auto boundary = [](char c) {
        unsigned char u = static_cast<unsigned char>(c);
        return !std::isalnum(u) && c != '.' && c != '-';
    };
    for (std::size_t i = 0; i < reply.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(reply[i]))) continue;
        bool left_ok = i == 0 || boundary(reply[i - 1]);
        bool right_ok = i + 1 == reply.size() || boundary(reply[i + 1]);
        if (left_ok && right_ok) return reply[i] - '0';
    }
    return std::nullopt;
}

ContentJudgeResult content_reward(const std::string& candidate_text,
                                  const std::string& prompt_context, JudgeClient& judge) {
    std::string rendered = render_judge_prompt(prompt_context, candidate_text);
    std::optional<int> score;
    for (int attempt = 0; attempt < 2 && !score; ++attempt)
        score = parse_judge_score(judge.complete(rendered));
    if (!score)
        throw std::runtime_error("judge-parse error: no standalone integer 0-9 in reply from " +
                                 judge.descriptor());
    ContentJudgeResult out;
    out.raw_integer = *score;
    out.rescaled = *score / 10.0;
    out.judge_descriptor = judge.descriptor();
    out.prompt_fingerprint = sha256_hex(rendered);
    return out;
}

RemoteJudgeClient::RemoteJudgeClient(std::string host, int port, std::string path,
                                     int timeout_sec, int retries)
    : host_(std::move(host)), path_(std::move(path)), port_(port),
      timeout_sec_(timeout_sec), retries_(retries) {
    id_ = "http-judge:" + host_ + ":" + std::to_string(port_) + path_;
}

std::string RemoteJudgeClient::complete(const std::string& rendered_prompt) {
    json body{{"rendered_prompt", rendered_prompt}};
    std::string last_error;
    for (int attempt = 0; attempt <= retries_; ++attempt) {
        httplib::Client cli(host_, port_);
        cli.set_read_timeout(timeout_sec_, 0);
        auto res = cli.Post(path_, body.dump(), "application/json");
        if (!res || res->status != 200) {
            last_error = res ? "status " + std::to_string(res->status) : "connection failed";
            continue;
        }
        return json::parse(res->body).at("text").get<std::string>();
    }
    throw std::runtime_error("judge endpoint failed after retries: " + last_error);
}

// --- composite --------------------------------------------------------------

RewardBreakdown composite_reward(double style_raw, const ContentJudgeResult& content,
                                 double completeness, const RewardWeights& weights,
                                 StyleMode mode,
                                 const std::optional<CalibrationAnchors>& anchors) {
    weights.validate();
    if (mode == StyleMode::calibrated && !anchors)
        throw std::invalid_argument("calibrated mode requires anchors");
    RewardBreakdown b;
    b.style_raw = style_raw;
    b.style_calibrated = anchors ? calibrate_style(style_raw, *anchors) : 0.0;
    b.content = content.rescaled;
    b.completeness = completeness;
    b.mode = mode;
    b.weights = weights;
    b.anchors = anchors;
    double style = mode == StyleMode::raw ? b.style_raw : b.style_calibrated;
    b.composite = weights.style * style + weights.content * b.content +
                  weights.completeness * b.completeness;
    return b;
}

void write_anchors(const std::string& path, const CalibrationAnchors& anchors) {
    anchors.validate();
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write: " + path);
        out << json{{"a", anchors.a}, {"b", anchors.b}, {"source", anchors.source}}.dump(2)
            << "\n";
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot move anchors into place: " + path);
}

CalibrationAnchors read_anchors(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read: " + path);
    json j = json::parse(in);
    CalibrationAnchors a;
    a.a = j.at("a");
    a.b = j.at("b");
    a.source = j.value("source", "");
    a.validate();
    return a;
}

}  // namespace stylerm
