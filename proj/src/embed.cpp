#include "stylerm/embed.hpp"

#include "stylerm/hash.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <httplib.h>
#include <json.hpp>

namespace stylerm {

using nlohmann::json;

double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v) {
    if (u.dimension() != v.dimension())
        throw std::invalid_argument("cosine_similarity: dimension mismatch (" +
                                    std::to_string(u.dimension()) + " vs " +
                                    std::to_string(v.dimension()) + ")");
    double dot = 0, nu = 0, nv = 0;
    for (std::size_t i = 0; i < u.values.size(); ++i) {
        dot += u.values[i] * v.values[i];
        nu += u.values[i] * u.values[i];
        nv += v.values[i] * v.values[i];
    }
    if (nu == 0 || nv == 0)
        throw std::invalid_argument("cosine_similarity: zero-norm vector");
    double s = dot / (std::sqrt(nu) * std::sqrt(nv));
    return std::max(-1.0, std::min(1.0, s));
}

// --- test backend -----------------------------------------------------------

TestEmbeddingBackend::TestEmbeddingBackend(std::uint64_t seed, double delta, std::size_t dim)
    : seed_(seed), delta_(delta), dim_(dim) {
    if (delta < 0) throw std::invalid_argument("delta must be >= 0");
    std::ostringstream id;
    id << "test-s" << seed << "-d" << delta << "-" << dim;
    id_ = id.str();
}

namespace {

// splitmix64, used to expand hashes into per-dimension values
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline double unit_interval(std::uint64_t x) {
    return static_cast<double>(x >> 11) * (1.0 / 9007199254740992.0);  // [0,1)
}

std::vector<std::string> words_of(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
        } else {
            cur += static_cast<char>(c);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

}  // namespace

void TestEmbeddingBackend::set_author_of_text(const std::string& text,
                                              const std::string& author_id) {
    author_by_text_hash_[sha256_hex(text)] = author_id;
}

EmbeddingVector TestEmbeddingBackend::embed_one(
    const std::string& text, const std::optional<std::string>& author_id) const {
    std::vector<double> v(dim_, 0.0);
    // word-multiset features: each word contributes a sparse pseudo-random
    // pattern, so shared vocabulary yields positive baseline similarity
    for (const std::string& w : words_of(text)) {
        std::uint64_t h = mix64(fnv1a64(w) ^ seed_);
        for (int k = 0; k < 4; ++k) {
            h = mix64(h);
            std::size_t idx = h % dim_;
            double val = unit_interval(mix64(h ^ 0xabcdefull)) * 2.0 - 1.0;
            v[idx] += val;
        }
    }
    double norm = 0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0)
        for (double& x : v) x /= norm;

    if (author_id && delta_ > 0) {
        // one-hot author direction; distinct authors land on distinct axes
        // with high probability, giving near-orthogonal signals. The axis
        // weight grows quadratically in delta and carries per-text jitter,
        // so moderate delta separates the groups only partially while large
        // delta separates them fully.
        std::size_t axis = mix64(fnv1a64(*author_id) ^ seed_ ^ 0x5151ull) % dim_;
        double jitter = 0.5 + unit_interval(mix64(fnv1a64(text) ^ seed_ ^ 0x7272ull));
        v[axis] += 0.5 * delta_ * delta_ * jitter;
        norm = 0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        for (double& x : v) x /= norm;
    }
    EmbeddingVector out;
    out.values = std::move(v);
    out.backend_id = id_;
    return out;
}

std::vector<EmbeddingVector> TestEmbeddingBackend::embed_batch(
    const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const std::string& t : texts) {
        std::optional<std::string> author;
        auto it = author_by_text_hash_.find(sha256_hex(t));
        if (it != author_by_text_hash_.end()) author = it->second;
        out.push_back(embed_one(t, author));
    }
    return out;
}

// --- remote backend ---------------------------------------------------------

RemoteEmbeddingBackend::RemoteEmbeddingBackend(std::string backend_id, std::string host,
                                               int port, std::string path, int timeout_sec,
                                               int retries, std::string token_env)
    : id_(std::move(backend_id)), host_(std::move(host)), path_(std::move(path)),
      port_(port), timeout_sec_(timeout_sec), retries_(retries) {
    if (const char* tok = std::getenv(token_env.c_str())) token_ = tok;
}

std::vector<EmbeddingVector> RemoteEmbeddingBackend::embed_batch(
    const std::vector<std::string>& texts) {
    json req{{"texts", texts}};
    std::string body = req.dump();

    std::string last_error;
    for (int attempt = 0; attempt <= retries_; ++attempt) {
        httplib::Client cli(host_, port_);
        cli.set_read_timeout(timeout_sec_, 0);
        httplib::Headers headers;
        if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
        auto res = cli.Post(path_, headers, body, "application/json");
        if (!res || res->status != 200) {
            last_error = res ? "status " + std::to_string(res->status) : "connection failed";
            continue;
        }
        json resp = json::parse(res->body);
        std::size_t dim = resp.at("dimension").get<std::size_t>();
        if (dim_ == 0) dim_ = dim;
        std::vector<EmbeddingVector> out;
        for (const auto& row : resp.at("vectors")) {
            EmbeddingVector v;
            v.backend_id = id_;
            v.values = row.get<std::vector<double>>();
            if (v.values.size() != dim_)
                throw std::runtime_error("embedding backend '" + id_ +
                                         "' returned vector of dimension " +
                                         std::to_string(v.values.size()) + ", declared " +
                                         std::to_string(dim_));
            out.push_back(std::move(v));
        }
        if (out.size() != texts.size())
            throw std::runtime_error("embedding backend returned wrong batch size");
        return out;
    }
    throw std::runtime_error("embedding backend '" + id_ + "' failed after " +
                             std::to_string(retries_ + 1) + " attempts: " + last_error);
}

// --- cache ------------------------------------------------------------------

EmbeddingCache::EmbeddingCache(std::string persist_path) : persist_path_(std::move(persist_path)) {
    std::ifstream in(persist_path_, std::ios::binary);
    if (!in) return;  // fresh cache file
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        EmbeddingVector v;
        v.backend_id = j.at("backend_id");
        v.values = j.at("values").get<std::vector<double>>();
        entries_[j.at("key").get<std::string>()] = std::move(v);
    }
}

std::string EmbeddingCache::key_of(const std::string& backend_id, const std::string& text) {
    return backend_id + ":" + sha256_hex(text);
}

std::optional<EmbeddingVector> EmbeddingCache::lookup(const std::string& backend_id,
                                                      const std::string& text) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = entries_.find(key_of(backend_id, text));
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void EmbeddingCache::insert(const std::string& backend_id, const std::string& text,
                            const EmbeddingVector& vec) {
    std::string key = key_of(backend_id, text);
    std::lock_guard<std::mutex> lock(mu_);
    auto [it, inserted] = entries_.emplace(key, vec);
    if (inserted && !persist_path_.empty()) {
        std::ofstream out(persist_path_, std::ios::binary | std::ios::app);
        out << json{{"key", key}, {"backend_id", vec.backend_id}, {"values", vec.values}}.dump()
            << "\n";
    }
}

void EmbeddingCache::compact() {
    std::lock_guard<std::mutex> lock(mu_);
    if (persist_path_.empty()) return;
    std::string tmp = persist_path_ + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        for (const auto& [key, vec] : entries_)
            out << json{{"key", key}, {"backend_id", vec.backend_id}, {"values", vec.values}}.dump()
                << "\n";
    }
    std::rename(tmp.c_str(), persist_path_.c_str());
}

std::size_t EmbeddingCache::size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return entries_.size();
}

EmbeddingVector embed_text(const std::string& text, EmbeddingBackend& backend,
                           EmbeddingCache* cache) {
    if (text.empty()) throw std::invalid_argument("embed_text: empty text");
    if (cache) {
        if (auto hit = cache->lookup(backend.backend_id(), text)) return *hit;
    }
    std::vector<EmbeddingVector> got = backend.embed_batch({text});
    if (got.size() != 1) throw std::runtime_error("embed_text: backend returned wrong count");
    EmbeddingVector v = std::move(got[0]);
    if (v.values.empty() || (backend.dimension() != 0 && v.dimension() != backend.dimension()))
        throw std::runtime_error("embed_text: dimension mismatch from backend " +
                                 backend.backend_id());
    for (double x : v.values)
        if (!std::isfinite(x))
            throw std::runtime_error("embed_text: non-finite component from backend");
    if (cache) cache->insert(backend.backend_id(), text, v);
    return v;
}

}  // namespace stylerm
