#pragma once

// Embedding provision: pluggable backends behind a common interface, with a
// content-addressed cache keyed by (backend_id, sha256(text)).

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace stylerm {

struct EmbeddingVector {
    std::vector<double> values;
    std::string backend_id;

    std::size_t dimension() const { return values.size(); }
};

class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;
    virtual const std::string& backend_id() const = 0;
    virtual std::size_t dimension() const = 0;
    // Declared context limit in words; 0 means unlimited. Over-length inputs
    // are embedded anyway but flagged by the caller.
    virtual std::size_t max_input_words() const { return 0; }
    virtual std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) = 0;
};

// dot(u,v)/(|u||v|), clamped to [-1,1]. Throws on dimension mismatch or a
// zero-norm vector.
double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v);

// Synthetic backend: base vector from a seeded hash of the text's word
// multiset, plus delta times a per-author unit direction, unit-normalized.
// With delta = 0 similarity carries no author signal; with large delta
// same-author pairs approach cosine 1 and distinct authors approach 0.
class TestEmbeddingBackend : public EmbeddingBackend {
public:
    TestEmbeddingBackend(std::uint64_t seed, double delta, std::size_t dim = 256);

    const std::string& backend_id() const override { return id_; }
    std::size_t dimension() const override { return dim_; }
    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override;

    // Author signal is attached out of band: texts registered here get the
    // author direction added on embed.
    void set_author_of_text(const std::string& text, const std::string& author_id);

    EmbeddingVector embed_one(const std::string& text,
                              const std::optional<std::string>& author_id) const;

private:
    std::string id_;
    std::uint64_t seed_;
    double delta_;
    std::size_t dim_;
    std::map<std::string, std::string> author_by_text_hash_;
};

// Remote backend speaking the {texts:[...]} -> {vectors:[[...]], dimension}
// wire contract over HTTP. Bearer token read from the environment.
class RemoteEmbeddingBackend : public EmbeddingBackend {
public:
    RemoteEmbeddingBackend(std::string backend_id, std::string host, int port,
                           std::string path = "/embed", int timeout_sec = 30,
                           int retries = 2, std::string token_env = "STYLERM_EMBED_TOKEN");

    const std::string& backend_id() const override { return id_; }
    std::size_t dimension() const override { return dim_; }
    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override;

private:
    std::string id_, host_, path_, token_;
    int port_, timeout_sec_, retries_;
    std::size_t dim_ = 0;  // learned from the first response
};

// Concurrent-safe in-memory cache with optional append-only persistence.
class EmbeddingCache {
public:
    EmbeddingCache() = default;
    explicit EmbeddingCache(std::string persist_path);

    std::optional<EmbeddingVector> lookup(const std::string& backend_id,
                                          const std::string& text) const;
    void insert(const std::string& backend_id, const std::string& text,
                const EmbeddingVector& vec);
    // Rewrites the persistence file keeping one record per key.
    void compact();
    std::size_t size() const;

private:
    static std::string key_of(const std::string& backend_id, const std::string& text);
    mutable std::mutex mu_;
    std::map<std::string, EmbeddingVector> entries_;
    std::string persist_path_;
};

// Cache-through embedding of a single text. Throws on empty text and on a
// backend dimension mismatch.
EmbeddingVector embed_text(const std::string& text, EmbeddingBackend& backend,
                           EmbeddingCache* cache = nullptr);

}  // namespace stylerm
