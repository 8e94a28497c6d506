#pragma once

// Graded pairwise supervision: mask planning, sequential refilling through a
// generation client, label assignment from masking-ratio pairs, and pair set
// construction under the sampling policies (extreme labels reserved for
// originals, midpoint omitted, author-disjoint splits, subject control).

#include "stylerm/corpus.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace stylerm {

// Masking ratio grid {0.1, ..., 0.9} represented in tenths to keep the
// arithmetic exact.
std::vector<double> masking_grid();
bool on_masking_grid(double r);

struct MaskPlan {
    std::string chunk_id;
    double target_ratio = 0;                  // nominal grid value
    std::vector<std::size_t> masked_indices;  // ascending sentence indices
    double achieved_ratio = 0;                // masked words / total words
};

// Longest-sentence-first greedy masking until the masked word count reaches
// r * chunk.word_count. Requires >= min_sentences sentences (10 by default,
// relaxable for unit fixtures).
MaskPlan plan_mask(const ChunkRecord& chunk, double r, std::size_t min_sentences = 10);

struct RefillRequest {
    std::string context_text;  // chunk text with earlier refills substituted
    std::size_t masked_sentence_index = 0;
    std::string instruction;
};

class GenerationClient {
public:
    virtual ~GenerationClient() = default;
    virtual const std::string& descriptor() const = 0;
    // Returns the replacement text for the masked sentence.
    virtual std::string refill(const RefillRequest& req) = 0;
};

// Deterministic test generator: replaces each masked sentence with a seeded
// shuffle of its own words. The seed is derived from (seed, chunk text hash,
// sentence index), so runs replay byte-identically.
class TestGenerationClient : public GenerationClient {
public:
    explicit TestGenerationClient(std::uint64_t seed);
    const std::string& descriptor() const override { return id_; }
    std::string refill(const RefillRequest& req) override;
    std::size_t calls() const { return calls_; }

private:
    std::string id_;
    std::uint64_t seed_;
    std::size_t calls_ = 0;
};

// HTTP generation client for the {context_text, masked_sentence_index,
// instruction} -> {replacement_text} wire contract.
class RemoteGenerationClient : public GenerationClient {
public:
    RemoteGenerationClient(std::string host, int port, std::string path = "/refill",
                           int timeout_sec = 60, int retries = 2);
    const std::string& descriptor() const override { return id_; }
    std::string refill(const RefillRequest& req) override;

private:
    std::string id_, host_, path_;
    int port_, timeout_sec_, retries_;
};

struct RefilledChunk {
    ChunkRecord chunk;  // kind = refilled, masking_ratio set
    std::string source_chunk_id;
    std::string generator_descriptor;
    std::map<std::size_t, std::string> replacements;  // sentence index -> new text
};

inline constexpr const char* kMaskPlaceholder = "[MASKED]";

// Regenerates the masked sentences one at a time in document order; each
// request carries the chunk with the previously regenerated sentences
// already substituted. Throws on empty replacements or replacements that
// still contain the mask placeholder.
RefilledChunk apply_refill(const ChunkRecord& chunk, const MaskPlan& plan,
                           GenerationClient& generator);

struct PairLabel {
    double s = 0;  // tenth-step label
    double x = 0;  // raw score before discretisation
};

// x = ((1 - r1^2)(1 - r2^2))^2, s = floor(10x + 1/2)/10.
PairLabel pair_label(double r1, double r2);

enum class PairRelation { same_author, cross_author };
enum class PairKind { original_original, refilled_refilled };

struct PairExample {
    std::string left_chunk_id;
    std::string right_chunk_id;
    double label = 0;
    PairRelation relation = PairRelation::same_author;
    PairKind pair_kind = PairKind::original_original;
    std::string subject;
    Split split = Split::train;
};

struct BinShortfall {
    Split split;
    std::string subject;
    double label;
    std::size_t target;
    std::size_t achieved;
    std::string reason;
};

struct PairSetConfig {
    std::size_t targets_per_bin = 0;
    std::uint64_t seed = 0;
};

struct PairSetManifest {
    std::vector<PairExample> pairs;
    std::vector<ChunkRecord> refilled;  // chunks generated during construction
    std::vector<BinShortfall> shortfalls;
    // (split, subject, label) -> count
    std::map<std::tuple<std::string, std::string, double>, std::size_t> counts;
    PairSetConfig config;
    std::vector<double> grid;
};

// Label bins reachable from refilled-refilled grid pairs (0.0, 0.5 and 1.0
// excluded by policy).
std::vector<double> intermediate_bins();

// Full pair set construction per (split, subject). Refilled chunks are
// produced on demand through `generator`; each source chunk is refilled at
// most once per needed ratio.
PairSetManifest build_pairset(const std::vector<ChunkRecord>& chunks,
                              const SplitAssignment& splits, const PairSetConfig& config,
                              GenerationClient& generator);

// Checks the full PairExample invariant table for one record, given chunk
// metadata. Returns an error description, or nullopt if the record is valid.
std::optional<std::string> validate_pair(const PairExample& p,
                                         const std::map<std::string, ChunkRecord>& by_id,
                                         const SplitAssignment& splits);

void write_manifest(const std::string& path, const PairSetManifest& m);
PairSetManifest read_manifest_pairs(const std::string& path);

}  // namespace stylerm
