#pragma once

// Separation diagnostics over similarity score groups: summaries, Delta,
// IQR overlap, Cohen's d, SNR, CI95, separation width, midpoint shift, and
// the controlled same-vs-cross benchmark driver.

#include "stylerm/corpus.hpp"
#include "stylerm/embed.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace stylerm {

struct GroupStats {
    std::size_t n = 0;
    double mean = 0;
    double sd = 0;  // sample sd, n-1 denominator
    double median = 0;
    double q25 = 0;
    double q75 = 0;
    double ci95_lo = 0;
    double ci95_hi = 0;
};

// Mean, sample sd, median/quartiles by linear interpolation between order
// statistics, ci95 = mean +- 1.96 sd/sqrt(n). Requires n >= 2.
GroupStats summarize(const std::vector<double>& samples);

// Quantile at fraction p in [0,1] under the linear-interpolation convention.
double quantile(std::vector<double> sorted_samples, double p);

// 100 * max(0, min(q75) - max(q25)) / min(IQR_a, IQR_b). Requires both IQRs
// strictly positive.
double iqr_overlap(const GroupStats& a, const GroupStats& b);

// (mean_cross - mean_same) / pooled sd; negative when same-author similarity
// exceeds cross-author.
double cohens_d(const GroupStats& cross, const GroupStats& same);

struct SeparationReport {
    double delta = 0;             // mean_same - mean_cross
    double iqr_overlap_pct = 0;   // [0, 100]
    double cohens_d = 0;
    double snr_same = 0, snr_cross = 0;  // mean/sd per group
    double separation_width = 0;  // q75_same - q25_cross
    double midpoint_shift = 0;    // signed: (mean_same + mean_cross)/2 - 0.5
};

SeparationReport separation_metrics(const GroupStats& cross, const GroupStats& same);

struct BenchmarkCell {
    std::size_t chunk_size = 0;
    std::string subject;  // empty = pooled over subjects
    std::optional<GroupStats> cross, same;
    std::optional<SeparationReport> separation;
    std::string skipped_reason;  // non-empty when the cell could not be filled
};

struct BenchmarkConfig {
    std::vector<std::size_t> chunk_sizes{500, 1000, 1500, 2000, 2500, 3000};
    std::size_t pairs_per_size = 3000;  // split evenly same/cross
    std::uint64_t seed = 0;
    std::string subject_filter;  // empty = all subjects
};

struct BenchmarkReport {
    std::vector<BenchmarkCell> cells;
    BenchmarkConfig config;
    std::string backend_id;

    const BenchmarkCell* find(std::size_t chunk_size, const std::string& subject) const;
};

// Samples pairs_per_size/2 same-author (cross-title) and pairs_per_size/2
// cross-author pairs per chunk size within subject, scores them via
// embed+cosine, and aggregates per subject plus a pooled cell.
BenchmarkReport run_benchmark(const std::vector<BookRecord>& books,
                              EmbeddingBackend& backend, const BenchmarkConfig& config,
                              EmbeddingCache* cache = nullptr);

// Same driver over pre-made chunks (keyed by the chunk-size grid).
BenchmarkReport run_benchmark_chunks(
    const std::map<std::size_t, std::vector<ChunkRecord>>& chunks_by_size,
    EmbeddingBackend& backend, const BenchmarkConfig& config,
    EmbeddingCache* cache = nullptr);

enum class ReportFormat { table, plotdata };

// table: one row per cell with Cross +- SD, Same +- SD, Delta, IQR Overlap.
// plotdata: one quartile/whisker record per (cell, group).
void export_report(const BenchmarkReport& report, ReportFormat format,
                   const std::string& path);

BenchmarkReport read_report(const std::string& path);  // table format round-trip

// Full-fidelity persistence (quartiles included), consumed by fit-anchors.
void write_report_json(const BenchmarkReport& report, const std::string& path);
BenchmarkReport read_report_json(const std::string& path);

}  // namespace stylerm
