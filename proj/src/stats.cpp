#include "stylerm/stats.hpp"

#include "stylerm/hash.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace stylerm {

using nlohmann::json;

double quantile(std::vector<double> sorted, double p) {
    if (sorted.empty()) throw std::invalid_argument("quantile: empty sample");
    if (p < 0 || p > 1) throw std::invalid_argument("quantile: p out of range");
    double h = p * static_cast<double>(sorted.size() - 1);
    std::size_t lo = static_cast<std::size_t>(std::floor(h));
    std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

GroupStats summarize(const std::vector<double>& samples) {
    if (samples.size() < 2) throw std::invalid_argument("summarize: need n >= 2");
    GroupStats g;
    g.n = samples.size();
    double sum = 0;
    for (double x : samples) sum += x;
    g.mean = sum / static_cast<double>(g.n);
    double ss = 0;
    for (double x : samples) ss += (x - g.mean) * (x - g.mean);
    g.sd = std::sqrt(ss / static_cast<double>(g.n - 1));

    std::vector<double> sorted = samples;
    std::sort(sorted.begin(), sorted.end());
    g.median = quantile(sorted, 0.5);
    g.q25 = quantile(sorted, 0.25);
    g.q75 = quantile(sorted, 0.75);
    double half = 1.96 * g.sd / std::sqrt(static_cast<double>(g.n));
    g.ci95_lo = g.mean - half;
    g.ci95_hi = g.mean + half;
    return g;
}

double iqr_overlap(const GroupStats& a, const GroupStats& b) {
    double iqr_a = a.q75 - a.q25;
    double iqr_b = b.q75 - b.q25;
    if (iqr_a <= 0 || iqr_b <= 0)
        throw std::invalid_argument("iqr_overlap: zero-width IQR");
    double inter = std::min(a.q75, b.q75) - std::max(a.q25, b.q25);
    return 100.0 * std::max(0.0, inter) / std::min(iqr_a, iqr_b);
}

double cohens_d(const GroupStats& cross, const GroupStats& same) {
    if (cross.n + same.n < 3) throw std::invalid_argument("cohens_d: combined n < 3");
    double nc = static_cast<double>(cross.n), ns = static_cast<double>(same.n);
    double pooled_var =
        ((nc - 1) * cross.sd * cross.sd + (ns - 1) * same.sd * same.sd) / (nc + ns - 2);
    if (pooled_var <= 0) throw std::invalid_argument("cohens_d: zero pooled sd");
    return (cross.mean - same.mean) / std::sqrt(pooled_var);
}

SeparationReport separation_metrics(const GroupStats& cross, const GroupStats& same) {
    SeparationReport r;
    r.delta = same.mean - cross.mean;
    r.iqr_overlap_pct = iqr_overlap(cross, same);
    r.cohens_d = stylerm::cohens_d(cross, same);
    r.snr_same = same.sd > 0 ? same.mean / same.sd : 0;
    r.snr_cross = cross.sd > 0 ? cross.mean / cross.sd : 0;
    r.separation_width = same.q75 - cross.q25;
    r.midpoint_shift = (same.mean + cross.mean) / 2.0 - 0.5;
    return r;
}

const BenchmarkCell* BenchmarkReport::find(std::size_t chunk_size,
                                           const std::string& subject) const {
    for (const BenchmarkCell& c : cells)
        if (c.chunk_size == chunk_size && c.subject == subject) return &c;
    return nullptr;
}

// --- benchmark driver -------------------------------------------------------

namespace {

std::mt19937_64 cell_rng(std::uint64_t seed, std::size_t chunk_size,
                         const std::string& subject, const char* group) {
    std::uint64_t h = fnv1a64(subject) ^ fnv1a64(group) ^ (chunk_size * 0x9e3779b97f4a7c15ull);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
    return std::mt19937_64(seq);
}

BenchmarkCell make_cell(std::size_t size, const std::string& subject,
                        const std::vector<double>& cross_scores,
                        const std::vector<double>& same_scores, std::size_t wanted) {
    BenchmarkCell cell;
    cell.chunk_size = size;
    cell.subject = subject;
    if (cross_scores.size() < std::max<std::size_t>(2, wanted) ||
        same_scores.size() < std::max<std::size_t>(2, wanted)) {
        cell.skipped_reason = "insufficient pairs (cross=" +
                              std::to_string(cross_scores.size()) +
                              ", same=" + std::to_string(same_scores.size()) +
                              ", wanted=" + std::to_string(wanted) + " per group)";
        return cell;
    }
    cell.cross = summarize(cross_scores);
    cell.same = summarize(same_scores);
    cell.separation = separation_metrics(*cell.cross, *cell.same);
    return cell;
}

}  // namespace

BenchmarkReport run_benchmark_chunks(
    const std::map<std::size_t, std::vector<ChunkRecord>>& chunks_by_size,
    EmbeddingBackend& backend, const BenchmarkConfig& config, EmbeddingCache* cache) {
    BenchmarkReport report;
    report.config = config;
    report.backend_id = backend.backend_id();

    auto* test_backend = dynamic_cast<TestEmbeddingBackend*>(&backend);

    for (std::size_t size : config.chunk_sizes) {
        auto it = chunks_by_size.find(size);
        const std::vector<ChunkRecord> empty;
        const std::vector<ChunkRecord>& chunks = it == chunks_by_size.end() ? empty : it->second;

        std::set<std::string> subjects;
        for (const ChunkRecord& c : chunks)
            if (config.subject_filter.empty() || c.subject == config.subject_filter)
                subjects.insert(c.subject);

        if (test_backend)
            for (const ChunkRecord& c : chunks)
                test_backend->set_author_of_text(c.text, c.author_id);

        std::size_t per_group = config.pairs_per_size / 2;
        std::vector<double> pooled_cross, pooled_same;

        for (const std::string& subject : subjects) {
            std::vector<const ChunkRecord*> pool;
            for (const ChunkRecord& c : chunks)
                if (c.subject == subject) pool.push_back(&c);

            std::vector<std::pair<std::size_t, std::size_t>> same_cands, cross_cands;
            for (std::size_t i = 0; i < pool.size(); ++i)
                for (std::size_t j = i + 1; j < pool.size(); ++j) {
                    bool same_author = pool[i]->author_id == pool[j]->author_id;
                    if (same_author && pool[i]->title != pool[j]->title)
                        same_cands.emplace_back(i, j);
                    else if (!same_author)
                        cross_cands.emplace_back(i, j);
                }
            auto rng_s = cell_rng(config.seed, size, subject, "same");
            auto rng_c = cell_rng(config.seed, size, subject, "cross");
            std::shuffle(same_cands.begin(), same_cands.end(), rng_s);
            std::shuffle(cross_cands.begin(), cross_cands.end(), rng_c);
            if (same_cands.size() > per_group) same_cands.resize(per_group);
            if (cross_cands.size() > per_group) cross_cands.resize(per_group);

            auto score = [&](const std::vector<std::pair<std::size_t, std::size_t>>& cands) {
                std::vector<double> out;
                out.reserve(cands.size());
                for (auto [i, j] : cands) {
                    EmbeddingVector u = embed_text(pool[i]->text, backend, cache);
                    EmbeddingVector v = embed_text(pool[j]->text, backend, cache);
                    out.push_back(cosine_similarity(u, v));
                }
                return out;
            };
            std::vector<double> same_scores, cross_scores;
            if (per_group > 0) {
                same_scores = score(same_cands);
                cross_scores = score(cross_cands);
            }
            pooled_same.insert(pooled_same.end(), same_scores.begin(), same_scores.end());
            pooled_cross.insert(pooled_cross.end(), cross_scores.begin(), cross_scores.end());
            report.cells.push_back(make_cell(size, subject, cross_scores, same_scores, per_group));
        }
        // pooled over subjects
        BenchmarkCell pooled = make_cell(size, "", pooled_cross, pooled_same,
                                         per_group * std::max<std::size_t>(1, subjects.size()));
        if (per_group == 0) pooled.skipped_reason = "pairs_per_size = 0";
        report.cells.push_back(std::move(pooled));
    }
    return report;
}

BenchmarkReport run_benchmark(const std::vector<BookRecord>& books, EmbeddingBackend& backend,
                              const BenchmarkConfig& config, EmbeddingCache* cache) {
    std::map<std::size_t, std::vector<ChunkRecord>> by_size;
    for (std::size_t size : config.chunk_sizes)
        for (const BookRecord& b : books) {
            std::vector<ChunkRecord> cs = make_chunks(b, size);
            auto& dst = by_size[size];
            dst.insert(dst.end(), std::make_move_iterator(cs.begin()),
                       std::make_move_iterator(cs.end()));
        }
    return run_benchmark_chunks(by_size, backend, config, cache);
}

// --- export -----------------------------------------------------------------

namespace {

constexpr const char* kTableSchema =
    "#stylerm-benchmark-table v1\tquantiles=linear-interpolation\tci=normal-1.96";
constexpr const char* kPlotSchema = "#stylerm-benchmark-plotdata v1";

std::string fmt(double x) {
    std::ostringstream ss;
    ss << std::setprecision(17) << x;
    return ss.str();
}

}  // namespace

void export_report(const BenchmarkReport& report, ReportFormat format,
                   const std::string& path) {
    std::string tmp = path + ".tmp";
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write: " + path);

    if (format == ReportFormat::table) {
        out << kTableSchema << "\n";
        out << "chunk_size\tsubject\tcross_mean\tcross_sd\tsame_mean\tsame_sd\tdelta\t"
               "iqr_overlap_pct\n";
        for (const BenchmarkCell& c : report.cells) {
            out << c.chunk_size << "\t" << (c.subject.empty() ? "(all)" : c.subject) << "\t";
            if (!c.skipped_reason.empty()) {
                out << "skipped:" << c.skipped_reason << "\n";
                continue;
            }
            out << fmt(c.cross->mean) << "\t" << fmt(c.cross->sd) << "\t"
                << fmt(c.same->mean) << "\t" << fmt(c.same->sd) << "\t"
                << fmt(c.separation->delta) << "\t" << fmt(c.separation->iqr_overlap_pct)
                << "\n";
        }
    } else {
        out << kPlotSchema << "\n";
        for (const BenchmarkCell& c : report.cells) {
            if (!c.skipped_reason.empty()) continue;
            auto box = [&](const char* group, const GroupStats& g) {
                out << json{{"chunk_size", c.chunk_size},
                            {"subject", c.subject.empty() ? "(all)" : c.subject},
                            {"group", group},
                            {"n", g.n},
                            {"median", g.median},
                            {"q25", g.q25},
                            {"q75", g.q75},
                            {"mean", g.mean},
                            {"sd", g.sd},
                            {"ci95", {g.ci95_lo, g.ci95_hi}}}
                           .dump()
                    << "\n";
            };
            box("cross", *c.cross);
            box("same", *c.same);
        }
    }
    out.close();
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot move report into place: " + path);
}

BenchmarkReport read_report(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read: " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("#stylerm-benchmark-table", 0) != 0)
        throw std::runtime_error("not a benchmark table file: " + path);
    std::getline(in, line);  // column header
    BenchmarkReport report;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, '\t')) fields.push_back(field);
        if (fields.size() < 3) continue;
        BenchmarkCell cell;
        cell.chunk_size = std::stoul(fields[0]);
        cell.subject = fields[1] == "(all)" ? "" : fields[1];
        if (fields[2].rfind("skipped:", 0) == 0) {
            cell.skipped_reason = fields[2].substr(8);
        } else if (fields.size() >= 8) {
            GroupStats cross, same;
            cross.mean = std::stod(fields[2]);
            cross.sd = std::stod(fields[3]);
            same.mean = std::stod(fields[4]);
            same.sd = std::stod(fields[5]);
            cell.cross = cross;
            cell.same = same;
            SeparationReport sep;
            sep.delta = std::stod(fields[6]);
            sep.iqr_overlap_pct = std::stod(fields[7]);
            cell.separation = sep;
        }
        report.cells.push_back(std::move(cell));
    }
    return report;
}

namespace {

json group_to_json(const GroupStats& g) {
    return {{"n", g.n},     {"mean", g.mean},       {"sd", g.sd},
            {"median", g.median}, {"q25", g.q25},   {"q75", g.q75},
            {"ci95_lo", g.ci95_lo}, {"ci95_hi", g.ci95_hi}};
}

GroupStats group_from_json(const json& j) {
    GroupStats g;
    g.n = j.at("n");
    g.mean = j.at("mean");
    g.sd = j.at("sd");
    g.median = j.at("median");
    g.q25 = j.at("q25");
    g.q75 = j.at("q75");
    g.ci95_lo = j.at("ci95_lo");
    g.ci95_hi = j.at("ci95_hi");
    return g;
}

}  // namespace

void write_report_json(const BenchmarkReport& report, const std::string& path) {
    json cells = json::array();
    for (const BenchmarkCell& c : report.cells) {
        json jc{{"chunk_size", c.chunk_size}, {"subject", c.subject}};
        if (!c.skipped_reason.empty()) {
            jc["skipped"] = c.skipped_reason;
        } else {
            jc["cross"] = group_to_json(*c.cross);
            jc["same"] = group_to_json(*c.same);
            const SeparationReport& s = *c.separation;
            jc["separation"] = {{"delta", s.delta},
                                {"iqr_overlap_pct", s.iqr_overlap_pct},
                                {"cohens_d", s.cohens_d},
                                {"snr_same", s.snr_same},
                                {"snr_cross", s.snr_cross},
                                {"separation_width", s.separation_width},
                                {"midpoint_shift", s.midpoint_shift}};
        }
        cells.push_back(std::move(jc));
    }
    json doc{{"schema", "stylerm-benchmark v1"},
             {"backend_id", report.backend_id},
             {"config",
              {{"chunk_sizes", report.config.chunk_sizes},
               {"pairs_per_size", report.config.pairs_per_size},
               {"seed", report.config.seed},
               {"subject_filter", report.config.subject_filter}}},
             {"cells", cells}};
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write: " + path);
        out << doc.dump(2) << "\n";
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot move report into place: " + path);
}

BenchmarkReport read_report_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read: " + path);
    json doc = json::parse(in);
    BenchmarkReport report;
    report.backend_id = doc.value("backend_id", "");
    const json& cfg = doc.at("config");
    report.config.chunk_sizes = cfg.at("chunk_sizes").get<std::vector<std::size_t>>();
    report.config.pairs_per_size = cfg.at("pairs_per_size");
    report.config.seed = cfg.at("seed");
    report.config.subject_filter = cfg.at("subject_filter");
    for (const json& jc : doc.at("cells")) {
        BenchmarkCell c;
        c.chunk_size = jc.at("chunk_size");
        c.subject = jc.at("subject");
        if (jc.contains("skipped")) {
            c.skipped_reason = jc.at("skipped");
        } else {
            c.cross = group_from_json(jc.at("cross"));
            c.same = group_from_json(jc.at("same"));
            const json& s = jc.at("separation");
            SeparationReport sep;
            sep.delta = s.at("delta");
            sep.iqr_overlap_pct = s.at("iqr_overlap_pct");
            sep.cohens_d = s.at("cohens_d");
            sep.snr_same = s.at("snr_same");
            sep.snr_cross = s.at("snr_cross");
            sep.separation_width = s.at("separation_width");
            sep.midpoint_shift = s.at("midpoint_shift");
            c.separation = sep;
        }
        report.cells.push_back(std::move(c));
    }
    return report;
}

}  // namespace stylerm
