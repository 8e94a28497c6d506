#include "stylerm/pairset.hpp"

#include "stylerm/hash.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include <httplib.h>
#include <json.hpp>

namespace stylerm {

using nlohmann::json;

std::vector<double> masking_grid() {
    std::vector<double> g;
    for (int t = 1; t <= 9; ++t) g.push_back(t / 10.0);
    return g;
}

bool on_masking_grid(double r) {
    for (int t = 1; t <= 9; ++t)
        if (std::abs(r - t / 10.0) < 1e-12) return true;
    return false;
}

MaskPlan plan_mask(const ChunkRecord& chunk, double r, std::size_t min_sentences) {
    if (chunk.kind != ChunkKind::original)
        throw std::invalid_argument("plan_mask: chunk must be original");
    if (!on_masking_grid(r))
        throw std::invalid_argument("plan_mask: masking ratio off grid: " + std::to_string(r));
    if (chunk.sentences.size() < min_sentences)
        throw std::invalid_argument("plan_mask: chunk has " +
                                    std::to_string(chunk.sentences.size()) +
                                    " sentences, need >= " + std::to_string(min_sentences));

    // sort by word count descending, ties broken by lower index
    std::vector<std::size_t> order(chunk.sentences.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return chunk.sentences[a].word_count > chunk.sentences[b].word_count;
    });

    double budget = r * static_cast<double>(chunk.word_count);
    std::size_t masked_words = 0;
    MaskPlan plan;
    plan.chunk_id = chunk.chunk_id;
    plan.target_ratio = r;
    for (std::size_t idx : order) {
        if (static_cast<double>(masked_words) >= budget) break;
        plan.masked_indices.push_back(idx);
        masked_words += chunk.sentences[idx].word_count;
    }
    std::sort(plan.masked_indices.begin(), plan.masked_indices.end());
    plan.achieved_ratio =
        static_cast<double>(masked_words) / static_cast<double>(chunk.word_count);
    return plan;
}

// --- generation clients -----------------------------------------------------

TestGenerationClient::TestGenerationClient(std::uint64_t seed) : seed_(seed) {
    id_ = "test-gen-s" + std::to_string(seed);
}

std::string TestGenerationClient::refill(const RefillRequest& req) {
    ++calls_;
    // locate the masked sentence's original words from the context: the
    // request context carries the placeholder at the masked position, so the
    // source words travel in the instruction payload
    std::istringstream in(req.instruction);
    std::vector<std::string> words;
    std::string w;
    while (in >> w) words.push_back(w);
    std::uint64_t s = seed_ ^ fnv1a64(req.context_text) ^
                      (0x9e3779b97f4a7c15ull * (req.masked_sentence_index + 1));
    std::mt19937_64 rng(s);
    std::shuffle(words.begin(), words.end(), rng);
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) out += ' ';
        out += words[i];
    }
    return out;
}

RemoteGenerationClient::RemoteGenerationClient(std::string host, int port, std::string path,
                                               int timeout_sec, int retries)
    : host_(std::move(host)), path_(std::move(path)), port_(port),
      timeout_sec_(timeout_sec), retries_(retries) {
    id_ = "http-gen:" + host_ + ":" + std::to_string(port_) + path_;
}

std::string RemoteGenerationClient::refill(const RefillRequest& req) {
    json body{{"context_text", req.context_text},
              {"masked_sentence_index", req.masked_sentence_index},
              {"instruction", req.instruction}};
    std::string last_error;
    for (int attempt = 0; attempt <= retries_; ++attempt) {
        httplib::Client cli(host_, port_);
        cli.set_read_timeout(timeout_sec_, 0);
        auto res = cli.Post(path_, body.dump(), "application/json");
        if (!res || res->status != 200) {
            last_error = res ? "status " + std::to_string(res->status) : "connection failed";
            continue;
        }
        return json::parse(res->body).at("replacement_text").get<std::string>();
    }
    throw std::runtime_error("generation client failed after retries: " + last_error);
}

// --- refilling --------------------------------------------------------------

namespace {

std::string render_with_sentences(const ChunkRecord& chunk,
                                  const std::map<std::size_t, std::string>& overrides,
                                  const std::set<std::size_t>& placeholders) {
    std::string out;
    for (std::size_t i = 0; i < chunk.sentences.size(); ++i) {
        if (i) out += ' ';
        if (placeholders.count(i)) out += kMaskPlaceholder;
        else if (auto it = overrides.find(i); it != overrides.end()) out += it->second;
        else out += chunk.sentence_text(i);
    }
    return out;
}

}  // namespace

RefilledChunk apply_refill(const ChunkRecord& chunk, const MaskPlan& plan,
                           GenerationClient& generator) {
    if (plan.chunk_id != chunk.chunk_id)
        throw std::invalid_argument("apply_refill: plan does not belong to chunk");

    std::map<std::size_t, std::string> replacements;
    std::set<std::size_t> pending(plan.masked_indices.begin(), plan.masked_indices.end());

    // document order, one request per masked sentence, with previously
    // regenerated sentences already substituted into the context
    for (std::size_t idx : plan.masked_indices) {
        std::set<std::size_t> still_masked = pending;
        RefillRequest req;
        req.context_text = render_with_sentences(chunk, replacements, still_masked);
        req.masked_sentence_index = idx;
        req.instruction =
            "Rewrite the masked sentence so it fits the surrounding text: " +
            chunk.sentence_text(idx);
        std::string replacement = generator.refill(req);
        if (replacement.find_first_not_of(" \t\n") == std::string::npos)
            throw std::runtime_error("apply_refill: empty replacement for sentence " +
                                     std::to_string(idx));
        if (replacement.find(kMaskPlaceholder) != std::string::npos)
            throw std::runtime_error("apply_refill: replacement contains mask placeholder");
        replacements[idx] = replacement;
        pending.erase(idx);
    }

    // materialize the refilled chunk with fresh spans
    RefilledChunk out;
    out.source_chunk_id = chunk.chunk_id;
    out.generator_descriptor = generator.descriptor();
    out.replacements = replacements;

    ChunkRecord& rc = out.chunk;
    rc.book_id = chunk.book_id;
    rc.author_id = chunk.author_id;
    rc.subject = chunk.subject;
    rc.title = chunk.title;
    rc.kind = ChunkKind::refilled;
    rc.masking_ratio = plan.target_ratio;
    std::ostringstream idss;
    idss << chunk.chunk_id << "~r" << plan.target_ratio;
    rc.chunk_id = idss.str();

    std::size_t total_words = 0;
    for (std::size_t i = 0; i < chunk.sentences.size(); ++i) {
        std::string sent =
            replacements.count(i) ? replacements.at(i) : chunk.sentence_text(i);
        SentenceSpan sp;
        if (i) rc.text += ' ';
        sp.start = rc.text.size();
        rc.text += sent;
        sp.end = rc.text.size();
        sp.word_count = count_words(sent);
        total_words += sp.word_count;
        rc.sentences.push_back(sp);
    }
    rc.word_count = total_words;
    return out;
}

// --- labeling ---------------------------------------------------------------

PairLabel pair_label(double r1, double r2) {
    if (!on_masking_grid(r1) || !on_masking_grid(r2))
        throw std::invalid_argument("pair_label: ratio off grid");
    PairLabel out;
    double a = 1.0 - r1 * r1;
    double b = 1.0 - r2 * r2;
    out.x = (a * b) * (a * b);
    out.s = std::floor(10.0 * out.x + 0.5) / 10.0;
    return out;
}

std::vector<double> intermediate_bins() {
    std::set<double> bins;
    for (double r1 : masking_grid())
        for (double r2 : masking_grid()) {
            double s = pair_label(r1, r2).s;
            if (s != 0.0 && s != 0.5 && s != 1.0) bins.insert(s);
        }
    return {bins.begin(), bins.end()};
}

// --- pair set construction --------------------------------------------------

namespace {

struct UnorderedPair {
    std::string a, b;
    UnorderedPair(std::string x, std::string y) {
        if (x <= y) { a = std::move(x); b = std::move(y); }
        else { a = std::move(y); b = std::move(x); }
    }
    bool operator<(const UnorderedPair& o) const {
        return std::tie(a, b) < std::tie(o.a, o.b);
    }
};

std::mt19937_64 make_rng(std::uint64_t seed, const std::string& tag) {
    std::uint64_t h = fnv1a64(tag);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
    return std::mt19937_64(seq);
}

}  // namespace

PairSetManifest build_pairset(const std::vector<ChunkRecord>& chunks,
                              const SplitAssignment& splits, const PairSetConfig& config,
                              GenerationClient& generator) {
    PairSetManifest manifest;
    manifest.config = config;
    manifest.grid = masking_grid();
    if (config.targets_per_bin == 0) return manifest;

    // (split, subject) -> original chunks with >= 10 sentences usable for refill;
    // all originals usable for extreme bins
    std::map<std::pair<std::string, std::string>, std::vector<const ChunkRecord*>> pools;
    std::set<std::string> subjects;
    for (const ChunkRecord& c : chunks) {
        if (c.kind != ChunkKind::original) continue;
        Split s = splits.split_of(c.author_id);
        pools[{split_name(s), c.subject}].push_back(&c);
        subjects.insert(c.subject);
    }

    // precompute grid pairs per intermediate bin
    std::map<double, std::vector<std::pair<double, double>>> grid_by_bin;
    for (double r1 : masking_grid())
        for (double r2 : masking_grid()) {
            double s = pair_label(r1, r2).s;
            if (s != 0.0 && s != 0.5 && s != 1.0) grid_by_bin[s].emplace_back(r1, r2);
        }

    // refill cache: (source chunk id, ratio) -> refilled chunk index in manifest
    std::map<std::pair<std::string, double>, std::size_t> refill_index;
    auto get_refill = [&](const ChunkRecord& src, double r) -> std::size_t {
        auto key = std::make_pair(src.chunk_id, r);
        auto it = refill_index.find(key);
        if (it != refill_index.end()) return it->second;
        MaskPlan plan = plan_mask(src, r);
        RefilledChunk rf = apply_refill(src, plan, generator);
        manifest.refilled.push_back(std::move(rf.chunk));
        refill_index[key] = manifest.refilled.size() - 1;
        return manifest.refilled.size() - 1;
    };

    const std::array<Split, 3> split_order = {Split::train, Split::validation, Split::test};
    for (Split sp : split_order) {
        std::set<UnorderedPair> used;  // unordered source-chunk pairs, per split
        for (const std::string& subject : subjects) {
            auto pool_it = pools.find({split_name(sp), subject});
            if (pool_it == pools.end()) continue;
            const auto& pool = pool_it->second;

            auto record_shortfall = [&](double label, std::size_t achieved,
                                        const std::string& reason) {
                manifest.shortfalls.push_back(
                    {sp, subject, label, config.targets_per_bin, achieved, reason});
            };
            auto emit = [&](const ChunkRecord& left, const ChunkRecord& right, double label,
                            PairRelation rel, PairKind kind) {
                PairExample p;
                p.left_chunk_id = left.chunk_id;
                p.right_chunk_id = right.chunk_id;
                p.label = label;
                p.relation = rel;
                p.pair_kind = kind;
                p.subject = subject;
                p.split = sp;
                manifest.pairs.push_back(std::move(p));
                std::tuple<std::string, std::string, double> key{split_name(sp), subject, label};
                ++manifest.counts[key];
            };

            // extreme bins from original chunks
            for (double label : {1.0, 0.0}) {
                std::string tag = std::string(split_name(sp)) + "/" + subject + "/" +
                                  std::to_string(label);
                auto rng = make_rng(config.seed, tag);
                std::vector<std::pair<std::size_t, std::size_t>> cands;
                for (std::size_t i = 0; i < pool.size(); ++i)
                    for (std::size_t j = i + 1; j < pool.size(); ++j) {
                        bool same_author = pool[i]->author_id == pool[j]->author_id;
                        bool diff_title = pool[i]->title != pool[j]->title;
                        if (label == 1.0 && same_author && diff_title) cands.emplace_back(i, j);
                        if (label == 0.0 && !same_author && diff_title) cands.emplace_back(i, j);
                    }
                std::shuffle(cands.begin(), cands.end(), rng);
                std::size_t achieved = 0;
                for (auto [i, j] : cands) {
                    if (achieved >= config.targets_per_bin) break;
                    UnorderedPair up(pool[i]->chunk_id, pool[j]->chunk_id);
                    if (!used.insert(up).second) continue;
                    emit(*pool[i], *pool[j], label,
                         label == 1.0 ? PairRelation::same_author : PairRelation::cross_author,
                         PairKind::original_original);
                    ++achieved;
                }
                if (achieved < config.targets_per_bin)
                    record_shortfall(label, achieved,
                                     label == 1.0 ? "not enough same-author cross-title pairs"
                                                  : "not enough cross-author pairs");
            }

            // intermediate bins from refilled-refilled pairs
            std::vector<const ChunkRecord*> refillable;
            for (const ChunkRecord* c : pool)
                if (c->sentences.size() >= 10) refillable.push_back(c);

            for (const auto& [label, grid_pairs] : grid_by_bin) {
                std::string tag = std::string(split_name(sp)) + "/" + subject + "/bin" +
                                  std::to_string(label);
                auto rng = make_rng(config.seed, tag);
                bool want_same = label > 0.5;
                std::vector<std::pair<std::size_t, std::size_t>> cands;
                for (std::size_t i = 0; i < refillable.size(); ++i)
                    for (std::size_t j = 0; j < refillable.size(); ++j) {
                        if (i == j) continue;
                        bool same_author = refillable[i]->author_id == refillable[j]->author_id;
                        bool diff_title = refillable[i]->title != refillable[j]->title;
                        if (!diff_title) continue;
                        if (same_author == want_same) cands.emplace_back(i, j);
                    }
                std::shuffle(cands.begin(), cands.end(), rng);

                std::size_t achieved = 0;
                for (auto [i, j] : cands) {
                    if (achieved >= config.targets_per_bin) break;
                    UnorderedPair up(refillable[i]->chunk_id, refillable[j]->chunk_id);
                    if (used.count(up)) continue;
                    auto [r1, r2] = grid_pairs[rng() % grid_pairs.size()];
                    PairLabel pl = pair_label(r1, r2);
                    if (pl.s == 0.0 || pl.s == 0.5 || pl.s == 1.0) continue;  // resample
                    std::size_t li = get_refill(*refillable[i], r1);
                    std::size_t ri = get_refill(*refillable[j], r2);
                    used.insert(up);
                    emit(manifest.refilled[li], manifest.refilled[ri], pl.s,
                         want_same ? PairRelation::same_author : PairRelation::cross_author,
                         PairKind::refilled_refilled);
                    ++achieved;
                }
                if (grid_pairs.empty())
                    record_shortfall(label, 0, "no grid pair maps into bin");
                else if (achieved < config.targets_per_bin)
                    record_shortfall(label, achieved, "chunk pair pool exhausted");
            }
        }
    }
    return manifest;
}

std::optional<std::string> validate_pair(const PairExample& p,
                                         const std::map<std::string, ChunkRecord>& by_id,
                                         const SplitAssignment& splits) {
    auto lit = by_id.find(p.left_chunk_id);
    auto rit = by_id.find(p.right_chunk_id);
    if (lit == by_id.end() || rit == by_id.end()) return "dangling chunk reference";
    const ChunkRecord& L = lit->second;
    const ChunkRecord& R = rit->second;

    double s = p.label;
    bool same = L.author_id == R.author_id;
    if ((p.relation == PairRelation::same_author) != same) return "relation/author mismatch";
    if (L.subject != R.subject || L.subject != p.subject) return "subject mismatch";
    if (splits.split_of(L.author_id) != p.split || splits.split_of(R.author_id) != p.split)
        return "author outside pair split";

    bool both_original = L.kind == ChunkKind::original && R.kind == ChunkKind::original;
    bool both_refilled = L.kind == ChunkKind::refilled && R.kind == ChunkKind::refilled;
    if ((p.pair_kind == PairKind::original_original) != both_original) return "pair_kind mismatch";

    if (s == 0.5) return "midpoint label emitted";
    if (s == 1.0) {
        if (!both_original || !same || L.title == R.title)
            return "s=1.0 must be original same-author cross-title";
    } else if (s == 0.0) {
        if (!both_original || same) return "s=0.0 must be original cross-author";
    } else if (s > 0.5) {
        if (!both_refilled || !same) return "0.5<s<1.0 must be refilled same-author";
        if (L.title == R.title) return "intermediate pair shares title";
    } else if (s > 0.0) {
        if (!both_refilled || same) return "0<s<0.5 must be refilled cross-author";
        if (L.title == R.title) return "intermediate pair shares title";
    } else {
        return "label out of range";
    }
    if (both_refilled && (!L.masking_ratio || !R.masking_ratio))
        return "refilled chunk missing masking_ratio";
    return std::nullopt;
}

// --- persistence ------------------------------------------------------------

namespace {

const char* relation_name(PairRelation r) {
    return r == PairRelation::same_author ? "same_author" : "cross_author";
}
const char* kind_name(PairKind k) {
    return k == PairKind::original_original ? "original_original" : "refilled_refilled";
}

}  // namespace

void write_manifest(const std::string& path, const PairSetManifest& m) {
    std::string tmp = path + ".tmp";
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write: " + path);
    json counts = json::array();
    for (const auto& [key, n] : m.counts)
        counts.push_back({{"split", std::get<0>(key)}, {"subject", std::get<1>(key)},
                          {"label", std::get<2>(key)}, {"count", n}});
    json header{{"type", "pairset"},
                {"seed", m.config.seed},
                {"targets_per_bin", m.config.targets_per_bin},
                {"grid", m.grid},
                {"counts", counts}};
    out << header.dump() << "\n";
    for (const PairExample& p : m.pairs)
        out << json{{"left", p.left_chunk_id}, {"right", p.right_chunk_id},
                    {"label", p.label},        {"relation", relation_name(p.relation)},
                    {"pair_kind", kind_name(p.pair_kind)}, {"subject", p.subject},
                    {"split", split_name(p.split)}}
                   .dump()
            << "\n";
    for (const BinShortfall& sf : m.shortfalls)
        out << json{{"shortfall", true},      {"split", split_name(sf.split)},
                    {"subject", sf.subject},  {"label", sf.label},
                    {"target", sf.target},    {"achieved", sf.achieved},
                    {"reason", sf.reason}}
                   .dump()
            << "\n";
    out.close();
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot move manifest into place: " + path);
}

PairSetManifest read_manifest_pairs(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty manifest: " + path);
    json header = json::parse(line);
    PairSetManifest m;
    m.config.seed = header.at("seed");
    m.config.targets_per_bin = header.at("targets_per_bin");
    m.grid = header.at("grid").get<std::vector<double>>();
    for (const auto& c : header.at("counts"))
        m.counts[{c.at("split"), c.at("subject"), c.at("label")}] = c.at("count");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        if (j.value("shortfall", false)) {
            m.shortfalls.push_back({split_from_name(j.at("split")), j.at("subject"),
                                    j.at("label"), j.at("target"), j.at("achieved"),
                                    j.at("reason")});
        } else {
            PairExample p;
            p.left_chunk_id = j.at("left");
            p.right_chunk_id = j.at("right");
            p.label = j.at("label");
            p.relation = j.at("relation") == "same_author" ? PairRelation::same_author
                                                           : PairRelation::cross_author;
            p.pair_kind = j.at("pair_kind") == "original_original"
                              ? PairKind::original_original
                              : PairKind::refilled_refilled;
            p.subject = j.at("subject");
            p.split = split_from_name(j.at("split"));
            m.pairs.push_back(std::move(p));
        }
    }
    return m;
}

}  // namespace stylerm
