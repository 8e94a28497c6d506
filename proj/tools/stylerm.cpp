// stylerm command-line front end: ingest, chunk, build-pairs, benchmark,
// fit-anchors, score, serve.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 backend error.

#include "stylerm/corpus.hpp"
#include "stylerm/pairset.hpp"
#include "stylerm/reward.hpp"
#include "stylerm/service.hpp"
#include "stylerm/stats.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

using nlohmann::json;
using namespace stylerm;

namespace {

struct BackendError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(item);
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_books(const std::string& path, const std::vector<BookRecord>& books) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write: " + path);
        for (const BookRecord& b : books)
            out << json{{"book_id", b.book_id}, {"author_id", b.author_id},
                        {"title", b.title},     {"subject", b.subject},
                        {"text", b.text}}
                       .dump()
                << "\n";
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot move output into place: " + path);
}

std::vector<BookRecord> read_books(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read: " + path);
    std::vector<BookRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        BookRecord b;
        b.book_id = j.at("book_id");
        b.author_id = j.at("author_id");
        b.title = j.at("title");
        b.subject = j.at("subject");
        b.text = j.at("text");
        out.push_back(std::move(b));
    }
    return out;
}

// --- backend / judge selection ---------------------------------------------

struct BackendFlags {
    std::string kind = "test";  // test | remote
    double delta = 0.0;
    std::uint64_t seed = 1;
    std::string host = "127.0.0.1";
    int port = 9000;
    std::string path = "/embed";
};

void add_backend_flags(CLI::App* cmd, BackendFlags& f) {
    cmd->add_option("--backend", f.kind, "Embedding backend: test or remote")
        ->check(CLI::IsMember({"test", "remote"}));
    cmd->add_option("--delta", f.delta, "Author-signal strength of the test backend");
    cmd->add_option("--embed-seed", f.seed, "Seed of the test backend");
    cmd->add_option("--embed-host", f.host, "Remote embedding host");
    cmd->add_option("--embed-port", f.port, "Remote embedding port");
    cmd->add_option("--embed-path", f.path, "Remote embedding endpoint path");
}

std::unique_ptr<EmbeddingBackend> make_backend(const BackendFlags& f) {
    if (f.kind == "test")
        return std::make_unique<TestEmbeddingBackend>(f.seed, f.delta);
    return std::make_unique<RemoteEmbeddingBackend>(
        "remote:" + f.host + ":" + std::to_string(f.port), f.host, f.port, f.path);
}

struct JudgeFlags {
    std::string kind = "stub";  // stub | remote
    std::string stub_reply = "7";
    std::string host = "127.0.0.1";
    int port = 9100;
    std::string path = "/judge";
};

void add_judge_flags(CLI::App* cmd, JudgeFlags& f) {
    cmd->add_option("--judge", f.kind, "Content judge: stub or remote")
        ->check(CLI::IsMember({"stub", "remote"}));
    cmd->add_option("--judge-reply", f.stub_reply, "Fixed reply of the stub judge");
    cmd->add_option("--judge-host", f.host, "Remote judge host");
    cmd->add_option("--judge-port", f.port, "Remote judge port");
    cmd->add_option("--judge-path", f.path, "Remote judge endpoint path");
}

std::unique_ptr<JudgeClient> make_judge(const JudgeFlags& f) {
    if (f.kind == "stub") return std::make_unique<StubJudgeClient>(f.stub_reply);
    return std::make_unique<RemoteJudgeClient>(f.host, f.port, f.path);
}

// wrap library calls so endpoint failures map to exit code 3
template <typename Fn>
auto backend_guard(Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const std::runtime_error& e) {
        std::string msg = e.what();
        if (msg.find("failed after") != std::string::npos ||
            msg.find("backend") != std::string::npos ||
            msg.find("judge") != std::string::npos)
            throw BackendError(msg);
        throw;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stylometric reward-modeling engine"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Normalize books from a manifest");
    std::string manifest_path, subjects_csv, books_out = "books.jsonl";
    ingest->add_option("--manifest", manifest_path, "JSONL manifest: path, author, title, subject")
        ->required();
    ingest->add_option("--subjects", subjects_csv, "Configured subject set (comma separated)")
        ->required();
    ingest->add_option("--out", books_out, "Output book store (JSONL)");

    // chunk
    auto* chunk = app.add_subcommand("chunk", "Segment books into sentence-aligned chunks");
    std::string chunk_books, chunks_out = "chunks.jsonl";
    std::size_t chunk_target = 1500;
    chunk->add_option("--books", chunk_books, "Book store from `ingest`")->required();
    chunk->add_option("--target", chunk_target, "Target words per chunk (500-3000)")->required();
    chunk->add_option("--out", chunks_out, "Output chunk store (JSONL)");

    // build-pairs
    auto* pairs = app.add_subcommand("build-pairs", "Build the graded pair dataset");
    std::string pairs_chunks, pairs_out = "pairs.jsonl", refilled_out = "refilled.jsonl",
                split_out = "splits.jsonl", ratios_csv = "0.8,0.1,0.1";
    std::size_t targets_per_bin = 0;
    std::uint64_t pairs_seed = 0, gen_seed = 1;
    std::string gen_kind = "test", gen_host = "127.0.0.1", gen_path = "/refill";
    int gen_port = 9200;
    pairs->add_option("--chunks", pairs_chunks, "Chunk store from `chunk`")->required();
    pairs->add_option("--targets", targets_per_bin, "Target pairs per label bin")->required();
    pairs->add_option("--seed", pairs_seed, "Sampling seed");
    pairs->add_option("--ratios", ratios_csv, "train,val,test author split ratios");
    pairs->add_option("--generator", gen_kind, "Refill generator: test or remote")
        ->check(CLI::IsMember({"test", "remote"}));
    pairs->add_option("--generator-seed", gen_seed, "Seed of the test generator");
    pairs->add_option("--generator-host", gen_host, "Remote generator host");
    pairs->add_option("--generator-port", gen_port, "Remote generator port");
    pairs->add_option("--generator-path", gen_path, "Remote generator endpoint path");
    pairs->add_option("--out", pairs_out, "Output pair manifest (JSONL)");
    pairs->add_option("--refilled-out", refilled_out, "Output refilled chunk store (JSONL)");
    pairs->add_option("--split-out", split_out, "Output author split assignment");

    // benchmark
    auto* bench = app.add_subcommand("benchmark", "Run the same-vs-cross separation benchmark");
    std::string bench_books, sizes_csv = "500,1000,1500,2000,2500,3000",
                out_prefix = "benchmark", bench_subject;
    std::size_t bench_pairs = 3000;
    std::uint64_t bench_seed = 0;
    BackendFlags bench_backend;
    bench->add_option("--books", bench_books, "Book store from `ingest`")->required();
    bench->add_option("--sizes", sizes_csv, "Chunk sizes (comma separated)");
    bench->add_option("--pairs", bench_pairs, "Pairs per chunk size (split same/cross)");
    bench->add_option("--seed", bench_seed, "Sampling seed");
    bench->add_option("--subject", bench_subject, "Restrict to one subject");
    bench->add_option("--out-prefix", out_prefix,
                      "Writes <prefix>.table.tsv, <prefix>.plot.jsonl, <prefix>.report.json");
    add_backend_flags(bench, bench_backend);

    // fit-anchors
    auto* fit = app.add_subcommand("fit-anchors", "Fit calibration anchors from a report");
    std::string fit_report, anchors_out = "anchors.json";
    std::size_t fit_size = 1500;
    fit->add_option("--report", fit_report, "Benchmark report (.report.json)")->required();
    fit->add_option("--chunk-size", fit_size, "Benchmark cell to anchor on")->required();
    fit->add_option("--out", anchors_out, "Output anchors file");

    // score
    auto* score_cmd = app.add_subcommand("score", "Score one candidate against a reference");
    std::string candidate_path, reference_path, mode_str = "raw", anchors_path;
    BackendFlags score_backend;
    JudgeFlags score_judge;
    score_cmd->add_option("--candidate", candidate_path, "Candidate text file")->required();
    score_cmd->add_option("--reference", reference_path, "Reference text file")->required();
    score_cmd->add_option("--mode", mode_str, "raw or calibrated")
        ->check(CLI::IsMember({"raw", "calibrated"}));
    score_cmd->add_option("--anchors", anchors_path, "Anchors file (required for calibrated)");
    add_backend_flags(score_cmd, score_backend);
    add_judge_flags(score_cmd, score_judge);

    // serve
    auto* serve = app.add_subcommand("serve", "Run the reward-scoring HTTP service");
    std::string serve_config, serve_host = "127.0.0.1", serve_anchors;
    std::vector<std::string> reference_set_specs;
    int serve_port = 8080;
    std::size_t max_batch = 64;
    BackendFlags serve_backend;
    JudgeFlags serve_judge;
    std::string cache_path;
    serve->add_option("--config", serve_config, "JSON config file (flags override)");
    serve->add_option("--host", serve_host, "Listen address");
    serve->add_option("--port", serve_port, "Listen port");
    serve->add_option("--max-batch", max_batch, "Maximum /v1/score/batch size");
    serve->add_option("--anchors", serve_anchors, "Anchors file");
    serve->add_option("--reference-set", reference_set_specs,
                      "id=chunks.jsonl (repeatable)");
    serve->add_option("--cache", cache_path, "Embedding cache file");
    add_backend_flags(serve, serve_backend);
    add_judge_flags(serve, serve_judge);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*ingest) {
            std::set<std::string> subjects;
            for (const std::string& s : split_csv(subjects_csv)) subjects.insert(s);
            std::vector<BookRecord> books;
            for (const auto& [path, meta] : read_manifest(manifest_path))
                books.push_back(ingest_book(path, meta, subjects));
            write_books(books_out, books);
            std::cout << "ingested " << books.size() << " books -> " << books_out << "\n";
        } else if (*chunk) {
            std::vector<ChunkRecord> all;
            for (const BookRecord& b : read_books(chunk_books)) {
                std::vector<ChunkRecord> cs = make_chunks(b, chunk_target);
                all.insert(all.end(), cs.begin(), cs.end());
            }
            if (all.empty()) throw std::invalid_argument("no chunks produced: books too short");
            write_chunks(chunks_out, all);
            std::cout << "wrote " << all.size() << " chunks -> " << chunks_out << "\n";
        } else if (*pairs) {
            std::vector<ChunkRecord> chunks = read_chunks(pairs_chunks);
            std::map<std::string, AuthorRecord> authors;
            for (const ChunkRecord& c : chunks) {
                AuthorRecord& a = authors[c.author_id];
                a.author_id = c.author_id;
                a.display_name = c.author_id;
                a.subjects.insert(c.subject);
            }
            std::vector<AuthorRecord> author_list;
            for (auto& [_, a] : authors) author_list.push_back(a);
            std::vector<std::string> ratios = split_csv(ratios_csv);
            if (ratios.size() != 3) throw std::invalid_argument("--ratios needs 3 values");
            SplitAssignment splits =
                split_authors(author_list, std::stod(ratios[0]), std::stod(ratios[1]),
                              std::stod(ratios[2]), pairs_seed);

            std::unique_ptr<GenerationClient> gen;
            if (gen_kind == "test")
                gen = std::make_unique<TestGenerationClient>(gen_seed);
            else
                gen = std::make_unique<RemoteGenerationClient>(gen_host, gen_port, gen_path);

            PairSetConfig cfg{targets_per_bin, pairs_seed};
            PairSetManifest m =
                backend_guard([&] { return build_pairset(chunks, splits, cfg, *gen); });
            write_split(split_out, splits);
            write_manifest(pairs_out, m);
            write_chunks(refilled_out, m.refilled);
            std::cout << "wrote " << m.pairs.size() << " pairs (" << m.shortfalls.size()
                      << " bin shortfalls) -> " << pairs_out << "\n";
        } else if (*bench) {
            BenchmarkConfig cfg;
            cfg.chunk_sizes.clear();
            for (const std::string& s : split_csv(sizes_csv))
                cfg.chunk_sizes.push_back(std::stoul(s));
            cfg.pairs_per_size = bench_pairs;
            cfg.seed = bench_seed;
            cfg.subject_filter = bench_subject;
            std::vector<BookRecord> books = read_books(bench_books);
            auto backend = make_backend(bench_backend);
            EmbeddingCache cache;
            BenchmarkReport report = backend_guard(
                [&] { return run_benchmark(books, *backend, cfg, &cache); });
            export_report(report, ReportFormat::table, out_prefix + ".table.tsv");
            export_report(report, ReportFormat::plotdata, out_prefix + ".plot.jsonl");
            write_report_json(report, out_prefix + ".report.json");
            std::cout << "wrote " << out_prefix << ".{table.tsv,plot.jsonl,report.json}\n";
        } else if (*fit) {
            BenchmarkReport report = read_report_json(fit_report);
            CalibrationAnchors anchors = fit_anchors(report, fit_size);
            write_anchors(anchors_out, anchors);
            std::cout << "anchors a=" << anchors.a << " b=" << anchors.b << " -> "
                      << anchors_out << "\n";
        } else if (*score_cmd) {
            ScoringContext ctx;
            auto backend = make_backend(score_backend);
            auto judge = make_judge(score_judge);
            EmbeddingCache cache;
            ctx.backend = backend.get();
            ctx.cache = &cache;
            ctx.judge = judge.get();
            if (!anchors_path.empty()) {
                ctx.anchors = read_anchors(anchors_path);
                ctx.anchors_id = anchors_path;
            }
            ScoreRequest req;
            req.candidate_text = read_file(candidate_path);
            req.reference_text = read_file(reference_path);
            req.mode = mode_str == "raw" ? StyleMode::raw : StyleMode::calibrated;
            ScoreResponse resp = backend_guard([&] { return score(req, ctx); });
            std::cout << score_response_to_json(resp) << "\n";
        } else if (*serve) {
            ServeConfig scfg;
            if (!serve_config.empty()) {
                json j = json::parse(read_file(serve_config));
                serve_host = j.value("host", serve_host);
                serve_port = j.value("port", serve_port);
                max_batch = j.value("max_batch", max_batch);
                serve_anchors = j.value("anchors", serve_anchors);
                cache_path = j.value("cache", cache_path);
                if (j.contains("reference_sets"))
                    for (const auto& [id, p] : j.at("reference_sets").items())
                        reference_set_specs.push_back(id + "=" + p.get<std::string>());
            }
            scfg.host = serve_host;
            scfg.port = serve_port;
            scfg.max_batch = max_batch;
            if (const char* tok = std::getenv("STYLERM_BEARER_TOKEN")) scfg.bearer_token = tok;

            ScoringContext ctx;
            auto backend = make_backend(serve_backend);
            auto judge = make_judge(serve_judge);
            auto cache = cache_path.empty() ? std::make_unique<EmbeddingCache>()
                                            : std::make_unique<EmbeddingCache>(cache_path);
            ctx.backend = backend.get();
            ctx.cache = cache.get();
            ctx.judge = judge.get();
            if (!serve_anchors.empty()) {
                ctx.anchors = read_anchors(serve_anchors);
                ctx.anchors_id = serve_anchors;
            }
            for (const std::string& spec : reference_set_specs) {
                std::size_t eq = spec.find('=');
                if (eq == std::string::npos)
                    throw std::invalid_argument("--reference-set expects id=path");
                ctx.reference_sets[spec.substr(0, eq)] = read_chunks(spec.substr(eq + 1));
            }
            RewardService service(std::move(ctx), scfg);
            std::cout << "listening on " << scfg.host << ":" << scfg.port << "\n";
            service.run();
        }
    } catch (const BackendError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
