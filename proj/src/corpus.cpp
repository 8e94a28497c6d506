#include "stylerm/corpus.hpp"

#include "stylerm/hash.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace stylerm {

using nlohmann::json;

std::string ChunkRecord::sentence_text(std::size_t index) const {
    const SentenceSpan& sp = sentences.at(index);
    return text.substr(sp.start, sp.end - sp.start);
}

const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::validation: return "validation";
        case Split::test: return "test";
    }
    return "?";
}

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "validation") return Split::validation;
    if (name == "test") return Split::test;
    throw std::invalid_argument("unknown split label: " + name);
}

Split SplitAssignment::split_of(const std::string& author_id) const {
    auto it = by_author.find(author_id);
    if (it == by_author.end())
        throw std::out_of_range("author not in split assignment: " + author_id);
    return it->second;
}

std::size_t count_words(const std::string& text) {
    std::size_t n = 0;
    bool in_word = false;
    for (unsigned char c : text) {
        bool ws = std::isspace(c) != 0;
        if (!ws && !in_word) ++n;
        in_word = !ws;
    }
    return n;
}

namespace {

std::string normalize_body(const std::string& raw) {
    std::string text;
    text.reserve(raw.size());
    // CRLF/CR -> LF
    for (std::size_t i = 0; i < raw.size(); ++i) {
        char c = raw[i];
        if (c == '\r') {
            if (i + 1 < raw.size() && raw[i + 1] == '\n') continue;
            text += '\n';
        } else {
            text += c;
        }
    }
    // collapse runs of blank lines to a single blank line
    std::string out;
    out.reserve(text.size());
    int newline_run = 0;
    for (char c : text) {
        if (c == '\n') {
            if (++newline_run <= 2) out += c;
        } else {
            newline_run = 0;
            out += c;
        }
    }
    // trim leading/trailing whitespace
    std::size_t b = out.find_first_not_of(" \t\n");
    if (b == std::string::npos) return {};
    std::size_t e = out.find_last_not_of(" \t\n");
    return out.substr(b, e - b + 1);
}

std::string make_book_id(const BookMeta& meta) {
    std::string id = meta.author_id + "/" + meta.title;
    for (char& c : id)
        if (std::isspace(static_cast<unsigned char>(c))) c = '_';
    return id;
}

// Abbreviations whose trailing period does not end a sentence.
const std::array<const char*, 16> kAbbrevGuard = {
    "Mr", "Mrs", "Ms", "Dr", "Prof", "Rev", "St", "Mt",
    "Capt", "Col", "Gen", "Lt", "Sgt", "Jr", "Sr", "vs",
};

bool is_guarded_abbreviation(const std::string& text, std::size_t period_pos) {
    std::size_t end = period_pos;  // exclusive end of the token before '.'
    std::size_t start = end;
    while (start > 0 && std::isalpha(static_cast<unsigned char>(text[start - 1]))) --start;
    if (start == end) return false;
    std::string token = text.substr(start, end - start);
    for (const char* a : kAbbrevGuard)
        if (token == a) return true;
    // single capital letter, e.g. initials "J. K."
    if (token.size() == 1 && std::isupper(static_cast<unsigned char>(token[0]))) return true;
    return false;
}

bool is_open_quote(char c) { return c == '"' || c == '\'' || c == '(' ; }

}  // namespace

BookRecord ingest_text(std::string raw, const BookMeta& meta,
                       const std::set<std::string>& subjects) {
    if (!subjects.count(meta.subject))
        throw std::invalid_argument("unknown subject: " + meta.subject);
    std::string body = normalize_body(raw);
    if (body.empty())
        throw std::invalid_argument("empty body after normalization (author=" +
                                    meta.author_id + ", title=" + meta.title + ")");
    BookRecord book;
    book.book_id = make_book_id(meta);
    book.author_id = meta.author_id;
    book.title = meta.title;
    book.subject = meta.subject;
    book.text = std::move(body);
    return book;
}

BookRecord ingest_book(const std::string& path, const BookMeta& meta,
                       const std::set<std::string>& subjects) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ingest_text(ss.str(), meta, subjects);
}

std::vector<SentenceSpan> segment_sentences(const std::string& text) {
    if (text.empty()) throw std::invalid_argument("segment_sentences: empty text");
    std::vector<SentenceSpan> spans;
    std::size_t sent_start = 0;
    auto flush = [&](std::size_t end) {
        // tighten to non-whitespace extent
        std::size_t s = sent_start, e = end;
        while (s < e && std::isspace(static_cast<unsigned char>(text[s]))) ++s;
        while (e > s && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
        if (s < e) {
            SentenceSpan sp;
            sp.start = s;
            sp.end = e;
            sp.word_count = count_words(text.substr(s, e - s));
            spans.push_back(sp);
        }
        sent_start = end;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c != '.' && c != '!' && c != '?') continue;
        if (c == '.' && is_guarded_abbreviation(text, i)) continue;
        // allow closing quotes after the terminator
        std::size_t j = i + 1;
        while (j < text.size() && (text[j] == '"' || text[j] == '\'')) ++j;
        // require whitespace then an uppercase letter or opening quote
        std::size_t k = j;
        while (k < text.size() && std::isspace(static_cast<unsigned char>(text[k]))) ++k;
        if (k == j) continue;  // no whitespace after terminator
        if (k >= text.size()) { flush(j); break; }
        char next = text[k];
        if (std::isupper(static_cast<unsigned char>(next)) || is_open_quote(next)) {
            flush(j);
            i = j - 1;
        }
    }
    if (sent_start < text.size()) flush(text.size());
    if (spans.empty()) {
        // whitespace-only input reaches here only via internal misuse
        throw std::invalid_argument("segment_sentences: no content");
    }
    return spans;
}

std::vector<ChunkRecord> make_chunks(const BookRecord& book, std::size_t target_words) {
    if (target_words < 500 || target_words > 3000)
        throw std::invalid_argument("target_words must be in [500, 3000]");
    std::vector<SentenceSpan> sents = segment_sentences(book.text);

    std::vector<ChunkRecord> chunks;
    std::size_t i = 0;
    while (i < sents.size()) {
        std::size_t begin = i;
        std::size_t words = 0;
        while (i < sents.size() && words < target_words) {
            words += sents[i].word_count;
            ++i;
        }
        bool is_last = (i == sents.size());
        if (is_last && words < target_words) {
            // A book that never fills one chunk produces nothing; after at
            // least one full chunk, a remainder below half target is dropped.
            if (begin == 0 || words * 2 < target_words) break;
        }
        ChunkRecord ck;
        ck.book_id = book.book_id;
        ck.author_id = book.author_id;
        ck.subject = book.subject;
        ck.title = book.title;
        ck.kind = ChunkKind::original;
        std::size_t base = sents[begin].start;
        ck.text = book.text.substr(base, sents[i - 1].end - base);
        for (std::size_t k = begin; k < i; ++k) {
            SentenceSpan sp = sents[k];
            sp.start -= base;
            sp.end -= base;
            ck.sentences.push_back(sp);
        }
        ck.word_count = words;
        ck.chunk_id = book.book_id + "#" + std::to_string(target_words) + "w" +
                      std::to_string(chunks.size());
        chunks.push_back(std::move(ck));
    }
    return chunks;
}

SplitAssignment split_authors(const std::vector<AuthorRecord>& authors,
                              double train_ratio, double val_ratio, double test_ratio,
                              std::uint64_t seed) {
    if (train_ratio <= 0 || val_ratio <= 0 || test_ratio <= 0)
        throw std::invalid_argument("split ratios must all be positive");
    if (std::abs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-9)
        throw std::invalid_argument("split ratios must sum to 1");

    // subject -> sorted author ids (an author with several subjects is
    // assigned under its lexicographically first subject, once)
    std::map<std::string, std::vector<std::string>> per_subject;
    std::set<std::string> seen;
    for (const AuthorRecord& a : authors) {
        if (a.subjects.empty())
            throw std::invalid_argument("author has no subjects: " + a.author_id);
        if (!seen.insert(a.author_id).second)
            throw std::invalid_argument("duplicate author_id: " + a.author_id);
        per_subject[*a.subjects.begin()].push_back(a.author_id);
    }

    SplitAssignment out;
    out.seed = seed;
    out.train_ratio = train_ratio;
    out.val_ratio = val_ratio;
    out.test_ratio = test_ratio;

    for (auto& [subject, ids] : per_subject) {
        if (ids.size() < 3)
            throw std::invalid_argument("subject '" + subject +
                                        "' has fewer than 3 authors; cannot populate all splits");
        std::sort(ids.begin(), ids.end());
        std::uint64_t sub_hash = fnv1a64(subject);
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(sub_hash), static_cast<std::uint32_t>(sub_hash >> 32)};
        std::mt19937_64 rng(seq);
        std::shuffle(ids.begin(), ids.end(), rng);

        std::size_t n = ids.size();
        std::size_t n_train = static_cast<std::size_t>(std::floor(train_ratio * n));
        std::size_t n_val = static_cast<std::size_t>(std::floor(val_ratio * n));
        n_train = std::max<std::size_t>(1, std::min(n_train, n - 2));
        n_val = std::max<std::size_t>(1, std::min(n_val, n - n_train - 1));
        for (std::size_t k = 0; k < n; ++k) {
            Split s = k < n_train ? Split::train
                      : k < n_train + n_val ? Split::validation
                                            : Split::test;
            out.by_author[ids[k]] = s;
        }
    }
    return out;
}

namespace {

json chunk_to_json(const ChunkRecord& c) {
    json sents = json::array();
    for (const SentenceSpan& sp : c.sentences)
        sents.push_back({sp.start, sp.end, sp.word_count});
    json j{{"chunk_id", c.chunk_id}, {"book_id", c.book_id},
           {"author_id", c.author_id}, {"subject", c.subject},
           {"title", c.title},        {"sentences", sents},
           {"text", c.text},          {"word_count", c.word_count},
           {"kind", c.kind == ChunkKind::original ? "original" : "refilled"}};
    if (c.masking_ratio) j["masking_ratio"] = *c.masking_ratio;
    return j;
}

ChunkRecord chunk_from_json(const json& j) {
    ChunkRecord c;
    c.chunk_id = j.at("chunk_id");
    c.book_id = j.at("book_id");
    c.author_id = j.at("author_id");
    c.subject = j.at("subject");
    c.title = j.value("title", "");
    for (const auto& sp : j.at("sentences"))
        c.sentences.push_back({sp.at(0).get<std::size_t>(), sp.at(1).get<std::size_t>(),
                               sp.at(2).get<std::size_t>()});
    c.text = j.at("text");
    c.word_count = j.at("word_count");
    c.kind = j.at("kind") == "original" ? ChunkKind::original : ChunkKind::refilled;
    if (j.contains("masking_ratio")) c.masking_ratio = j.at("masking_ratio").get<double>();
    return c;
}

}  // namespace

namespace {

// temp-file + rename so partial outputs never masquerade as complete
void commit_file(const std::string& tmp, const std::string& path) {
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot move output into place: " + path);
}

}  // namespace

void write_chunks(const std::string& path, const std::vector<ChunkRecord>& chunks) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write: " + path);
        for (const ChunkRecord& c : chunks) out << chunk_to_json(c).dump() << "\n";
    }
    commit_file(tmp, path);
}

std::vector<ChunkRecord> read_chunks(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read: " + path);
    std::vector<ChunkRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(chunk_from_json(json::parse(line)));
    }
    return out;
}

void write_split(const std::string& path, const SplitAssignment& split) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write: " + path);
        json header{{"seed", split.seed},
                    {"ratios", {split.train_ratio, split.val_ratio, split.test_ratio}}};
        out << header.dump() << "\n";
        for (const auto& [author, s] : split.by_author)
            out << json{{"author_id", author}, {"split", split_name(s)}}.dump() << "\n";
    }
    commit_file(tmp, path);
}

SplitAssignment read_split(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty split file: " + path);
    json header = json::parse(line);
    SplitAssignment out;
    out.seed = header.at("seed");
    out.train_ratio = header.at("ratios").at(0);
    out.val_ratio = header.at("ratios").at(1);
    out.test_ratio = header.at("ratios").at(2);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        out.by_author[j.at("author_id")] = split_from_name(j.at("split"));
    }
    return out;
}

std::vector<std::pair<std::string, BookMeta>> read_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read manifest: " + path);
    std::vector<std::pair<std::string, BookMeta>> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        BookMeta m;
        m.author_id = j.at("author");
        m.display_name = j.value("display_name", m.author_id);
        m.title = j.at("title");
        m.subject = j.at("subject");
        out.emplace_back(j.at("path").get<std::string>(), m);
    }
    return out;
}

}  // namespace stylerm
