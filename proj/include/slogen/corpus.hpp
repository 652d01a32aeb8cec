// Corpus handling: record files, text cleaning, 1:N pair expansion,
// record-level train/test splitting, vocabulary and token codec, and a
// synthetic fixture generator.
//
// Record file format (UTF-8, LF): one record per line, TAB-separated
// `key=value` fields. `id`, `category` and `description` appear exactly once;
// `slogans` appears once per slogan (at least once). Values cannot contain
// tabs or newlines. Blank lines are skipped.
#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "slogen/error.hpp"
#include "slogen/rng.hpp"

namespace slogen {

struct Record {
    std::string id;
    std::string category;
    std::string description;
    std::vector<std::string> slogans;
};

struct Pair {
    std::string record_id;
    int pair_index = 0; // position of the slogan within its record
    std::string description;
    std::string slogan;
};

// ---------------------------------------------------------------------------
// Text cleaning
// ---------------------------------------------------------------------------

namespace detail {

// Keep-set: letters, digits, space, and . , ' ! ? & - %
inline bool keep_char(unsigned char c) {
    if (std::isalnum(c)) return true;
    switch (c) {
        case ' ': case '.': case ',': case '\'':
        case '!': case '?': case '&': case '-': case '%':
            return true;
        default:
            return false;
    }
}

inline bool is_space(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Drop <...> tag spans wholesale (crawl leftovers); the span becomes a space
// so it still separates words.
inline std::string strip_tags(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] == '<') {
            std::size_t close = s.find('>', i + 1);
            if (close != std::string_view::npos) {
                out.push_back(' ');
                i = close + 1;
                continue;
            }
        }
        out.push_back(s[i]);
        ++i;
    }
    return out;
}

inline std::string filter_chars(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (unsigned char c : s) {
        if (is_space(c)) {
            out.push_back(' ');
        } else if (keep_char(c)) {
            out.push_back(static_cast<char>(c));
        }
    }
    return out;
}

inline bool punct_char(char c) {
    switch (c) {
        case '.': case ',': case '\'': case '!': case '?':
        case '&': case '-': case '%':
            return true;
        default:
            return false;
    }
}

// Token with leading/trailing punctuation stripped, lowercased.
inline std::string token_core(std::string_view tok) {
    std::size_t b = 0, e = tok.size();
    while (b < e && punct_char(tok[b])) ++b;
    while (e > b && punct_char(tok[e - 1])) --e;
    std::string core(tok.substr(b, e - b));
    for (char& c : core) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return core;
}

inline bool is_year_token(std::string_view tok) {
    std::string core = token_core(tok);
    if (core.size() != 4) return false;
    for (char c : core) {
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    }
    int year = std::stoi(core);
    return year >= 1600 && year <= 2099;
}

inline bool is_date_trigger(std::string_view tok) {
    std::string core = token_core(tok);
    return core == "founded" || core == "since" || core == "established" || core == "est";
}

// Removes foundation-date phrases: a year token 1600-2099 preceded within
// 3 tokens by a trigger word; the trigger through the year is deleted.
// A bare year without a trigger is kept (product years stay intact).
// Repeats until no match so the result is a fixpoint.
inline std::vector<std::string> remove_foundation_dates(std::vector<std::string> tokens) {
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t y = 0; y < tokens.size(); ++y) {
            if (!is_year_token(tokens[y])) continue;
            std::size_t lo = y >= 3 ? y - 3 : 0;
            for (std::size_t t = lo; t < y; ++t) {
                if (is_date_trigger(tokens[t])) {
                    tokens.erase(tokens.begin() + static_cast<std::ptrdiff_t>(t),
                                 tokens.begin() + static_cast<std::ptrdiff_t>(y) + 1);
                    changed = true;
                    break;
                }
            }
            if (changed) break;
        }
    }
    return tokens;
}

inline std::vector<std::string> split_ws(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_space(static_cast<unsigned char>(s[i]))) ++i;
        std::size_t b = i;
        while (i < s.size() && !is_space(static_cast<unsigned char>(s[i]))) ++i;
        if (i > b) out.emplace_back(s.substr(b, i - b));
    }
    return out;
}

inline std::string join(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

} // namespace detail

// Total function; idempotent. Strips tag spans, removes characters outside
// the keep-set, deletes foundation-date phrases, collapses whitespace.
inline std::string clean_text(std::string_view raw) {
    std::string s = detail::filter_chars(detail::strip_tags(raw));
    std::vector<std::string> tokens = detail::remove_foundation_dates(detail::split_ws(s));
    return detail::join(tokens);
}

// ---------------------------------------------------------------------------
// Tokenizer (shared by vocabulary building and the ROUGE metrics)
// ---------------------------------------------------------------------------

// Lowercases, splits on whitespace, and makes each punctuation character its
// own token ("fresh life!" -> [fresh, life, !]).
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string word;
    auto flush = [&] {
        if (!word.empty()) {
            out.push_back(word);
            word.clear();
        }
    };
    for (unsigned char c : text) {
        if (detail::is_space(c)) {
            flush();
        } else if (detail::punct_char(static_cast<char>(c))) {
            flush();
            out.emplace_back(1, static_cast<char>(c));
        } else {
            word.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    flush();
    return out;
}

// ---------------------------------------------------------------------------
// Record file parsing and serialization
// ---------------------------------------------------------------------------

inline std::vector<Record> parse_records(std::istream& in) {
    std::vector<Record> records;
    std::unordered_set<std::string> seen_ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        Record rec;
        bool have_id = false, have_category = false, have_description = false;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            std::size_t tab = line.find('\t', pos);
            std::string field = line.substr(pos, tab == std::string::npos ? std::string::npos : tab - pos);
            pos = tab == std::string::npos ? line.size() + 1 : tab + 1;

            std::size_t eq = field.find('=');
            if (eq == std::string::npos) {
                fail(ErrorCategory::parse,
                     "line " + std::to_string(line_no) + ": field '" + field + "' is not key=value");
            }
            std::string key = field.substr(0, eq);
            std::string value = field.substr(eq + 1);
            auto set_once = [&](std::string& slot, bool& have, const char* name) {
                if (have) {
                    fail(ErrorCategory::parse,
                         "line " + std::to_string(line_no) + ": duplicate field '" + std::string(name) + "'");
                }
                if (value.empty()) {
                    fail(ErrorCategory::parse,
                         "line " + std::to_string(line_no) + ": empty field '" + std::string(name) + "'");
                }
                slot = value;
                have = true;
            };
            if (key == "id") {
                set_once(rec.id, have_id, "id");
            } else if (key == "category") {
                set_once(rec.category, have_category, "category");
            } else if (key == "description") {
                set_once(rec.description, have_description, "description");
            } else if (key == "slogans") {
                if (value.empty()) {
                    fail(ErrorCategory::parse,
                         "line " + std::to_string(line_no) + ": empty field 'slogans'");
                }
                rec.slogans.push_back(value);
            } else {
                fail(ErrorCategory::parse,
                     "line " + std::to_string(line_no) + ": unknown field '" + key + "'");
            }
        }
        if (!have_id) fail(ErrorCategory::parse, "line " + std::to_string(line_no) + ": missing field 'id'");
        if (!have_category) {
            fail(ErrorCategory::parse, "line " + std::to_string(line_no) + ": missing field 'category'");
        }
        if (!have_description) {
            fail(ErrorCategory::parse, "line " + std::to_string(line_no) + ": missing field 'description'");
        }
        if (rec.slogans.empty()) {
            fail(ErrorCategory::parse, "line " + std::to_string(line_no) + ": record has no slogans");
        }
        if (!seen_ids.insert(rec.id).second) {
            fail(ErrorCategory::parse,
                 "line " + std::to_string(line_no) + ": duplicate record id '" + rec.id + "'");
        }
        records.push_back(std::move(rec));
    }
    return records;
}

inline std::vector<Record> read_records(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCategory::io, "cannot open records file: " + path);
    return parse_records(in);
}

inline void write_records(const std::vector<Record>& records, std::ostream& out) {
    for (const Record& rec : records) {
        out << "id=" << rec.id << "\tcategory=" << rec.category
            << "\tdescription=" << rec.description;
        for (const std::string& s : rec.slogans) out << "\tslogans=" << s;
        out << "\n";
    }
}

inline void write_records(const std::vector<Record>& records, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCategory::io, "cannot write records file: " + path);
    write_records(records, out);
}

// Applies clean_text to every field. Records whose description or every
// slogan cleans to empty are dropped (returned in `dropped`).
inline std::vector<Record> clean_records(const std::vector<Record>& records, std::size_t* dropped = nullptr) {
    std::vector<Record> out;
    std::size_t n_dropped = 0;
    for (const Record& rec : records) {
        Record cleaned;
        cleaned.id = rec.id;
        cleaned.category = rec.category;
        cleaned.description = clean_text(rec.description);
        for (const std::string& s : rec.slogans) {
            std::string cs = clean_text(s);
            if (!cs.empty()) cleaned.slogans.push_back(std::move(cs));
        }
        if (cleaned.description.empty() || cleaned.slogans.empty()) {
            ++n_dropped;
            continue;
        }
        out.push_back(std::move(cleaned));
    }
    if (dropped) *dropped = n_dropped;
    return out;
}

// ---------------------------------------------------------------------------
// Pair expansion and splitting
// ---------------------------------------------------------------------------

inline std::vector<Pair> expand_pairs(const std::vector<Record>& records) {
    std::vector<Pair> pairs;
    for (const Record& rec : records) {
        for (std::size_t i = 0; i < rec.slogans.size(); ++i) {
            pairs.push_back(Pair{rec.id, static_cast<int>(i), rec.description, rec.slogans[i]});
        }
    }
    return pairs;
}

struct RecordSplit {
    std::vector<Record> train;
    std::vector<Record> test;
};

// Seeded shuffle of the records; the last ceil(ratio * n) become the test
// split. Splitting at record granularity keeps 1:N siblings (and their shared
// description) inside one split.
inline RecordSplit split_records(const std::vector<Record>& records, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) {
        fail(ErrorCategory::data, "split ratio must be in (0,1)");
    }
    if (records.size() < 2) {
        fail(ErrorCategory::data, "need at least 2 records to split");
    }
    std::vector<Record> shuffled = records;
    Rng rng(seed);
    rng.shuffle(shuffled);
    std::size_t n = shuffled.size();
    auto n_test = static_cast<std::size_t>(
        std::ceil(ratio * static_cast<double>(n) - 1e-9));
    if (n_test == 0) n_test = 1;
    if (n_test > n) n_test = n;
    RecordSplit split;
    split.train.assign(shuffled.begin(), shuffled.end() - static_cast<std::ptrdiff_t>(n_test));
    split.test.assign(shuffled.end() - static_cast<std::ptrdiff_t>(n_test), shuffled.end());
    return split;
}

struct SplitCorpus {
    std::vector<Pair> train;
    std::vector<Pair> test;
    std::uint64_t seed = 0;
    double ratio = 0.0;
};

inline SplitCorpus split_corpus(const std::vector<Record>& records, double ratio, std::uint64_t seed) {
    RecordSplit split = split_records(records, ratio, seed);
    SplitCorpus corpus;
    corpus.train = expand_pairs(split.train);
    corpus.test = expand_pairs(split.test);
    corpus.seed = seed;
    corpus.ratio = ratio;
    return corpus;
}

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

struct Vocabulary {
    static constexpr int kPad = 0;
    static constexpr int kBos = 1;
    static constexpr int kEos = 2;
    static constexpr int kUnk = 3;

    std::vector<std::string> tokens;
    std::unordered_map<std::string, int> index;

    int size() const { return static_cast<int>(tokens.size()); }

    int id_of(const std::string& token) const {
        auto it = index.find(token);
        return it == index.end() ? kUnk : it->second;
    }

    const std::string& token_of(int id) const {
        if (id < 0 || id >= size()) return tokens[kUnk];
        return tokens[static_cast<std::size_t>(id)];
    }
};

inline const std::vector<std::string>& special_tokens() {
    static const std::vector<std::string> specials = {"<pad>", "<bos>", "<eos>", "<unk>"};
    return specials;
}

// Keeps the max_size-4 most frequent tokens from the training pairs
// (descriptions and slogans), ties broken lexicographically.
inline Vocabulary build_vocab(const std::vector<Pair>& train_pairs, int max_size) {
    if (max_size < 5) fail(ErrorCategory::data, "vocabulary max_size must be at least 5");
    if (train_pairs.empty()) fail(ErrorCategory::data, "cannot build vocabulary from an empty training set");

    std::map<std::string, std::int64_t> counts;
    for (const Pair& p : train_pairs) {
        for (const std::string& tok : tokenize(p.description)) ++counts[tok];
        for (const std::string& tok : tokenize(p.slogan)) ++counts[tok];
    }
    std::vector<std::pair<std::string, std::int64_t>> ranked(counts.begin(), counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    Vocabulary vocab;
    vocab.tokens = special_tokens();
    std::size_t budget = static_cast<std::size_t>(max_size - 4);
    for (std::size_t i = 0; i < ranked.size() && i < budget; ++i) {
        vocab.tokens.push_back(ranked[i].first);
    }
    for (std::size_t i = 0; i < vocab.tokens.size(); ++i) {
        vocab.index[vocab.tokens[i]] = static_cast<int>(i);
    }
    return vocab;
}

// BOS + token ids + EOS; unknown tokens map to <unk>.
inline std::vector<int> encode(std::string_view text, const Vocabulary& vocab) {
    std::vector<int> ids;
    ids.push_back(Vocabulary::kBos);
    for (const std::string& tok : tokenize(text)) ids.push_back(vocab.id_of(tok));
    ids.push_back(Vocabulary::kEos);
    return ids;
}

// Drops PAD/BOS/EOS and joins remaining tokens with single spaces.
inline std::string decode(const std::vector<int>& ids, const Vocabulary& vocab) {
    std::vector<std::string> tokens;
    for (int id : ids) {
        if (id == Vocabulary::kPad || id == Vocabulary::kBos || id == Vocabulary::kEos) continue;
        tokens.push_back(vocab.token_of(id));
    }
    return detail::join(tokens);
}

inline void save_vocab(const Vocabulary& vocab, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCategory::io, "cannot write vocab file: " + path);
    for (const std::string& tok : vocab.tokens) out << tok << "\n";
}

inline Vocabulary load_vocab(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCategory::io, "cannot open vocab file: " + path);
    Vocabulary vocab;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) fail(ErrorCategory::parse, "vocab line " + std::to_string(line_no) + " is empty");
        if (vocab.index.count(line)) {
            fail(ErrorCategory::parse, "vocab line " + std::to_string(line_no) + ": duplicate token '" + line + "'");
        }
        vocab.index[line] = static_cast<int>(vocab.tokens.size());
        vocab.tokens.push_back(line);
    }
    const auto& specials = special_tokens();
    if (vocab.tokens.size() < specials.size()) {
        fail(ErrorCategory::parse, "vocab file too short: " + path);
    }
    for (std::size_t i = 0; i < specials.size(); ++i) {
        if (vocab.tokens[i] != specials[i]) {
            fail(ErrorCategory::parse,
                 "vocab file " + path + ": token " + std::to_string(i) + " must be " + specials[i]);
        }
    }
    return vocab;
}

// ---------------------------------------------------------------------------
// Synthetic fixture corpus
// ---------------------------------------------------------------------------

namespace detail {

struct FixturePools {
    std::vector<std::string> categories;
    std::vector<std::string> brand_first;
    std::vector<std::string> brand_second;
    std::vector<std::string> adjectives;
    std::vector<std::string> qualities;
    std::vector<std::string> places;
    std::vector<std::string> orgs;
    std::vector<std::string> verbs;
    std::vector<std::string> nouns;
    std::vector<std::string> years;
    std::map<std::string, std::vector<std::string>> products;
};

inline const FixturePools& fixture_pools() {
    static const FixturePools pools = [] {
        FixturePools p;
        p.categories = {"food", "drinks", "tours", "cosmetics", "technology", "finance",
                        "fashion", "sports", "health", "education", "automotive", "airlines",
                        "hotels", "insurance", "furniture", "media"};
        p.brand_first = {"nova", "alto", "vera", "orion", "lumen", "cedar", "delta", "famo",
                         "halcyon", "ion", "juno", "kito", "mira", "polar", "rondo", "solis"};
        p.brand_second = {"labs", "works", "house", "line", "field", "craft", "point", "forge",
                          "mill", "peak", "port", "road", "north", "well", "yard", "gate"};
        p.adjectives = {"fresh", "bold", "quiet", "modern", "honest", "bright", "smooth", "pure",
                        "swift", "warm", "crisp", "steady", "light", "rich", "simple", "true"};
        p.qualities = {"quality", "comfort", "flavor", "care", "speed", "trust",
                       "value", "style", "energy", "clarity", "strength", "calm"};
        p.places = {"austin", "boston", "denver", "lisbon", "madrid", "oslo",
                    "porto", "quebec", "seoul", "turin", "vienna", "york"};
        p.orgs = {"company", "brand", "maker", "studio"};
        p.verbs = {"taste", "feel", "drive", "discover", "enjoy", "choose", "carry", "build",
                   "share", "start", "keep", "wear", "trust", "refresh"};
        p.nouns = {"day", "life", "journey", "home", "moment", "world", "morning", "road",
                   "skin", "game", "story", "future", "table", "city"};
        p.years = {"1907", "1964", "1982"};
        p.products = {
            {"food", {"snacks", "cereal", "sauces"}},
            {"drinks", {"juice", "coffee", "soda"}},
            {"tours", {"trips", "cruises"}},
            {"cosmetics", {"creams", "lipstick"}},
            {"technology", {"laptops", "software"}},
            {"finance", {"loans", "savings"}},
            {"fashion", {"jackets", "shoes"}},
            {"sports", {"rackets", "sneakers"}},
            {"health", {"vitamins", "clinics"}},
            {"education", {"courses", "books"}},
            {"automotive", {"cars", "tires"}},
            {"airlines", {"flights"}},
            {"hotels", {"rooms", "suites"}},
            {"insurance", {"policies"}},
            {"furniture", {"sofas", "desks"}},
            {"media", {"podcasts", "films"}},
        };
        return p;
    }();
    return pools;
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& pool) {
    return pool[static_cast<std::size_t>(rng.below(pool.size()))];
}

} // namespace detail

// Deterministic synthetic corpus that stands in for a crawled one. Each
// record gets 1-4 slogans; the whole grammar stays under 500 distinct tokens.
inline std::vector<Record> generate_fixture(int n_records, std::uint64_t seed) {
    if (n_records < 1) fail(ErrorCategory::data, "fixture needs at least 1 record");
    const auto& pools = detail::fixture_pools();
    Rng rng(seed);
    std::vector<Record> records;
    records.reserve(static_cast<std::size_t>(n_records));
    for (int i = 0; i < n_records; ++i) {
        Record rec;
        {
            std::ostringstream id;
            id << "fx-" << std::setfill('0') << std::setw(6) << (i + 1);
            rec.id = id.str();
        }
        rec.category = detail::pick(rng, pools.categories);
        const auto& prods = pools.products.at(rec.category);

        std::string brand = detail::pick(rng, pools.brand_first) + " " + detail::pick(rng, pools.brand_second);
        std::string product = detail::pick(rng, prods);
        std::string adjective = detail::pick(rng, pools.adjectives);
        std::string quality = detail::pick(rng, pools.qualities);
        std::string place = detail::pick(rng, pools.places);
        std::string org = detail::pick(rng, pools.orgs);

        switch (rng.below(4)) {
            case 0:
                rec.description = brand + " is a " + adjective + " " + product + " " + org +
                                  " from " + place + " known for " + quality + ".";
                break;
            case 1:
                rec.description = brand + " makes " + adjective + " " + product +
                                  " with " + quality + " in " + place + ".";
                break;
            case 2:
                rec.description = brand + " is a " + place + " " + org + ", founded in " +
                                  detail::pick(rng, pools.years) + ", selling " + adjective +
                                  " " + product + ".";
                break;
            default:
                rec.description = brand + " & co is the " + org + " behind " + adjective +
                                  " " + product + " loved for " + quality + ".";
                break;
        }

        std::uint64_t n_slogans = 1 + rng.below(4);
        std::set<std::string> used;
        while (rec.slogans.size() < n_slogans) {
            std::string slogan;
            std::string verb = detail::pick(rng, pools.verbs);
            std::string noun = detail::pick(rng, pools.nouns);
            std::string adj = detail::pick(rng, pools.adjectives);
            switch (rng.below(5)) {
                case 0: slogan = verb + " the " + adj + " " + noun; break;
                case 1: slogan = verb + " your " + noun; break;
                case 2: slogan = "the " + adj + " way to " + verb; break;
                case 3: slogan = quality + " for every " + noun; break;
                default: slogan = adj + " " + noun + " every day"; break;
            }
            if (used.insert(slogan).second) rec.slogans.push_back(std::move(slogan));
        }
        records.push_back(std::move(rec));
    }
    return records;
}

} // namespace slogen
