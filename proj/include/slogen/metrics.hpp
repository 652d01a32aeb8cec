// Evaluation metrics: ROUGE-1 (clipped unigram overlap) and ROUGE-L (LCS)
// F1, cosine similarity over pluggable sentence embeddings, six-column
// report assembly, and pairwise preference aggregation.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "slogen/corpus.hpp"
#include "slogen/error.hpp"
#include "slogen/model.hpp"

namespace slogen {

// ---------------------------------------------------------------------------
// ROUGE
// ---------------------------------------------------------------------------

struct RougeScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

namespace detail {

inline RougeScore rouge_from_counts(double overlap, std::size_t cand_len, std::size_t ref_len) {
    RougeScore s;
    s.precision = cand_len == 0 ? 0.0 : overlap / static_cast<double>(cand_len);
    s.recall = ref_len == 0 ? 0.0 : overlap / static_cast<double>(ref_len);
    double pr = s.precision + s.recall;
    s.f1 = pr > 0.0 ? 2.0 * s.precision * s.recall / pr : 0.0;
    return s;
}

} // namespace detail

inline RougeScore rouge_1(const std::vector<std::string>& candidate, const std::vector<std::string>& reference) {
    std::map<std::string, std::int64_t> cand_counts, ref_counts;
    for (const std::string& t : candidate) ++cand_counts[t];
    for (const std::string& t : reference) ++ref_counts[t];
    std::int64_t overlap = 0;
    for (const auto& [tok, n] : cand_counts) {
        auto it = ref_counts.find(tok);
        if (it != ref_counts.end()) overlap += std::min(n, it->second);
    }
    return detail::rouge_from_counts(static_cast<double>(overlap), candidate.size(), reference.size());
}

inline std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::size_t m = a.size(), n = b.size();
    std::vector<std::size_t> prev(n + 1, 0), cur(n + 1, 0);
    for (std::size_t i = 1; i <= m; ++i) {
        for (std::size_t j = 1; j <= n; ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[n];
}

inline RougeScore rouge_l(const std::vector<std::string>& candidate, const std::vector<std::string>& reference) {
    std::size_t lcs = lcs_length(candidate, reference);
    return detail::rouge_from_counts(static_cast<double>(lcs), candidate.size(), reference.size());
}

inline RougeScore rouge_1(std::string_view candidate, std::string_view reference) {
    return rouge_1(tokenize(candidate), tokenize(reference));
}

inline RougeScore rouge_l(std::string_view candidate, std::string_view reference) {
    return rouge_l(tokenize(candidate), tokenize(reference));
}

// ---------------------------------------------------------------------------
// Sentence embeddings and cosine similarity
// ---------------------------------------------------------------------------

inline double cosine(const std::vector<double>& u, const std::vector<double>& v) {
    if (u.size() != v.size() || u.empty()) {
        fail(ErrorCategory::eval, "cosine requires equal non-empty dimensions, got " +
                                  std::to_string(u.size()) + " and " + std::to_string(v.size()));
    }
    if (u == v) {
        for (double x : u) {
            if (x != 0.0) return 1.0;
        }
    }
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu == 0.0 || nv == 0.0) fail(ErrorCategory::eval, "cosine of a zero vector is undefined");
    return dot / (std::sqrt(nu) * std::sqrt(nv));
}

class SentenceEmbeddingProvider {
public:
    virtual ~SentenceEmbeddingProvider() = default;
    virtual int dimension() const = 0;
    virtual std::vector<double> embed(const std::string& text) = 0;
};

// Mean-pooled final hidden states of the trained evaluation model.
class ModelMeanPoolProvider : public SentenceEmbeddingProvider {
public:
    ModelMeanPoolProvider(const ModelParams& params, ModelConfig config, const Vocabulary& vocab)
        : params_(&params), config_(std::move(config)), vocab_(&vocab) {}

    int dimension() const override { return config_.d_model; }

    std::vector<double> embed(const std::string& text) override {
        std::vector<std::string> tokens = tokenize(text);
        if (tokens.empty()) {
            fail(ErrorCategory::eval, "cannot embed empty text");
        }
        // Content tokens only: the pooled vector of a one-token sentence is
        // exactly that token's hidden state.
        std::vector<int> ids;
        ids.reserve(tokens.size());
        for (const std::string& t : tokens) ids.push_back(vocab_->id_of(t));
        if (static_cast<int>(ids.size()) > config_.max_len) ids.resize(static_cast<std::size_t>(config_.max_len));
        TensorPtr h = sentence_hidden_states(*params_, config_, ids);
        int L = h->shape[0], d = h->shape[1];
        std::vector<double> out(static_cast<std::size_t>(d), 0.0);
        for (int i = 0; i < L; ++i) {
            for (int j = 0; j < d; ++j) out[static_cast<std::size_t>(j)] += h->at(i, j);
        }
        for (double& x : out) x /= static_cast<double>(L);
        return out;
    }

private:
    const ModelParams* params_;
    ModelConfig config_;
    const Vocabulary* vocab_;
};

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= static_cast<std::uint64_t>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Precomputed vectors keyed by the FNV-1a hash of the exact text, so vectors
// from a stronger external embedding model can be dropped in offline.
// File format: one entry per line, "hash_hex<TAB>dim<TAB>v0 v1 ... v{dim-1}".
class ExternalVectorsProvider : public SentenceEmbeddingProvider {
public:
    explicit ExternalVectorsProvider(const std::string& path) {
        std::ifstream in(path);
        if (!in) fail(ErrorCategory::io, "cannot open vectors file: " + path);
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            std::istringstream row(line);
            std::string hash_hex;
            int dim = 0;
            if (!(row >> hash_hex >> dim) || dim < 1) {
                fail(ErrorCategory::parse, path + ":" + std::to_string(line_no) + ": expected hash and dimension");
            }
            std::uint64_t key = 0;
            try {
                key = std::stoull(hash_hex, nullptr, 16);
            } catch (const std::exception&) {
                fail(ErrorCategory::parse, path + ":" + std::to_string(line_no) + ": bad hash '" + hash_hex + "'");
            }
            std::vector<double> vec(static_cast<std::size_t>(dim));
            for (int i = 0; i < dim; ++i) {
                if (!(row >> vec[static_cast<std::size_t>(i)])) {
                    fail(ErrorCategory::parse, path + ":" + std::to_string(line_no) + ": expected " +
                                               std::to_string(dim) + " coordinates");
                }
            }
            if (dim_ == 0) dim_ = dim;
            if (dim != dim_) {
                fail(ErrorCategory::parse, path + ":" + std::to_string(line_no) + ": dimension " +
                                           std::to_string(dim) + " conflicts with earlier " + std::to_string(dim_));
            }
            vectors_[key] = std::move(vec);
        }
        if (vectors_.empty()) fail(ErrorCategory::data, "vectors file has no entries: " + path);
    }

    int dimension() const override { return dim_; }

    std::vector<double> embed(const std::string& text) override {
        auto it = vectors_.find(fnv1a64(text));
        if (it == vectors_.end()) {
            fail(ErrorCategory::eval, "no external vector for text: \"" + text + "\"");
        }
        return it->second;
    }

private:
    int dim_ = 0;
    std::map<std::uint64_t, std::vector<double>> vectors_;
};

inline void write_vectors(const std::string& path,
                          const std::vector<std::pair<std::string, std::vector<double>>>& entries) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCategory::io, "cannot write vectors file: " + path);
    out << std::setprecision(17);
    for (const auto& [text, vec] : entries) {
        out << std::hex << fnv1a64(text) << std::dec << "\t" << vec.size() << "\t";
        for (std::size_t i = 0; i < vec.size(); ++i) {
            if (i) out << " ";
            out << vec[i];
        }
        out << "\n";
    }
}

// ---------------------------------------------------------------------------
// Report assembly
// ---------------------------------------------------------------------------

struct EvalReport {
    std::string label;
    std::size_t sample_count = 0;
    // means scaled x100, Table-style column order
    double rouge1_desc = 0.0;
    double rouge1_ref = 0.0;
    double rougeL_desc = 0.0;
    double rougeL_ref = 0.0;
    double cosine_desc = 0.0;
    double cosine_ref = 0.0;
};

enum class RefReduce { per_pair, max_over_siblings };

inline RefReduce parse_ref_reduce(const std::string& s) {
    if (s == "per_pair") return RefReduce::per_pair;
    if (s == "max") return RefReduce::max_over_siblings;
    fail(ErrorCategory::config, "unknown ref_reduce mode '" + s + "' (expected per_pair or max)");
}

namespace detail {

struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;
    void add(double x) {
        double y = x - carry;
        double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
};

} // namespace detail

using GenerationKey = std::pair<std::string, int>; // (record_id, pair_index)
using GenerationMap = std::map<GenerationKey, std::string>;

// Scores every test pair's generation against its description ("Desc") and
// its reference slogan ("Ref"), then reports means x100. With ref-reduce
// max, Ref scores take the best value over all sibling references of the
// pair's record.
inline EvalReport evaluate(const std::vector<Pair>& pairs, const GenerationMap& generations,
                           SentenceEmbeddingProvider& provider, const std::string& label,
                           RefReduce reduce = RefReduce::per_pair) {
    if (pairs.empty()) fail(ErrorCategory::eval, "no test pairs to evaluate");

    std::vector<std::string> missing;
    for (const Pair& p : pairs) {
        if (!generations.count({p.record_id, p.pair_index})) {
            missing.push_back(p.record_id + "#" + std::to_string(p.pair_index));
        }
    }
    if (!missing.empty()) {
        std::string joined;
        for (std::size_t i = 0; i < missing.size(); ++i) {
            if (i) joined += ", ";
            joined += missing[i];
        }
        fail(ErrorCategory::eval, "missing generations for: " + joined);
    }

    std::map<std::string, std::vector<std::string>> siblings;
    if (reduce == RefReduce::max_over_siblings) {
        for (const Pair& p : pairs) siblings[p.record_id].push_back(p.slogan);
    }

    std::map<std::string, std::vector<double>> embed_cache;
    auto embed = [&](const std::string& text) -> const std::vector<double>& {
        auto it = embed_cache.find(text);
        if (it == embed_cache.end()) it = embed_cache.emplace(text, provider.embed(text)).first;
        return it->second;
    };

    detail::KahanSum r1d, r1r, rld, rlr, cd, cr;
    for (const Pair& p : pairs) {
        const std::string& gen = generations.at({p.record_id, p.pair_index});
        std::vector<std::string> gen_toks = tokenize(gen);
        std::vector<std::string> desc_toks = tokenize(p.description);
        // An empty generation (greedy decode can stop immediately) has no
        // embedding; score its alignment as 0, matching the ROUGE columns.
        bool gen_empty = gen_toks.empty();

        r1d.add(rouge_1(gen_toks, desc_toks).f1);
        rld.add(rouge_l(gen_toks, desc_toks).f1);
        cd.add(gen_empty ? 0.0 : cosine(embed(gen), embed(p.description)));

        if (reduce == RefReduce::per_pair) {
            std::vector<std::string> ref_toks = tokenize(p.slogan);
            r1r.add(rouge_1(gen_toks, ref_toks).f1);
            rlr.add(rouge_l(gen_toks, ref_toks).f1);
            cr.add(gen_empty ? 0.0 : cosine(embed(gen), embed(p.slogan)));
        } else {
            double best_r1 = 0.0, best_rl = 0.0, best_cos = -1.0;
            for (const std::string& ref : siblings[p.record_id]) {
                std::vector<std::string> ref_toks = tokenize(ref);
                best_r1 = std::max(best_r1, rouge_1(gen_toks, ref_toks).f1);
                best_rl = std::max(best_rl, rouge_l(gen_toks, ref_toks).f1);
                if (!gen_empty) best_cos = std::max(best_cos, cosine(embed(gen), embed(ref)));
            }
            r1r.add(best_r1);
            rlr.add(best_rl);
            cr.add(gen_empty ? 0.0 : best_cos);
        }
    }

    double n = static_cast<double>(pairs.size());
    EvalReport report;
    report.label = label;
    report.sample_count = pairs.size();
    report.rouge1_desc = 100.0 * r1d.sum / n;
    report.rouge1_ref = 100.0 * r1r.sum / n;
    report.rougeL_desc = 100.0 * rld.sum / n;
    report.rougeL_ref = 100.0 * rlr.sum / n;
    report.cosine_desc = 100.0 * cd.sum / n;
    report.cosine_ref = 100.0 * cr.sum / n;
    return report;
}

inline const std::array<const char*, 6>& eval_column_names() {
    static const std::array<const char*, 6> names = {
        "rouge1_desc", "rouge1_ref", "rougeL_desc", "rougeL_ref", "cosine_desc", "cosine_ref"};
    return names;
}

inline std::array<double, 6> eval_columns(const EvalReport& r) {
    return {r.rouge1_desc, r.rouge1_ref, r.rougeL_desc, r.rougeL_ref, r.cosine_desc, r.cosine_ref};
}

inline void write_eval_csv(std::ostream& out, const std::vector<EvalReport>& reports) {
    out << "model,samples";
    for (const char* name : eval_column_names()) out << "," << name;
    out << "\n";
    out << std::setprecision(17);
    for (const EvalReport& r : reports) {
        out << r.label << "," << r.sample_count;
        for (double v : eval_columns(r)) out << "," << v;
        out << "\n";
    }
}

inline void write_eval_text(std::ostream& out, const std::vector<EvalReport>& reports) {
    static const std::array<const char*, 6> heads = {
        "R1-Desc", "R1-Ref", "RL-Desc", "RL-Ref", "Cos-Desc", "Cos-Ref"};
    std::size_t label_w = 5;
    for (const EvalReport& r : reports) label_w = std::max(label_w, r.label.size());
    out << std::left << std::setw(static_cast<int>(label_w + 2)) << "Model" << std::right;
    for (const char* h : heads) out << std::setw(10) << h;
    out << std::setw(9) << "N" << "\n";
    out << std::fixed << std::setprecision(4);
    for (const EvalReport& r : reports) {
        out << std::left << std::setw(static_cast<int>(label_w + 2)) << r.label << std::right;
        for (double v : eval_columns(r)) out << std::setw(10) << v;
        out << std::setw(9) << r.sample_count << "\n";
    }
    out.unsetf(std::ios::fixed);
    out << std::setprecision(6);
}

// ---------------------------------------------------------------------------
// Pairwise preference aggregation
// ---------------------------------------------------------------------------

enum class Criterion { distinctiveness, coherence, fluency };

inline const std::array<const char*, 3>& criterion_names() {
    static const std::array<const char*, 3> names = {"distinctiveness", "coherence", "fluency"};
    return names;
}

inline Criterion parse_criterion(const std::string& s) {
    for (std::size_t i = 0; i < criterion_names().size(); ++i) {
        if (s == criterion_names()[i]) return static_cast<Criterion>(i);
    }
    fail(ErrorCategory::parse, "unknown criterion '" + s + "'");
}

struct PairwiseJudgment {
    std::string sample_id;
    Criterion criterion = Criterion::distinctiveness;
    std::string system_a;
    std::string system_b;
    char winner = 'a'; // 'a' or 'b'
};

struct PreferenceCell {
    long wins = 0;
    long total = 0;

    bool present() const { return total > 0; }

    // Computed from the minority count, so the focal and opposing tables'
    // percentages for one cell sum to exactly 100.
    double percent() const {
        if (2 * wins <= total) return 100.0 * static_cast<double>(wins) / static_cast<double>(total);
        return 100.0 - 100.0 * static_cast<double>(total - wins) / static_cast<double>(total);
    }
};

struct PreferenceTable {
    std::string focal;
    std::vector<std::string> opponents; // first-appearance order
    std::map<std::string, std::array<PreferenceCell, 3>> cells;

    bool average_present(Criterion c) const {
        for (const auto& [op, row] : cells) {
            if (row[static_cast<std::size_t>(c)].present()) return true;
        }
        return false;
    }

    // Arithmetic mean over the column's present cells.
    double average(Criterion c) const {
        double sum = 0.0;
        int n = 0;
        for (const std::string& op : opponents) {
            const PreferenceCell& cell = cells.at(op)[static_cast<std::size_t>(c)];
            if (!cell.present()) continue;
            sum += cell.percent();
            ++n;
        }
        if (n == 0) fail(ErrorCategory::eval, "no judgments for criterion");
        return sum / n;
    }
};

inline PreferenceTable aggregate_preferences(const std::vector<PairwiseJudgment>& judgments,
                                             const std::string& focal) {
    PreferenceTable table;
    table.focal = focal;
    for (const PairwiseJudgment& j : judgments) {
        if (j.winner != 'a' && j.winner != 'b') {
            fail(ErrorCategory::eval, "judgment winner must be 'a' or 'b'");
        }
        std::string opponent;
        bool focal_won;
        if (j.system_a == focal) {
            opponent = j.system_b;
            focal_won = j.winner == 'a';
        } else if (j.system_b == focal) {
            opponent = j.system_a;
            focal_won = j.winner == 'b';
        } else {
            fail(ErrorCategory::eval, "judgment between '" + j.system_a + "' and '" + j.system_b +
                                      "' does not involve focal system '" + focal + "'");
        }
        if (!table.cells.count(opponent)) {
            table.cells[opponent] = {};
            table.opponents.push_back(opponent);
        }
        PreferenceCell& cell = table.cells[opponent][static_cast<std::size_t>(j.criterion)];
        ++cell.total;
        if (focal_won) ++cell.wins;
    }
    return table;
}

inline void write_preference_text(std::ostream& out, const PreferenceTable& table) {
    std::size_t label_w = 7;
    for (const std::string& op : table.opponents) label_w = std::max(label_w, op.size() + 3);
    out << table.focal << " win rate (%)\n";
    out << std::left << std::setw(static_cast<int>(label_w + 2)) << "Against" << std::right;
    for (const char* c : criterion_names()) out << std::setw(17) << c;
    out << "\n";
    out << std::fixed << std::setprecision(5);
    for (const std::string& op : table.opponents) {
        out << std::left << std::setw(static_cast<int>(label_w + 2)) << ("vs " + op) << std::right;
        for (std::size_t c = 0; c < 3; ++c) {
            const PreferenceCell& cell = table.cells.at(op)[c];
            if (cell.present()) {
                out << std::setw(17) << cell.percent();
            } else {
                out << std::setw(17) << "-";
            }
        }
        out << "\n";
    }
    out << std::left << std::setw(static_cast<int>(label_w + 2)) << "Average" << std::right;
    for (std::size_t c = 0; c < 3; ++c) {
        auto crit = static_cast<Criterion>(c);
        if (table.average_present(crit)) {
            out << std::setw(17) << table.average(crit);
        } else {
            out << std::setw(17) << "-";
        }
    }
    out << "\n";
    out.unsetf(std::ios::fixed);
    out << std::setprecision(6);
}

inline void write_preference_csv(std::ostream& out, const PreferenceTable& table) {
    out << "against";
    for (const char* c : criterion_names()) out << "," << c;
    out << "\n";
    out << std::setprecision(17);
    auto write_row = [&](const std::string& name, auto value_of) {
        out << name;
        for (std::size_t c = 0; c < 3; ++c) {
            out << ",";
            auto crit = static_cast<Criterion>(c);
            if (value_of(crit)) out << *value_of(crit);
        }
        out << "\n";
    };
    for (const std::string& op : table.opponents) {
        write_row(op, [&](Criterion crit) -> std::optional<double> {
            const PreferenceCell& cell = table.cells.at(op)[static_cast<std::size_t>(crit)];
            if (!cell.present()) return std::nullopt;
            return cell.percent();
        });
    }
    write_row("Average", [&](Criterion crit) -> std::optional<double> {
        if (!table.average_present(crit)) return std::nullopt;
        return table.average(crit);
    });
}

// ---------------------------------------------------------------------------
// Wire formats
// ---------------------------------------------------------------------------

inline void write_generations(const std::string& path, const std::vector<Pair>& pairs,
                              const GenerationMap& generations) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCategory::io, "cannot write generations file: " + path);
    for (const Pair& p : pairs) {
        auto it = generations.find({p.record_id, p.pair_index});
        if (it == generations.end()) {
            fail(ErrorCategory::eval, "missing generation for " + p.record_id + "#" + std::to_string(p.pair_index));
        }
        out << p.record_id << "\t" << p.pair_index << "\t" << it->second << "\n";
    }
}

inline GenerationMap read_generations(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCategory::io, "cannot open generations file: " + path);
    GenerationMap map;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto t1 = line.find('\t');
        auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        if (t2 == std::string::npos) {
            fail(ErrorCategory::parse, path + ":" + std::to_string(line_no) +
                                       ": expected record_id<TAB>index<TAB>slogan");
        }
        std::string record_id = line.substr(0, t1);
        int index = 0;
        try {
            index = std::stoi(line.substr(t1 + 1, t2 - t1 - 1));
        } catch (const std::exception&) {
            fail(ErrorCategory::parse, path + ":" + std::to_string(line_no) + ": bad pair index");
        }
        map[{record_id, index}] = line.substr(t2 + 1);
    }
    return map;
}

inline void write_judgments(const std::string& path, const std::vector<PairwiseJudgment>& judgments) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCategory::io, "cannot write judgments file: " + path);
    for (const PairwiseJudgment& j : judgments) {
        out << j.sample_id << "\t" << criterion_names()[static_cast<std::size_t>(j.criterion)] << "\t"
            << j.system_a << "\t" << j.system_b << "\t" << j.winner << "\n";
    }
}

inline std::vector<PairwiseJudgment> read_judgments(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCategory::io, "cannot open judgments file: " + path);
    std::vector<PairwiseJudgment> judgments;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            auto tab = line.find('\t', start);
            fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        if (fields.size() != 5) {
            fail(ErrorCategory::parse, path + ":" + std::to_string(line_no) +
                                       ": expected 5 tab-separated fields, got " + std::to_string(fields.size()));
        }
        PairwiseJudgment j;
        j.sample_id = fields[0];
        try {
            j.criterion = parse_criterion(fields[1]);
        } catch (const Error& e) {
            fail(ErrorCategory::parse, path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        j.system_a = fields[2];
        j.system_b = fields[3];
        if (fields[4] != "a" && fields[4] != "b") {
            fail(ErrorCategory::parse, path + ":" + std::to_string(line_no) +
                                       ": winner must be 'a' or 'b', got '" + fields[4] + "'");
        }
        j.winner = fields[4][0];
        judgments.push_back(std::move(j));
    }
    return judgments;
}

} // namespace slogen
