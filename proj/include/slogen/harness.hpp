// Pipeline orchestration: a flat key=value run config with full defaulting
// and echo-back, plus the subcommand bodies the CLI dispatches to
// (prepare-data, train, generate, evaluate, ablate, judge, report).
#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "slogen/adam.hpp"
#include "slogen/corpus.hpp"
#include "slogen/error.hpp"
#include "slogen/metrics.hpp"
#include "slogen/model.hpp"
#include "slogen/perturb.hpp"

namespace slogen {

struct SeedConfig {
    std::uint64_t split = 1;
    std::uint64_t init = 2;
    std::uint64_t train = 3;
};

struct DataConfig {
    std::string records;      // input records path; empty means use the fixture
    int fixture_n = 0;        // when > 0, generate this many synthetic records
    double split_ratio = 0.2;
    int max_vocab = 2000;
};

struct OptimConfig {
    double lr = 3e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int batch_size = 4;
    int epochs = 30;
};

struct EvalConfig {
    std::string provider = "model_mean_pool"; // or external_vectors
    std::string vectors;                      // path, external_vectors only
    std::string ref_reduce = "per_pair";      // or max
    std::string label = "model";
};

struct AblateConfig {
    std::vector<double> levels = {0.0, 0.25, 0.5, 0.75};
    int replicates = 5;
};

struct RunConfig {
    DataConfig data;
    ModelConfig model;
    NoiseConfig noise;
    bool noise_mask_log = false;
    OptimConfig optim;
    GenerationConfig gen;
    EvalConfig eval;
    AblateConfig ablate;
    SeedConfig seeds;
    std::string out_dir = "out";
};

// ---------------------------------------------------------------------------
// Config parsing / echo
// ---------------------------------------------------------------------------

namespace detail {

inline int parse_int(const std::string& value, const std::string& key) {
    try {
        std::size_t used = 0;
        int v = std::stoi(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        fail(ErrorCategory::config, "key '" + key + "': bad integer '" + value + "'");
    }
}

inline std::uint64_t parse_u64(const std::string& value, const std::string& key) {
    try {
        // stoull would wrap "-4" around instead of rejecting it
        if (value.empty() || value[0] == '-' || value[0] == '+') throw std::invalid_argument(value);
        std::size_t used = 0;
        std::uint64_t v = std::stoull(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        fail(ErrorCategory::config, "key '" + key + "': bad unsigned integer '" + value + "'");
    }
}

inline double parse_double(const std::string& value, const std::string& key) {
    try {
        std::size_t used = 0;
        double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        fail(ErrorCategory::config, "key '" + key + "': bad number '" + value + "'");
    }
}

inline bool parse_bool(const std::string& value, const std::string& key) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    fail(ErrorCategory::config, "key '" + key + "': bad boolean '" + value + "'");
}

inline std::vector<double> parse_levels(const std::string& value, const std::string& key) {
    std::vector<double> levels;
    std::size_t start = 0;
    while (start <= value.size()) {
        auto comma = value.find(',', start);
        std::string part = value.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (part.empty()) fail(ErrorCategory::config, "key '" + key + "': empty level in '" + value + "'");
        levels.push_back(parse_double(part, key));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return levels;
}

inline std::string format_double(double v) {
    std::ostringstream out;
    out << std::setprecision(17) << v;
    return out.str();
}

} // namespace detail

inline void apply_config_entry(RunConfig& c, const std::string& key, const std::string& value) {
    if (key == "data.records") c.data.records = value;
    else if (key == "data.fixture_n") c.data.fixture_n = detail::parse_int(value, key);
    else if (key == "data.split_ratio") c.data.split_ratio = detail::parse_double(value, key);
    else if (key == "data.max_vocab") c.data.max_vocab = detail::parse_int(value, key);
    else if (key == "model.variant") c.model.variant = parse_variant(value);
    else if (key == "model.d_model") c.model.d_model = detail::parse_int(value, key);
    else if (key == "model.n_heads") c.model.n_heads = detail::parse_int(value, key);
    else if (key == "model.n_enc_layers") c.model.n_enc_layers = detail::parse_int(value, key);
    else if (key == "model.n_dec_layers") c.model.n_dec_layers = detail::parse_int(value, key);
    else if (key == "model.d_ff") c.model.d_ff = detail::parse_int(value, key);
    else if (key == "model.max_len") c.model.max_len = detail::parse_int(value, key);
    else if (key == "model.vocab_size") c.model.vocab_size = detail::parse_int(value, key);
    else if (key == "model.freeze_policy") c.model.freeze_policy = parse_freeze_policy(value);
    else if (key == "noise.theta") c.noise.theta = detail::parse_double(value, key);
    else if (key == "noise.sigma") c.noise.sigma = detail::parse_double(value, key);
    else if (key == "noise.mean") c.noise.mean = detail::parse_double(value, key);
    else if (key == "noise.seed") c.noise.seed = detail::parse_u64(value, key);
    else if (key == "noise.mask_log") c.noise_mask_log = detail::parse_bool(value, key);
    else if (key == "optim.lr") c.optim.lr = detail::parse_double(value, key);
    else if (key == "optim.beta1") c.optim.beta1 = detail::parse_double(value, key);
    else if (key == "optim.beta2") c.optim.beta2 = detail::parse_double(value, key);
    else if (key == "optim.eps") c.optim.eps = detail::parse_double(value, key);
    else if (key == "optim.batch_size") c.optim.batch_size = detail::parse_int(value, key);
    else if (key == "optim.epochs") c.optim.epochs = detail::parse_int(value, key);
    else if (key == "gen.max_new_tokens") c.gen.max_new_tokens = detail::parse_int(value, key);
    else if (key == "eval.provider") c.eval.provider = value;
    else if (key == "eval.vectors") c.eval.vectors = value;
    else if (key == "eval.ref_reduce") c.eval.ref_reduce = value;
    else if (key == "eval.label") c.eval.label = value;
    else if (key == "ablate.levels") c.ablate.levels = detail::parse_levels(value, key);
    else if (key == "ablate.replicates") c.ablate.replicates = detail::parse_int(value, key);
    else if (key == "seeds.split") c.seeds.split = detail::parse_u64(value, key);
    else if (key == "seeds.init") c.seeds.init = detail::parse_u64(value, key);
    else if (key == "seeds.train") c.seeds.train = detail::parse_u64(value, key);
    else if (key == "out.dir") c.out_dir = value;
    else fail(ErrorCategory::config, "unknown config key '" + key + "'");
}

inline void apply_config_file(RunConfig& c, const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCategory::io, "cannot open config file: " + path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            fail(ErrorCategory::config, path + ":" + std::to_string(line_no) + ": expected key=value");
        }
        try {
            apply_config_entry(c, line.substr(0, eq), line.substr(eq + 1));
        } catch (const Error& e) {
            fail(e.category(), path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

inline void validate_run_config(const RunConfig& c) {
    if (!(c.data.split_ratio > 0.0 && c.data.split_ratio < 1.0)) {
        fail(ErrorCategory::config, "data.split_ratio must be in (0,1)");
    }
    if (c.data.max_vocab < 5) fail(ErrorCategory::config, "data.max_vocab must be at least 5");
    if (c.data.fixture_n < 0) fail(ErrorCategory::config, "data.fixture_n must be non-negative");
    validate_noise_config(c.noise);
    if (c.optim.batch_size < 1) fail(ErrorCategory::config, "optim.batch_size must be >= 1");
    if (c.optim.epochs < 1) fail(ErrorCategory::config, "optim.epochs must be >= 1");
    validate_generation_config(c.gen);
    if (c.eval.provider != "model_mean_pool" && c.eval.provider != "external_vectors") {
        fail(ErrorCategory::config, "eval.provider must be model_mean_pool or external_vectors");
    }
    if (c.eval.provider == "external_vectors" && c.eval.vectors.empty()) {
        fail(ErrorCategory::config, "eval.provider=external_vectors requires eval.vectors");
    }
    parse_ref_reduce(c.eval.ref_reduce);
    if (c.ablate.levels.empty()) fail(ErrorCategory::config, "ablate.levels must be non-empty");
    for (double t : c.ablate.levels) {
        if (t < 0.0 || t > 1.0) fail(ErrorCategory::config, "ablate.levels entries must lie in [0,1]");
    }
    for (std::size_t i = 0; i < c.ablate.levels.size(); ++i) {
        for (std::size_t j = i + 1; j < c.ablate.levels.size(); ++j) {
            if (c.ablate.levels[i] == c.ablate.levels[j]) {
                fail(ErrorCategory::config, "ablate.levels entries must be distinct");
            }
        }
    }
    if (c.ablate.replicates < 1) fail(ErrorCategory::config, "ablate.replicates must be >= 1");
    if (c.out_dir.empty()) fail(ErrorCategory::config, "out.dir must be non-empty");
}

// Echoes every key, defaults included, in a fixed order; re-running from the
// echoed file reproduces the run.
inline void save_run_config(const RunConfig& c, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCategory::io, "cannot write config echo: " + path);
    auto d = detail::format_double;
    out << "data.records=" << c.data.records << "\n"
        << "data.fixture_n=" << c.data.fixture_n << "\n"
        << "data.split_ratio=" << d(c.data.split_ratio) << "\n"
        << "data.max_vocab=" << c.data.max_vocab << "\n"
        << "model.variant=" << to_string(c.model.variant) << "\n"
        << "model.d_model=" << c.model.d_model << "\n"
        << "model.n_heads=" << c.model.n_heads << "\n"
        << "model.n_enc_layers=" << c.model.n_enc_layers << "\n"
        << "model.n_dec_layers=" << c.model.n_dec_layers << "\n"
        << "model.d_ff=" << c.model.d_ff << "\n"
        << "model.max_len=" << c.model.max_len << "\n"
        << "model.vocab_size=" << c.model.vocab_size << "\n"
        << "model.freeze_policy=" << to_string(c.model.freeze_policy) << "\n"
        << "noise.theta=" << d(c.noise.theta) << "\n"
        << "noise.sigma=" << d(c.noise.sigma) << "\n"
        << "noise.mean=" << d(c.noise.mean) << "\n"
        << "noise.seed=" << c.noise.seed << "\n"
        << "noise.mask_log=" << (c.noise_mask_log ? "true" : "false") << "\n"
        << "optim.lr=" << d(c.optim.lr) << "\n"
        << "optim.beta1=" << d(c.optim.beta1) << "\n"
        << "optim.beta2=" << d(c.optim.beta2) << "\n"
        << "optim.eps=" << d(c.optim.eps) << "\n"
        << "optim.batch_size=" << c.optim.batch_size << "\n"
        << "optim.epochs=" << c.optim.epochs << "\n"
        << "gen.max_new_tokens=" << c.gen.max_new_tokens << "\n"
        << "eval.provider=" << c.eval.provider << "\n"
        << "eval.vectors=" << c.eval.vectors << "\n"
        << "eval.ref_reduce=" << c.eval.ref_reduce << "\n"
        << "eval.label=" << c.eval.label << "\n";
    out << "ablate.levels=";
    for (std::size_t i = 0; i < c.ablate.levels.size(); ++i) {
        if (i) out << ",";
        out << d(c.ablate.levels[i]);
    }
    out << "\n"
        << "ablate.replicates=" << c.ablate.replicates << "\n"
        << "seeds.split=" << c.seeds.split << "\n"
        << "seeds.init=" << c.seeds.init << "\n"
        << "seeds.train=" << c.seeds.train << "\n"
        << "out.dir=" << c.out_dir << "\n";
    if (!out) fail(ErrorCategory::io, "failed writing config echo: " + path);
}

// ---------------------------------------------------------------------------
// Output layout
// ---------------------------------------------------------------------------

namespace paths {

inline std::string join(const std::string& dir, const char* name) { return dir + "/" + name; }

inline std::string train_records(const std::string& d) { return join(d, "train_records.txt"); }
inline std::string test_records(const std::string& d) { return join(d, "test_records.txt"); }
inline std::string vocab(const std::string& d) { return join(d, "vocab.txt"); }
inline std::string split_meta(const std::string& d) { return join(d, "split.meta"); }
inline std::string config_echo(const std::string& d) { return join(d, "config.resolved"); }
inline std::string checkpoint(const std::string& d) { return join(d, "model.ckpt"); }
inline std::string model_config(const std::string& d) { return join(d, "model.config"); }
inline std::string loss_csv(const std::string& d) { return join(d, "train_loss.csv"); }
inline std::string mask_log(const std::string& d) { return join(d, "mask_log.txt"); }
inline std::string generations(const std::string& d) { return join(d, "generations.txt"); }
inline std::string report_text(const std::string& d) { return join(d, "report.txt"); }
inline std::string report_csv(const std::string& d) { return join(d, "report.csv"); }
inline std::string ablation_text(const std::string& d) { return join(d, "ablation.txt"); }
inline std::string ablation_csv(const std::string& d) { return join(d, "ablation.csv"); }
inline std::string preferences_text(const std::string& d) { return join(d, "preferences.txt"); }
inline std::string preferences_csv(const std::string& d) { return join(d, "preferences.csv"); }

} // namespace paths

namespace detail {

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail(ErrorCategory::io, "cannot create directory " + dir + ": " + ec.message());
}

} // namespace detail

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

// parse -> clean -> split -> vocab; writes both split record files, the
// vocabulary, and split metadata under out_dir.
inline void cmd_prepare_data(const RunConfig& cfg) {
    validate_run_config(cfg);
    if (cfg.data.records.empty() && cfg.data.fixture_n <= 0) {
        fail(ErrorCategory::config, "prepare-data needs data.records or a fixture size");
    }
    std::vector<Record> raw = cfg.data.fixture_n > 0 ? generate_fixture(cfg.data.fixture_n, cfg.seeds.split)
                                                     : read_records(cfg.data.records);
    std::size_t dropped = 0;
    std::vector<Record> cleaned = clean_records(raw, &dropped);
    RecordSplit split = split_records(cleaned, cfg.data.split_ratio, cfg.seeds.split);
    Vocabulary vocab = build_vocab(expand_pairs(split.train), cfg.data.max_vocab);

    detail::ensure_dir(cfg.out_dir);
    write_records(split.train, paths::train_records(cfg.out_dir));
    write_records(split.test, paths::test_records(cfg.out_dir));
    save_vocab(vocab, paths::vocab(cfg.out_dir));

    std::ofstream meta(paths::split_meta(cfg.out_dir), std::ios::binary);
    if (!meta) fail(ErrorCategory::io, "cannot write split metadata");
    meta << "seed=" << cfg.seeds.split << "\n"
         << "ratio=" << detail::format_double(cfg.data.split_ratio) << "\n"
         << "records_in=" << raw.size() << "\n"
         << "records_dropped=" << dropped << "\n"
         << "records_train=" << split.train.size() << "\n"
         << "records_test=" << split.test.size() << "\n"
         << "pairs_train=" << expand_pairs(split.train).size() << "\n"
         << "pairs_test=" << expand_pairs(split.test).size() << "\n"
         << "vocab_size=" << vocab.size() << "\n";
    save_run_config(cfg, paths::config_echo(cfg.out_dir));
}

inline void cmd_make_fixture(const RunConfig& cfg, int n, const std::string& output) {
    if (n < 1) fail(ErrorCategory::config, "fixture size must be >= 1");
    std::vector<Record> records = generate_fixture(n, cfg.seeds.split);
    auto parent = std::filesystem::path(output).parent_path();
    if (!parent.empty()) detail::ensure_dir(parent.string());
    write_records(records, output);
}

// Resolves vocab_size=0 to the prepared vocabulary's size.
inline ModelConfig resolved_model_config(const RunConfig& cfg, const Vocabulary& vocab) {
    ModelConfig mc = cfg.model;
    if (mc.vocab_size == 0) mc.vocab_size = vocab.size();
    validate_model_config(mc);
    return mc;
}

inline TrainConfig to_train_config(const RunConfig& cfg) {
    TrainConfig tc;
    tc.adam.lr = cfg.optim.lr;
    tc.adam.beta1 = cfg.optim.beta1;
    tc.adam.beta2 = cfg.optim.beta2;
    tc.adam.eps = cfg.optim.eps;
    tc.batch_size = cfg.optim.batch_size;
    tc.epochs = cfg.optim.epochs;
    tc.seed = cfg.seeds.train;
    return tc;
}

// Trains on the prepared split in data_dir and writes the checkpoint, config
// sidecar, and per-epoch loss CSV into out_dir (both default to cfg.out_dir).
inline TrainResult cmd_train(const RunConfig& cfg, const std::string& data_dir_in = "",
                             const std::string& out_dir_in = "") {
    validate_run_config(cfg);
    const std::string data_dir = data_dir_in.empty() ? cfg.out_dir : data_dir_in;
    const std::string out_dir = out_dir_in.empty() ? cfg.out_dir : out_dir_in;

    std::vector<Record> train_recs = read_records(paths::train_records(data_dir));
    Vocabulary vocab = load_vocab(paths::vocab(data_dir));
    ModelConfig mc = resolved_model_config(cfg, vocab);

    std::vector<Pair> pairs = expand_pairs(train_recs);
    if (pairs.empty()) fail(ErrorCategory::data, "prepared training split has no pairs");
    std::vector<EncodedPair> encoded;
    encoded.reserve(pairs.size());
    for (const Pair& p : pairs) encoded.push_back(encode_pair(vocab, p));

    ModelParams params = init_params(mc, cfg.seeds.init);
    TrainConfig tc = to_train_config(cfg);

    detail::ensure_dir(out_dir);
    std::ofstream mask_stream;
    std::ostream* mask_log = nullptr;
    if (cfg.noise_mask_log) {
        mask_stream.open(paths::mask_log(out_dir), std::ios::binary);
        if (!mask_stream) fail(ErrorCategory::io, "cannot write mask log");
        mask_log = &mask_stream;
    }

    TrainResult result = train(params, mc, encoded, cfg.noise, tc, mask_log);

    save_params(paths::checkpoint(out_dir), params);
    save_model_config(paths::model_config(out_dir), mc);
    std::ofstream loss(paths::loss_csv(out_dir), std::ios::binary);
    if (!loss) fail(ErrorCategory::io, "cannot write loss CSV");
    loss << "epoch,loss\n" << std::setprecision(17);
    for (std::size_t i = 0; i < result.epoch_loss.size(); ++i) {
        loss << i + 1 << "," << result.epoch_loss[i] << "\n";
    }
    save_run_config(cfg, paths::config_echo(out_dir));
    return result;
}

// One greedy generation per test pair (siblings of one record share the
// description, hence the generation).
inline void cmd_generate(const RunConfig& cfg, const std::string& data_dir_in = "",
                         const std::string& out_dir_in = "") {
    validate_run_config(cfg);
    const std::string data_dir = data_dir_in.empty() ? cfg.out_dir : data_dir_in;
    const std::string out_dir = out_dir_in.empty() ? cfg.out_dir : out_dir_in;

    std::vector<Record> test_recs = read_records(paths::test_records(data_dir));
    Vocabulary vocab = load_vocab(paths::vocab(data_dir));
    ModelConfig mc = load_model_config(paths::model_config(out_dir));
    if (mc.vocab_size != vocab.size()) {
        fail(ErrorCategory::model, "checkpoint vocab size " + std::to_string(mc.vocab_size) +
                                   " does not match vocabulary of size " + std::to_string(vocab.size()));
    }
    ModelParams params = load_params(paths::checkpoint(out_dir), mc);

    std::vector<Pair> pairs = expand_pairs(test_recs);
    GenerationMap generations;
    std::map<std::string, std::string> per_record;
    for (const Record& rec : test_recs) {
        per_record[rec.id] = generate(params, mc, rec.description, vocab, cfg.gen);
    }
    for (const Pair& p : pairs) generations[{p.record_id, p.pair_index}] = per_record[p.record_id];
    write_generations(paths::generations(out_dir), pairs, generations);
}

inline std::unique_ptr<SentenceEmbeddingProvider> make_provider(const RunConfig& cfg,
                                                                const ModelParams& params,
                                                                const ModelConfig& mc,
                                                                const Vocabulary& vocab) {
    if (cfg.eval.provider == "external_vectors") {
        return std::make_unique<ExternalVectorsProvider>(cfg.eval.vectors);
    }
    return std::make_unique<ModelMeanPoolProvider>(params, mc, vocab);
}

// Scores the generations file against the test split and writes the
// six-column report (text + CSV).
inline EvalReport cmd_evaluate(const RunConfig& cfg, const std::string& data_dir_in = "",
                               const std::string& out_dir_in = "") {
    validate_run_config(cfg);
    const std::string data_dir = data_dir_in.empty() ? cfg.out_dir : data_dir_in;
    const std::string out_dir = out_dir_in.empty() ? cfg.out_dir : out_dir_in;

    std::vector<Record> test_recs = read_records(paths::test_records(data_dir));
    Vocabulary vocab = load_vocab(paths::vocab(data_dir));
    ModelConfig mc = load_model_config(paths::model_config(out_dir));
    ModelParams params = load_params(paths::checkpoint(out_dir), mc);
    GenerationMap generations = read_generations(paths::generations(out_dir));

    std::vector<Pair> pairs = expand_pairs(test_recs);
    auto provider = make_provider(cfg, params, mc, vocab);
    EvalReport report = evaluate(pairs, generations, *provider, cfg.eval.label,
                                 parse_ref_reduce(cfg.eval.ref_reduce));

    std::ofstream text(paths::report_text(out_dir), std::ios::binary);
    std::ofstream csv(paths::report_csv(out_dir), std::ios::binary);
    if (!text || !csv) fail(ErrorCategory::io, "cannot write evaluation report");
    write_eval_text(text, {report});
    write_eval_csv(csv, {report});
    return report;
}

struct AblationRow {
    double theta = 0.0;
    std::vector<EvalReport> replicates;
    EvalReport mean;
};

inline std::string ablation_label(double theta) {
    std::ostringstream out;
    out << "Noise " << theta * 100.0 << "%";
    return out.str();
}

// For each theta level, `replicates` isolated train/generate/evaluate runs
// under out_dir/ablate/, varying only the train seed; per-level means land
// in the ablation table.
inline std::vector<AblationRow> cmd_ablate(const RunConfig& cfg) {
    validate_run_config(cfg);
    const std::string data_dir = cfg.out_dir;

    std::vector<AblationRow> rows;
    for (std::size_t li = 0; li < cfg.ablate.levels.size(); ++li) {
        AblationRow row;
        row.theta = cfg.ablate.levels[li];
        for (int r = 0; r < cfg.ablate.replicates; ++r) {
            RunConfig run = cfg;
            run.noise.theta = row.theta;
            run.seeds.train = cfg.seeds.train + static_cast<std::uint64_t>(r);
            run.eval.label = ablation_label(row.theta) + " rep " + std::to_string(r);
            std::string sub = cfg.out_dir + "/ablate/level_" + std::to_string(li) + "_rep_" + std::to_string(r);
            detail::ensure_dir(sub);
            try {
                cmd_train(run, data_dir, sub);
                cmd_generate(run, data_dir, sub);
                row.replicates.push_back(cmd_evaluate(run, data_dir, sub));
            } catch (const Error& e) {
                fail(e.category(), "ablation level " + detail::format_double(row.theta) + " replicate " +
                                   std::to_string(r) + ": " + e.what());
            }
        }

        row.mean.label = ablation_label(row.theta);
        row.mean.sample_count = row.replicates.front().sample_count;
        double n = static_cast<double>(row.replicates.size());
        for (const EvalReport& rep : row.replicates) {
            row.mean.rouge1_desc += rep.rouge1_desc / n;
            row.mean.rouge1_ref += rep.rouge1_ref / n;
            row.mean.rougeL_desc += rep.rougeL_desc / n;
            row.mean.rougeL_ref += rep.rougeL_ref / n;
            row.mean.cosine_desc += rep.cosine_desc / n;
            row.mean.cosine_ref += rep.cosine_ref / n;
        }
        rows.push_back(std::move(row));
    }

    std::ofstream text(paths::ablation_text(cfg.out_dir), std::ios::binary);
    std::ofstream csv(paths::ablation_csv(cfg.out_dir), std::ios::binary);
    if (!text || !csv) fail(ErrorCategory::io, "cannot write ablation table");

    std::size_t label_w = 5;
    for (const AblationRow& row : rows) label_w = std::max(label_w, row.mean.label.size());
    text << "Replicates per level: " << cfg.ablate.replicates << "\n";
    text << std::left << std::setw(static_cast<int>(label_w + 2)) << "Level" << std::right
         << std::setw(10) << "Cos-Desc" << std::setw(10) << "Cos-Ref" << "\n";
    text << std::fixed << std::setprecision(4);
    for (const AblationRow& row : rows) {
        text << std::left << std::setw(static_cast<int>(label_w + 2)) << row.mean.label << std::right
             << std::setw(10) << row.mean.cosine_desc << std::setw(10) << row.mean.cosine_ref << "\n";
    }
    text.unsetf(std::ios::fixed);
    bool increasing = true;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].mean.cosine_desc < rows[i - 1].mean.cosine_desc) increasing = false;
    }
    text << "note: description-side cosine " << (increasing ? "increases" : "does not increase")
         << " monotonically across the listed noise levels\n";

    csv << "level,theta,replicates,samples";
    for (const char* name : eval_column_names()) csv << "," << name;
    csv << "\n" << std::setprecision(17);
    for (const AblationRow& row : rows) {
        csv << row.mean.label << "," << row.theta << "," << cfg.ablate.replicates << "," << row.mean.sample_count;
        for (double v : eval_columns(row.mean)) csv << "," << v;
        csv << "\n";
    }
    return rows;
}

inline PreferenceTable cmd_judge(const RunConfig& cfg, const std::string& judgments_path,
                                 const std::string& focal) {
    if (focal.empty()) fail(ErrorCategory::config, "judge needs a focal system label");
    std::vector<PairwiseJudgment> judgments = read_judgments(judgments_path);
    if (judgments.empty()) fail(ErrorCategory::data, "judgments file is empty: " + judgments_path);
    PreferenceTable table = aggregate_preferences(judgments, focal);

    detail::ensure_dir(cfg.out_dir);
    std::ofstream text(paths::preferences_text(cfg.out_dir), std::ios::binary);
    std::ofstream csv(paths::preferences_csv(cfg.out_dir), std::ios::binary);
    if (!text || !csv) fail(ErrorCategory::io, "cannot write preference table");
    write_preference_text(text, table);
    write_preference_csv(csv, table);
    return table;
}

inline std::vector<EvalReport> read_eval_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCategory::io, "cannot open report CSV: " + path);
    std::string line;
    if (!std::getline(in, line)) fail(ErrorCategory::parse, path + ": empty report CSV");
    std::vector<EvalReport> reports;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            auto comma = line.find(',', start);
            fields.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (fields.size() != 8) {
            fail(ErrorCategory::parse, path + ":" + std::to_string(line_no) + ": expected 8 columns, got " +
                                       std::to_string(fields.size()));
        }
        EvalReport r;
        r.label = fields[0];
        r.sample_count = static_cast<std::size_t>(detail::parse_int(fields[1], "samples"));
        r.rouge1_desc = detail::parse_double(fields[2], "rouge1_desc");
        r.rouge1_ref = detail::parse_double(fields[3], "rouge1_ref");
        r.rougeL_desc = detail::parse_double(fields[4], "rougeL_desc");
        r.rougeL_ref = detail::parse_double(fields[5], "rougeL_ref");
        r.cosine_desc = detail::parse_double(fields[6], "cosine_desc");
        r.cosine_ref = detail::parse_double(fields[7], "cosine_ref");
        reports.push_back(std::move(r));
    }
    return reports;
}

// Combines per-model report CSVs into one comparison table.
inline std::vector<EvalReport> cmd_report(const RunConfig& cfg, const std::vector<std::string>& csv_paths) {
    if (csv_paths.empty()) fail(ErrorCategory::config, "report needs at least one report CSV");
    std::vector<EvalReport> combined;
    for (const std::string& path : csv_paths) {
        for (EvalReport& r : read_eval_csv(path)) combined.push_back(std::move(r));
    }
    detail::ensure_dir(cfg.out_dir);
    std::ofstream text(paths::report_text(cfg.out_dir), std::ios::binary);
    std::ofstream csv(paths::report_csv(cfg.out_dir), std::ios::binary);
    if (!text || !csv) fail(ErrorCategory::io, "cannot write combined report");
    write_eval_text(text, combined);
    write_eval_csv(csv, combined);
    return combined;
}

} // namespace slogen
