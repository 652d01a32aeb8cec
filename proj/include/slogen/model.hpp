// Desk-scale transformer family for description-to-slogan generation.
// Two topologies share one parameter/ops vocabulary: an encoder-decoder
// stack and a decoder-only causal stack over [description, target]. Blocks
// are pre-layer-norm with GELU feed-forwards, positions come from a fixed
// sinusoidal table, and embedding perturbation is composed between the
// source-token lookup and the network during training only.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "slogen/adam.hpp"
#include "slogen/checkpoint.hpp"
#include "slogen/corpus.hpp"
#include "slogen/error.hpp"
#include "slogen/perturb.hpp"
#include "slogen/rng.hpp"
#include "slogen/tensor.hpp"

namespace slogen {

enum class ModelVariant { encoder_decoder, decoder_only };
enum class FreezePolicy { none, freeze_encoder_keep_embeddings };

inline std::string to_string(ModelVariant v) {
    return v == ModelVariant::encoder_decoder ? "encoder_decoder" : "decoder_only";
}

inline std::string to_string(FreezePolicy p) {
    return p == FreezePolicy::none ? "none" : "freeze_encoder_keep_embeddings";
}

inline ModelVariant parse_variant(const std::string& s) {
    if (s == "encoder_decoder") return ModelVariant::encoder_decoder;
    if (s == "decoder_only") return ModelVariant::decoder_only;
    fail(ErrorCategory::config, "unknown model variant '" + s + "'");
}

inline FreezePolicy parse_freeze_policy(const std::string& s) {
    if (s == "none") return FreezePolicy::none;
    if (s == "freeze_encoder_keep_embeddings") return FreezePolicy::freeze_encoder_keep_embeddings;
    fail(ErrorCategory::config, "unknown freeze policy '" + s + "'");
}

struct ModelConfig {
    ModelVariant variant = ModelVariant::encoder_decoder;
    int d_model = 32;
    int n_heads = 2;
    int n_enc_layers = 2;
    int n_dec_layers = 2;
    int d_ff = 64;
    int max_len = 64;
    int vocab_size = 0;
    FreezePolicy freeze_policy = FreezePolicy::none;
};

inline void validate_model_config(const ModelConfig& c) {
    if (c.d_model <= 0 || c.n_heads <= 0 || c.n_dec_layers <= 0 || c.d_ff <= 0 || c.max_len <= 0) {
        fail(ErrorCategory::config, "model dimensions must be positive");
    }
    if (c.variant == ModelVariant::encoder_decoder && c.n_enc_layers <= 0) {
        fail(ErrorCategory::config, "encoder_decoder variant needs n_enc_layers >= 1");
    }
    if (c.d_model % c.n_heads != 0) {
        fail(ErrorCategory::config, "d_model " + std::to_string(c.d_model) +
                                    " not divisible by n_heads " + std::to_string(c.n_heads));
    }
    if (c.vocab_size < static_cast<int>(special_tokens().size())) {
        fail(ErrorCategory::config, "vocab_size must cover the special tokens, got " +
                                    std::to_string(c.vocab_size));
    }
    if (c.freeze_policy == FreezePolicy::freeze_encoder_keep_embeddings &&
        c.variant != ModelVariant::encoder_decoder) {
        fail(ErrorCategory::config, "freeze_encoder_keep_embeddings requires the encoder_decoder variant");
    }
}

struct ModelParams {
    std::vector<std::pair<std::string, TensorPtr>> named;
    std::map<std::string, std::size_t> index;

    void add(const std::string& name, TensorPtr t) {
        if (index.count(name)) fail(ErrorCategory::model, "duplicate parameter name '" + name + "'");
        index.emplace(name, named.size());
        named.emplace_back(name, std::move(t));
    }

    const TensorPtr& at(const std::string& name) const {
        auto it = index.find(name);
        if (it == index.end()) fail(ErrorCategory::model, "unknown parameter '" + name + "'");
        return named[it->second].second;
    }

    std::vector<std::pair<std::string, TensorPtr>> trainable() const {
        std::vector<std::pair<std::string, TensorPtr>> out;
        for (const auto& [name, t] : named) {
            if (t->requires_grad) out.emplace_back(name, t);
        }
        return out;
    }

    void zero_grads() {
        for (auto& [name, t] : named) t->zero_grad();
    }
};

namespace detail {

inline TensorPtr gaussian_init(Shape shape, Rng& rng, double stddev = 0.02) {
    auto t = Tensor::zeros(std::move(shape), true);
    for (double& v : t->data) v = rng.normal(0.0, stddev);
    return t;
}

inline TensorPtr ones_init(int n) {
    auto t = Tensor::zeros({n}, true);
    std::fill(t->data.begin(), t->data.end(), 1.0);
    return t;
}

inline TensorPtr sinusoidal_table(int max_len, int d_model) {
    auto t = Tensor::zeros({max_len, d_model}, false);
    for (int pos = 0; pos < max_len; ++pos) {
        for (int i = 0; i < d_model; i += 2) {
            double angle = pos / std::pow(10000.0, static_cast<double>(i) / d_model);
            t->at(pos, i) = std::sin(angle);
            if (i + 1 < d_model) t->at(pos, i + 1) = std::cos(angle);
        }
    }
    return t;
}

inline void add_layer_norm_params(ModelParams& p, const std::string& prefix, int d) {
    p.add(prefix + ".gain", ones_init(d));
    p.add(prefix + ".bias", Tensor::zeros({d}, true));
}

inline void add_attention_params(ModelParams& p, const std::string& prefix, int d, Rng& rng) {
    p.add(prefix + ".wq", gaussian_init({d, d}, rng));
    p.add(prefix + ".wk", gaussian_init({d, d}, rng));
    p.add(prefix + ".wv", gaussian_init({d, d}, rng));
    p.add(prefix + ".wo", gaussian_init({d, d}, rng));
}

inline void add_ffn_params(ModelParams& p, const std::string& prefix, int d, int d_ff, Rng& rng) {
    p.add(prefix + ".w1", gaussian_init({d, d_ff}, rng));
    p.add(prefix + ".b1", Tensor::zeros({d_ff}, true));
    p.add(prefix + ".w2", gaussian_init({d_ff, d}, rng));
    p.add(prefix + ".b2", Tensor::zeros({d}, true));
}

} // namespace detail

// Deterministic initialization: Gaussian(0, 0.02^2) for projection and
// embedding weights, ones/zeros for layer-norm affines, fixed (non-learned)
// sinusoidal positional table. Construction order is part of the contract
// so a given (config, seed) is bit-reproducible.
inline ModelParams init_params(const ModelConfig& c, std::uint64_t seed) {
    validate_model_config(c);
    Rng rng(seed);
    ModelParams p;
    p.add("embedding.table", detail::gaussian_init({c.vocab_size, c.d_model}, rng));
    p.add("pos.table", detail::sinusoidal_table(c.max_len, c.d_model));
    if (c.variant == ModelVariant::encoder_decoder) {
        for (int i = 0; i < c.n_enc_layers; ++i) {
            std::string l = "enc." + std::to_string(i);
            detail::add_layer_norm_params(p, l + ".ln1", c.d_model);
            detail::add_attention_params(p, l + ".attn", c.d_model, rng);
            detail::add_layer_norm_params(p, l + ".ln2", c.d_model);
            detail::add_ffn_params(p, l + ".ffn", c.d_model, c.d_ff, rng);
        }
        detail::add_layer_norm_params(p, "enc.final_ln", c.d_model);
        for (int i = 0; i < c.n_dec_layers; ++i) {
            std::string l = "dec." + std::to_string(i);
            detail::add_layer_norm_params(p, l + ".ln1", c.d_model);
            detail::add_attention_params(p, l + ".self", c.d_model, rng);
            detail::add_layer_norm_params(p, l + ".ln2", c.d_model);
            detail::add_attention_params(p, l + ".cross", c.d_model, rng);
            detail::add_layer_norm_params(p, l + ".ln3", c.d_model);
            detail::add_ffn_params(p, l + ".ffn", c.d_model, c.d_ff, rng);
        }
    } else {
        for (int i = 0; i < c.n_dec_layers; ++i) {
            std::string l = "dec." + std::to_string(i);
            detail::add_layer_norm_params(p, l + ".ln1", c.d_model);
            detail::add_attention_params(p, l + ".self", c.d_model, rng);
            detail::add_layer_norm_params(p, l + ".ln2", c.d_model);
            detail::add_ffn_params(p, l + ".ffn", c.d_model, c.d_ff, rng);
        }
    }
    detail::add_layer_norm_params(p, "dec.final_ln", c.d_model);
    p.add("out.w", detail::gaussian_init({c.d_model, c.vocab_size}, rng));
    p.add("out.b", Tensor::zeros({c.vocab_size}, true));
    return p;
}

namespace detail {

inline constexpr double kMaskedScore = -1e30;

// Multi-head scaled dot-product attention. Heads are column slices of the
// projected Q/K/V; `causal` restricts query i to keys j <= i and is only
// meaningful for self-attention (equal query/key lengths).
inline TensorPtr attention(Tape* tape, const ModelParams& p, const std::string& prefix,
                           const TensorPtr& q_in, const TensorPtr& kv_in, int n_heads, bool causal) {
    int d = q_in->shape[1];
    int dk = d / n_heads;
    TensorPtr q = matmul(tape, q_in, p.at(prefix + ".wq"));
    TensorPtr k = matmul(tape, kv_in, p.at(prefix + ".wk"));
    TensorPtr v = matmul(tape, kv_in, p.at(prefix + ".wv"));
    int lq = q->shape[0], lk = k->shape[0];

    std::vector<double> mask;
    if (causal) {
        mask.assign(static_cast<std::size_t>(lq) * static_cast<std::size_t>(lk), 0.0);
        for (int i = 0; i < lq; ++i) {
            for (int j = i + 1; j < lk; ++j) {
                mask[static_cast<std::size_t>(i) * static_cast<std::size_t>(lk) + static_cast<std::size_t>(j)] = kMaskedScore;
            }
        }
    }

    std::vector<TensorPtr> heads;
    heads.reserve(static_cast<std::size_t>(n_heads));
    for (int h = 0; h < n_heads; ++h) {
        TensorPtr qh = slice_cols(tape, q, h * dk, (h + 1) * dk);
        TensorPtr kh = slice_cols(tape, k, h * dk, (h + 1) * dk);
        TensorPtr vh = slice_cols(tape, v, h * dk, (h + 1) * dk);
        TensorPtr scores = scale(tape, matmul(tape, qh, transpose(tape, kh)), 1.0 / std::sqrt(static_cast<double>(dk)));
        if (causal) scores = add_constant(tape, scores, mask);
        TensorPtr probs = softmax(tape, scores, -1);
        heads.push_back(matmul(tape, probs, vh));
    }
    TensorPtr ctx = n_heads == 1 ? heads[0] : concat_cols(tape, heads);
    return matmul(tape, ctx, p.at(prefix + ".wo"));
}

inline TensorPtr feed_forward(Tape* tape, const ModelParams& p, const std::string& prefix, const TensorPtr& x) {
    TensorPtr h = add_row_bias(tape, matmul(tape, x, p.at(prefix + ".w1")), p.at(prefix + ".b1"));
    h = gelu(tape, h);
    return add_row_bias(tape, matmul(tape, h, p.at(prefix + ".w2")), p.at(prefix + ".b2"));
}

inline TensorPtr ln(Tape* tape, const ModelParams& p, const std::string& prefix, const TensorPtr& x) {
    return layer_norm(tape, x, p.at(prefix + ".gain"), p.at(prefix + ".bias"));
}

inline TensorPtr add_positions(Tape* tape, const ModelParams& p, const TensorPtr& x, int from) {
    TensorPtr pos = slice_rows(nullptr, p.at("pos.table"), from, from + x->shape[0]);
    return add(tape, x, pos);
}

inline void check_ids(const std::vector<int>& ids, const ModelConfig& c, const char* which) {
    if (ids.empty()) fail(ErrorCategory::model, std::string(which) + " sequence is empty");
    for (int id : ids) {
        if (id < 0 || id >= c.vocab_size) {
            fail(ErrorCategory::model, std::string(which) + " token id " + std::to_string(id) +
                                       " out of range for vocab " + std::to_string(c.vocab_size));
        }
    }
}

inline std::vector<bool> pad_flags(const std::vector<int>& ids) {
    std::vector<bool> flags(ids.size(), false);
    for (std::size_t i = 0; i < ids.size(); ++i) flags[i] = ids[i] == Vocabulary::kPad;
    return flags;
}

} // namespace detail

// Encoder stack over already-embedded inputs (perturbation, if any, happens
// before this call). Returns final-normed hidden states [L_src, d].
inline TensorPtr encoder_stack(Tape* tape, const ModelParams& p, const ModelConfig& c, TensorPtr x) {
    for (int i = 0; i < c.n_enc_layers; ++i) {
        std::string l = "enc." + std::to_string(i);
        TensorPtr normed = detail::ln(tape, p, l + ".ln1", x);
        x = add(tape, x, detail::attention(tape, p, l + ".attn", normed, normed, c.n_heads, false));
        x = add(tape, x, detail::feed_forward(tape, p, l + ".ffn", detail::ln(tape, p, l + ".ln2", x)));
    }
    return detail::ln(tape, p, "enc.final_ln", x);
}

struct ForwardResult {
    TensorPtr logits; // [len(tgt_ids), vocab]
    NoiseMask src_mask;
};

// src_ids: full encoded description [BOS ... EOS]. tgt_ids: decoder input
// (BOS-prefixed target prefix). Row i of the logits predicts the token that
// follows tgt_ids[i]. Perturbation applies to the source token embeddings
// only, before positional encoding, and only when phase == train.
inline ForwardResult forward(Tape* tape, const ModelParams& p, const ModelConfig& c,
                             const std::vector<int>& src_ids, const std::vector<int>& tgt_ids,
                             const NoiseConfig& noise, Phase phase, Rng& rng) {
    validate_model_config(c);
    detail::check_ids(src_ids, c, "source");
    detail::check_ids(tgt_ids, c, "target");

    ForwardResult res;
    if (c.variant == ModelVariant::encoder_decoder) {
        if (static_cast<int>(src_ids.size()) > c.max_len || static_cast<int>(tgt_ids.size()) > c.max_len) {
            fail(ErrorCategory::model, "sequence exceeds max_len " + std::to_string(c.max_len));
        }
        TensorPtr src_emb = embedding_lookup(tape, p.at("embedding.table"), src_ids);
        ApplyResult perturbed = apply_noise(tape, src_emb, detail::pad_flags(src_ids), noise, phase, rng);
        res.src_mask = perturbed.mask;
        TensorPtr enc_x = detail::add_positions(tape, p, perturbed.embedded, 0);
        TensorPtr enc_out = encoder_stack(tape, p, c, enc_x);

        TensorPtr x = detail::add_positions(tape, p, embedding_lookup(tape, p.at("embedding.table"), tgt_ids), 0);
        for (int i = 0; i < c.n_dec_layers; ++i) {
            std::string l = "dec." + std::to_string(i);
            TensorPtr normed = detail::ln(tape, p, l + ".ln1", x);
            x = add(tape, x, detail::attention(tape, p, l + ".self", normed, normed, c.n_heads, true));
            x = add(tape, x, detail::attention(tape, p, l + ".cross", detail::ln(tape, p, l + ".ln2", x),
                                               enc_out, c.n_heads, false));
            x = add(tape, x, detail::feed_forward(tape, p, l + ".ffn", detail::ln(tape, p, l + ".ln3", x)));
        }
        x = detail::ln(tape, p, "dec.final_ln", x);
        res.logits = add_row_bias(tape, matmul(tape, x, p.at("out.w")), p.at("out.b"));
        return res;
    }

    // Decoder-only: one causal stack over [src, tgt]; the source's EOS acts
    // as the separator. Logits cover the tgt rows only. Perturbation
    // eligibility is restricted to the source span.
    std::vector<int> full = src_ids;
    full.insert(full.end(), tgt_ids.begin(), tgt_ids.end());
    if (static_cast<int>(full.size()) > c.max_len) {
        fail(ErrorCategory::model, "sequence exceeds max_len " + std::to_string(c.max_len));
    }
    int ls = static_cast<int>(src_ids.size());
    std::vector<bool> excluded = detail::pad_flags(full);
    for (std::size_t i = static_cast<std::size_t>(ls); i < full.size(); ++i) excluded[i] = true;

    TensorPtr emb = embedding_lookup(tape, p.at("embedding.table"), full);
    ApplyResult perturbed = apply_noise(tape, emb, excluded, noise, phase, rng);
    res.src_mask = perturbed.mask;
    TensorPtr x = detail::add_positions(tape, p, perturbed.embedded, 0);
    for (int i = 0; i < c.n_dec_layers; ++i) {
        std::string l = "dec." + std::to_string(i);
        TensorPtr normed = detail::ln(tape, p, l + ".ln1", x);
        x = add(tape, x, detail::attention(tape, p, l + ".self", normed, normed, c.n_heads, true));
        x = add(tape, x, detail::feed_forward(tape, p, l + ".ffn", detail::ln(tape, p, l + ".ln2", x)));
    }
    x = detail::ln(tape, p, "dec.final_ln", x);
    x = slice_rows(tape, x, ls, static_cast<int>(full.size()));
    res.logits = add_row_bias(tape, matmul(tape, x, p.at("out.w")), p.at("out.b"));
    return res;
}

struct EncodedPair {
    std::vector<int> src; // [BOS, description..., EOS]
    std::vector<int> tgt; // [BOS, slogan..., EOS]
};

inline EncodedPair encode_pair(const Vocabulary& vocab, const Pair& pair) {
    EncodedPair e;
    e.src = encode(pair.description, vocab);
    e.tgt = encode(pair.slogan, vocab);
    return e;
}

struct SequenceLossInfo {
    NoiseMask src_mask;
    std::size_t target_tokens = 0;
};

// Teacher-forced cross entropy for one pair: the decoder consumes
// tgt[0..n-2] and is scored against tgt[1..n-1].
inline TensorPtr sequence_loss(Tape* tape, const ModelParams& p, const ModelConfig& c,
                               const EncodedPair& pair, const NoiseConfig& noise, Phase phase,
                               Rng& rng, SequenceLossInfo* info = nullptr) {
    if (pair.tgt.size() < 2) fail(ErrorCategory::model, "target sequence needs at least 2 tokens");
    std::vector<int> dec_in(pair.tgt.begin(), pair.tgt.end() - 1);
    std::vector<int> labels(pair.tgt.begin() + 1, pair.tgt.end());
    ForwardResult f = forward(tape, p, c, pair.src, dec_in, noise, phase, rng);
    std::vector<bool> label_pad = detail::pad_flags(labels);
    if (info) {
        info->src_mask = f.src_mask;
        info->target_tokens = 0;
        for (bool b : label_pad) {
            if (!b) ++info->target_tokens;
        }
    }
    return cross_entropy(tape, f.logits, labels, label_pad);
}

// Token-weighted mean over the batch, so a batch of identical pairs scores
// the same as one pair and concatenating batches preserves the global mean.
inline TensorPtr batch_loss(Tape* tape, const ModelParams& p, const ModelConfig& c,
                            const std::vector<EncodedPair>& batch, const NoiseConfig& noise,
                            Phase phase, Rng& rng,
                            std::vector<SequenceLossInfo>* infos = nullptr) {
    if (batch.empty()) fail(ErrorCategory::training, "loss requires a non-empty batch");
    std::vector<TensorPtr> losses;
    std::vector<double> tokens;
    losses.reserve(batch.size());
    tokens.reserve(batch.size());
    double total = 0.0;
    for (const EncodedPair& pair : batch) {
        SequenceLossInfo info;
        losses.push_back(sequence_loss(tape, p, c, pair, noise, phase, rng, &info));
        tokens.push_back(static_cast<double>(info.target_tokens));
        total += static_cast<double>(info.target_tokens);
        if (infos) infos->push_back(info);
    }
    for (double& w : tokens) w /= total;
    return linear_combination(tape, losses, tokens);
}

// Marks encoder-layer tensors non-trainable. The embedding table is shared
// with the decoder and keeps updating, which is the point of the policy.
inline void apply_freeze_policy(ModelParams& p, const ModelConfig& c) {
    if (c.freeze_policy != FreezePolicy::freeze_encoder_keep_embeddings) return;
    for (auto& [name, t] : p.named) {
        if (name.rfind("enc.", 0) == 0) t->requires_grad = false;
    }
}

struct TrainConfig {
    AdamConfig adam;
    int batch_size = 4;
    int epochs = 10;
    std::uint64_t seed = 0; // train seed: shuffling + noise stream
};

struct TrainResult {
    std::vector<double> epoch_loss;
    long steps = 0;
};

// Epoch-shuffled mini-batch training with a fresh noise mask per sequence
// per step. Per-epoch loss is the token-weighted mean over the epoch's
// batches. mask_log, when set, receives one line per perturbed sequence:
// "step<TAB>sequence<TAB>positions" (comma-separated, "-" when empty).
inline TrainResult train(ModelParams& p, const ModelConfig& c, const std::vector<EncodedPair>& pairs,
                         const NoiseConfig& noise, const TrainConfig& tc,
                         std::ostream* mask_log = nullptr) {
    validate_model_config(c);
    validate_noise_config(noise);
    if (pairs.empty()) fail(ErrorCategory::training, "training set is empty");
    if (tc.batch_size < 1) fail(ErrorCategory::config, "batch_size must be >= 1");
    if (tc.epochs < 1) fail(ErrorCategory::config, "epochs must be >= 1");

    apply_freeze_policy(p, c);
    auto trainable = p.trainable();
    Adam opt(tc.adam);
    Rng shuffle_rng(mix_seed(tc.seed, 0x73687566666c65ULL));
    Rng noise_rng(mix_seed(noise.seed, tc.seed));

    TrainResult result;
    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_numer = 0.0, epoch_denom = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(tc.batch_size)) {
            std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(tc.batch_size));
            std::vector<EncodedPair> batch;
            batch.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) batch.push_back(pairs[order[i]]);

            p.zero_grads();
            Tape tape;
            std::vector<SequenceLossInfo> infos;
            TensorPtr loss = batch_loss(&tape, p, c, batch, noise, Phase::train, noise_rng, &infos);
            if (!std::isfinite(loss->data[0])) {
                fail(ErrorCategory::training, "non-finite loss at step " + std::to_string(result.steps + 1));
            }
            tape.backward_from(loss);
            opt.step(trainable);
            ++result.steps;

            double batch_tokens = 0.0;
            for (const SequenceLossInfo& info : infos) batch_tokens += static_cast<double>(info.target_tokens);
            epoch_numer += loss->data[0] * batch_tokens;
            epoch_denom += batch_tokens;

            if (mask_log) {
                for (std::size_t i = 0; i < infos.size(); ++i) {
                    *mask_log << result.steps << "\t" << i << "\t";
                    const NoiseMask& m = infos[i].src_mask;
                    bool first = true;
                    for (int pos = 0; pos < m.length; ++pos) {
                        if (!m.selected[static_cast<std::size_t>(pos)]) continue;
                        if (!first) *mask_log << ",";
                        *mask_log << pos;
                        first = false;
                    }
                    if (first) *mask_log << "-";
                    *mask_log << "\n";
                }
            }
        }
        result.epoch_loss.push_back(epoch_numer / epoch_denom);
    }
    return result;
}

struct GenerationConfig {
    int max_new_tokens = 24;
};

inline void validate_generation_config(const GenerationConfig& g) {
    if (g.max_new_tokens < 1) fail(ErrorCategory::config, "max_new_tokens must be >= 1");
}

namespace detail {

inline int argmax_lowest(const TensorPtr& logits, int row) {
    int v = logits->shape[1];
    int best = 0;
    double best_val = logits->at(row, 0);
    for (int j = 1; j < v; ++j) {
        if (logits->at(row, j) > best_val) {
            best_val = logits->at(row, j);
            best = j;
        }
    }
    return best;
}

} // namespace detail

// Greedy decoding from BOS until EOS or the token budget, ties broken by
// lowest token index. Overlong descriptions are truncated to the model's
// capacity so generation never fails. Perturbation never applies here.
inline std::string generate(const ModelParams& p, const ModelConfig& c, const std::string& description,
                            const Vocabulary& vocab, const GenerationConfig& gen) {
    validate_model_config(c);
    validate_generation_config(gen);
    std::vector<int> src = encode(description, vocab);

    int src_budget = c.variant == ModelVariant::encoder_decoder ? c.max_len : c.max_len - 2;
    if (src_budget < 3) fail(ErrorCategory::config, "max_len too small to generate from");
    if (static_cast<int>(src.size()) > src_budget) {
        src.resize(static_cast<std::size_t>(src_budget - 1));
        src.push_back(Vocabulary::kEos);
    }

    NoiseConfig no_noise;
    Rng rng(0);
    std::vector<int> dec{Vocabulary::kBos};
    while (static_cast<int>(dec.size()) - 1 < gen.max_new_tokens) {
        if (c.variant == ModelVariant::encoder_decoder) {
            if (static_cast<int>(dec.size()) >= c.max_len) break;
        } else {
            if (static_cast<int>(src.size() + dec.size()) >= c.max_len) break;
        }
        ForwardResult f = forward(nullptr, p, c, src, dec, no_noise, Phase::eval, rng);
        int next = detail::argmax_lowest(f.logits, f.logits->shape[0] - 1);
        if (next == Vocabulary::kEos) break;
        dec.push_back(next);
    }
    return decode(dec, vocab);
}

// Hidden states used by the mean-pool sentence-embedding provider: the
// encoder stack's final-normed output for encoder-decoder models, the causal
// stack's final-normed output for decoder-only models.
inline TensorPtr sentence_hidden_states(const ModelParams& p, const ModelConfig& c,
                                        const std::vector<int>& ids) {
    validate_model_config(c);
    detail::check_ids(ids, c, "sentence");
    if (static_cast<int>(ids.size()) > c.max_len) {
        fail(ErrorCategory::model, "sequence exceeds max_len " + std::to_string(c.max_len));
    }
    TensorPtr x = detail::add_positions(nullptr, p, embedding_lookup(nullptr, p.at("embedding.table"), ids), 0);
    if (c.variant == ModelVariant::encoder_decoder) {
        return encoder_stack(nullptr, p, c, x);
    }
    for (int i = 0; i < c.n_dec_layers; ++i) {
        std::string l = "dec." + std::to_string(i);
        TensorPtr normed = detail::ln(nullptr, p, l + ".ln1", x);
        x = add(nullptr, x, detail::attention(nullptr, p, l + ".self", normed, normed, c.n_heads, true));
        x = add(nullptr, x, detail::feed_forward(nullptr, p, l + ".ffn", detail::ln(nullptr, p, l + ".ln2", x)));
    }
    return detail::ln(nullptr, p, "dec.final_ln", x);
}

// ---------------------------------------------------------------------------
// Persistence: checkpoint (binary, bit-exact) + plain-text config sidecar.
// ---------------------------------------------------------------------------

inline void save_model_config(const std::string& path, const ModelConfig& c) {
    std::ofstream out(path);
    if (!out) fail(ErrorCategory::io, "cannot open model config for writing: " + path);
    out << "variant=" << to_string(c.variant) << "\n"
        << "d_model=" << c.d_model << "\n"
        << "n_heads=" << c.n_heads << "\n"
        << "n_enc_layers=" << c.n_enc_layers << "\n"
        << "n_dec_layers=" << c.n_dec_layers << "\n"
        << "d_ff=" << c.d_ff << "\n"
        << "max_len=" << c.max_len << "\n"
        << "vocab_size=" << c.vocab_size << "\n"
        << "freeze_policy=" << to_string(c.freeze_policy) << "\n";
    if (!out) fail(ErrorCategory::io, "failed writing model config: " + path);
}

inline ModelConfig load_model_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCategory::io, "cannot open model config: " + path);
    ModelConfig c;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            fail(ErrorCategory::parse, path + ":" + std::to_string(line_no) + ": expected key=value");
        }
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        try {
            if (key == "variant") c.variant = parse_variant(value);
            else if (key == "d_model") c.d_model = std::stoi(value);
            else if (key == "n_heads") c.n_heads = std::stoi(value);
            else if (key == "n_enc_layers") c.n_enc_layers = std::stoi(value);
            else if (key == "n_dec_layers") c.n_dec_layers = std::stoi(value);
            else if (key == "d_ff") c.d_ff = std::stoi(value);
            else if (key == "max_len") c.max_len = std::stoi(value);
            else if (key == "vocab_size") c.vocab_size = std::stoi(value);
            else if (key == "freeze_policy") c.freeze_policy = parse_freeze_policy(value);
            else fail(ErrorCategory::parse, path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
        } catch (const std::invalid_argument&) {
            fail(ErrorCategory::parse, path + ":" + std::to_string(line_no) + ": bad integer '" + value + "'");
        }
    }
    validate_model_config(c);
    return c;
}

inline void save_params(const std::string& path, const ModelParams& p) {
    save_checkpoint(path, p.named);
}

inline ModelParams load_params(const std::string& path, const ModelConfig& c) {
    auto entries = load_checkpoint(path);
    ModelParams p = init_params(c, 0);
    if (entries.size() != p.named.size()) {
        fail(ErrorCategory::io, "checkpoint has " + std::to_string(entries.size()) +
                                " arrays, config expects " + std::to_string(p.named.size()));
    }
    for (auto& [name, t] : p.named) {
        auto it = entries.find(name);
        if (it == entries.end()) fail(ErrorCategory::io, "checkpoint missing parameter '" + name + "'");
        if (it->second.shape != t->shape) {
            fail(ErrorCategory::io, "checkpoint parameter '" + name + "' has shape " +
                                    shape_str(it->second.shape) + ", config expects " + shape_str(t->shape));
        }
        t->data = std::move(it->second.data);
    }
    return p;
}

} // namespace slogen
