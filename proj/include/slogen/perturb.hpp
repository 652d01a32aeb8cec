// Training-time embedding perturbation. Each non-pad input position is
// independently selected with probability theta, and a selected position has
// its entire embedding row replaced (not offset) by i.i.d. Gaussian draws.
// Unselected rows pass through bit-identically and keep their gradient path;
// replaced rows block the gradient to the embedding table, since the table
// values no longer influence the output there. Perturbation applies only in
// the training phase; evaluation is always the identity.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "slogen/error.hpp"
#include "slogen/rng.hpp"
#include "slogen/tensor.hpp"

namespace slogen {

enum class Phase { train, eval };

struct NoiseConfig {
    double theta = 0.0; // selection probability per non-pad position
    double sigma = 1.0; // stddev of each replacement coordinate
    double mean = 0.0;
    std::uint64_t seed = 0;
};

inline void validate_noise_config(const NoiseConfig& cfg) {
    if (cfg.theta < 0.0 || cfg.theta > 1.0) {
        fail(ErrorCategory::config, "noise theta must lie in [0,1], got " + std::to_string(cfg.theta));
    }
    if (cfg.sigma <= 0.0) {
        fail(ErrorCategory::config, "noise sigma must be positive, got " + std::to_string(cfg.sigma));
    }
}

struct NoiseMask {
    int length = 0;
    std::vector<bool> selected;
    int draw_count = 0;
};

// Visits positions in ascending order; every non-pad position consumes one
// Bernoulli draw, pad positions consume nothing and are never selected.
inline NoiseMask sample_mask(int length, const std::vector<bool>& pad_positions, double theta, Rng& rng) {
    if (theta < 0.0 || theta > 1.0) {
        fail(ErrorCategory::config, "noise theta must lie in [0,1], got " + std::to_string(theta));
    }
    if (length < 0 || static_cast<int>(pad_positions.size()) != length) {
        fail(ErrorCategory::model, "pad mask must have " + std::to_string(length) + " entries, got " +
                                   std::to_string(pad_positions.size()));
    }
    NoiseMask mask;
    mask.length = length;
    mask.selected.assign(static_cast<std::size_t>(length), false);
    for (int i = 0; i < length; ++i) {
        if (pad_positions[static_cast<std::size_t>(i)]) continue;
        if (rng.bernoulli(theta)) {
            mask.selected[static_cast<std::size_t>(i)] = true;
            ++mask.draw_count;
        }
    }
    return mask;
}

// i.i.d. Gaussian entries in row-major order, mean `mean`, stddev `sigma`.
inline TensorPtr sample_noise(int count, int dim, double sigma, Rng& rng, double mean = 0.0) {
    if (count < 0 || dim < 1) {
        fail(ErrorCategory::model, "sample_noise needs count >= 0 and dim >= 1");
    }
    if (sigma <= 0.0) {
        fail(ErrorCategory::config, "noise sigma must be positive, got " + std::to_string(sigma));
    }
    auto out = Tensor::zeros({count, dim});
    for (std::size_t i = 0; i < out->data.size(); ++i) out->data[i] = rng.normal(mean, sigma);
    return out;
}

// x_emb: [L, d] token embeddings before positional encoding. Selected rows
// become the noise rows in position order; unselected rows are copied
// bit-identically. The input is never mutated.
inline TensorPtr perturb_embeddings(Tape* tape, const TensorPtr& x_emb, const NoiseMask& mask,
                                    const TensorPtr& noise) {
    if (x_emb->shape.size() != 2) {
        fail(ErrorCategory::model, "perturb_embeddings expects [len, dim], got " + shape_str(x_emb->shape));
    }
    int L = x_emb->shape[0], d = x_emb->shape[1];
    if (mask.length != L) {
        fail(ErrorCategory::model, "noise mask length " + std::to_string(mask.length) +
                                   " does not match sequence length " + std::to_string(L));
    }
    if (noise->shape.size() != 2 || noise->shape[0] != mask.draw_count || noise->shape[1] != d) {
        fail(ErrorCategory::model, "noise tensor " + shape_str(noise->shape) + " does not match " +
                                   std::to_string(mask.draw_count) + " selected rows of width " + std::to_string(d));
    }

    auto out = Tensor::zeros(x_emb->shape);
    out->data = x_emb->data;
    int row = 0;
    for (int i = 0; i < L; ++i) {
        if (!mask.selected[static_cast<std::size_t>(i)]) continue;
        std::size_t dst = static_cast<std::size_t>(i) * static_cast<std::size_t>(d);
        std::size_t src = static_cast<std::size_t>(row) * static_cast<std::size_t>(d);
        for (int j = 0; j < d; ++j) out->data[dst + static_cast<std::size_t>(j)] = noise->data[src + static_cast<std::size_t>(j)];
        ++row;
    }

    out->requires_grad = x_emb->requires_grad || noise->requires_grad;
    if (tape && out->requires_grad) {
        auto selected = mask.selected;
        tape->record({x_emb, noise}, out, [x_emb, noise, out, selected, L, d] {
            if (x_emb->requires_grad) x_emb->ensure_grad();
            if (noise->requires_grad) noise->ensure_grad();
            int row = 0;
            for (int i = 0; i < L; ++i) {
                std::size_t base = static_cast<std::size_t>(i) * static_cast<std::size_t>(d);
                if (selected[static_cast<std::size_t>(i)]) {
                    if (noise->requires_grad) {
                        std::size_t nbase = static_cast<std::size_t>(row) * static_cast<std::size_t>(d);
                        for (int j = 0; j < d; ++j) {
                            noise->grad[nbase + static_cast<std::size_t>(j)] += out->grad[base + static_cast<std::size_t>(j)];
                        }
                    }
                    ++row;
                } else if (x_emb->requires_grad) {
                    for (int j = 0; j < d; ++j) {
                        x_emb->grad[base + static_cast<std::size_t>(j)] += out->grad[base + static_cast<std::size_t>(j)];
                    }
                }
            }
        });
    }
    return out;
}

struct ApplyResult {
    TensorPtr embedded;
    NoiseMask mask;
};

// Full composition with the phase gate: eval returns the input untouched
// (same tensor, so bit-exact by construction); train samples a fresh mask
// and fresh noise from the caller's rng stream.
inline ApplyResult apply_noise(Tape* tape, const TensorPtr& x_emb,
                               const std::vector<bool>& pad_positions, const NoiseConfig& cfg,
                               Phase phase, Rng& rng) {
    validate_noise_config(cfg);
    if (x_emb->shape.size() != 2) {
        fail(ErrorCategory::model, "apply_noise expects [len, dim], got " + shape_str(x_emb->shape));
    }
    if (phase == Phase::eval) {
        ApplyResult res;
        res.embedded = x_emb;
        res.mask.length = x_emb->shape[0];
        res.mask.selected.assign(static_cast<std::size_t>(x_emb->shape[0]), false);
        return res;
    }
    ApplyResult res;
    res.mask = sample_mask(x_emb->shape[0], pad_positions, cfg.theta, rng);
    TensorPtr noise = sample_noise(res.mask.draw_count, x_emb->shape[1], cfg.sigma, rng, cfg.mean);
    res.embedded = perturb_embeddings(tape, x_emb, res.mask, noise);
    return res;
}

} // namespace slogen
