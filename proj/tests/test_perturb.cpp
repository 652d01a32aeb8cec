#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "slogen/perturb.hpp"
#include "slogen/tensor.hpp"
#include "test_util.hpp"

using namespace slogen;
using Catch::Matchers::WithinAbs;

namespace {

TensorPtr filled(Shape shape, Rng& rng, bool requires_grad = false) {
    std::vector<double> values(Tensor::shape_numel(shape));
    for (double& v : values) v = rng.normal(0.0, 1.0);
    return Tensor::from(std::move(shape), std::move(values), requires_grad);
}

TensorPtr sum_all(Tape* tape, const TensorPtr& x) {
    int m = x->shape[0], n = x->shape[1];
    std::vector<double> lw(static_cast<std::size_t>(m)), rw(static_cast<std::size_t>(n));
    for (int i = 0; i < m; ++i) lw[static_cast<std::size_t>(i)] = 1.0 + 0.13 * i;
    for (int j = 0; j < n; ++j) rw[static_cast<std::size_t>(j)] = 1.0 - 0.07 * j;
    auto left = Tensor::from({1, m}, std::move(lw));
    auto right = Tensor::from({n, 1}, std::move(rw));
    return matmul(tape, matmul(tape, left, x), right);
}

} // namespace

TEST_CASE("noise config validation") {
    NoiseConfig ok;
    ok.theta = 0.5;
    REQUIRE_NOTHROW(validate_noise_config(ok));
    NoiseConfig bad_theta;
    bad_theta.theta = 1.5;
    REQUIRE_THROWS_AS(validate_noise_config(bad_theta), Error);
    bad_theta.theta = -0.1;
    REQUIRE_THROWS_AS(validate_noise_config(bad_theta), Error);
    NoiseConfig bad_sigma;
    bad_sigma.sigma = 0.0;
    REQUIRE_THROWS_AS(validate_noise_config(bad_sigma), Error);
}

TEST_CASE("sample_mask selects non-pad positions independently") {
    SECTION("degenerate thetas") {
        Rng rng(1);
        std::vector<bool> no_pads(8, false);
        NoiseMask none = sample_mask(8, no_pads, 0.0, rng);
        REQUIRE(none.draw_count == 0);
        REQUIRE(std::count(none.selected.begin(), none.selected.end(), true) == 0);

        NoiseMask all = sample_mask(8, no_pads, 1.0, rng);
        REQUIRE(all.draw_count == 8);
        REQUIRE(std::count(all.selected.begin(), all.selected.end(), true) == 8);
    }
    SECTION("pad positions are never selected") {
        Rng rng(2);
        std::vector<bool> pads = {true, false, false, true, false};
        NoiseMask mask = sample_mask(5, pads, 1.0, rng);
        REQUIRE(mask.draw_count == 3);
        REQUIRE_FALSE(mask.selected[0]);
        REQUIRE(mask.selected[1]);
        REQUIRE(mask.selected[2]);
        REQUIRE_FALSE(mask.selected[3]);
        REQUIRE(mask.selected[4]);
    }
    SECTION("pad positions consume no randomness") {
        Rng with_pads(3), plain(3);
        std::vector<bool> pads = {false, true, true, false};
        sample_mask(4, pads, 0.5, with_pads);
        plain.bernoulli(0.5);
        plain.bernoulli(0.5);
        REQUIRE(with_pads.next_u64() == plain.next_u64());
    }
    SECTION("selected fraction tracks theta") {
        Rng rng(4);
        const int n = 10000;
        std::vector<bool> no_pads(static_cast<std::size_t>(n), false);
        NoiseMask mask = sample_mask(n, no_pads, 0.75, rng);
        double fraction = static_cast<double>(mask.draw_count) / n;
        REQUIRE(fraction >= 0.73);
        REQUIRE(fraction <= 0.77);
    }
    SECTION("deterministic under a fixed seed") {
        std::vector<bool> no_pads(16, false);
        Rng a(5), b(5);
        NoiseMask ma = sample_mask(16, no_pads, 0.4, a);
        NoiseMask mb = sample_mask(16, no_pads, 0.4, b);
        REQUIRE(ma.selected == mb.selected);
        REQUIRE(ma.draw_count == mb.draw_count);
    }
    SECTION("preconditions") {
        Rng rng(6);
        std::vector<bool> pads(4, false);
        REQUIRE_THROWS_AS(sample_mask(4, pads, 1.5, rng), Error);
        REQUIRE_THROWS_AS(sample_mask(4, pads, -0.5, rng), Error);
        REQUIRE_THROWS_AS(sample_mask(5, pads, 0.5, rng), Error);
    }
}

TEST_CASE("sample_noise draws i.i.d. gaussians") {
    SECTION("empty draw keeps the column dimension") {
        Rng rng(7);
        auto noise = sample_noise(0, 16, 1.0, rng);
        REQUIRE(noise->shape == Shape{0, 16});
        REQUIRE(noise->numel() == 0);
    }
    SECTION("moments at sigma 1 over 100k coordinates") {
        Rng rng(8);
        auto noise = sample_noise(1000, 100, 1.0, rng);
        double sum = 0.0, sum_sq = 0.0;
        for (double v : noise->data) {
            sum += v;
            sum_sq += v * v;
        }
        double n = static_cast<double>(noise->numel());
        double mean = sum / n;
        double var = sum_sq / n - mean * mean;
        REQUIRE(mean >= -0.02);
        REQUIRE(mean <= 0.02);
        REQUIRE(var >= 0.98);
        REQUIRE(var <= 1.02);
    }
    SECTION("mean and sigma parameters shape the distribution") {
        Rng rng(9);
        auto noise = sample_noise(500, 100, 2.0, rng, 1.0);
        double sum = 0.0;
        for (double v : noise->data) sum += v;
        double mean = sum / static_cast<double>(noise->numel());
        double var = 0.0;
        for (double v : noise->data) var += (v - mean) * (v - mean);
        var /= static_cast<double>(noise->numel());
        REQUIRE_THAT(mean, WithinAbs(1.0, 0.05));
        REQUIRE_THAT(var, WithinAbs(4.0, 0.15));
    }
    SECTION("identical seeds give bit-identical tensors") {
        Rng a(10), b(10);
        auto na = sample_noise(8, 4, 0.3, a);
        auto nb = sample_noise(8, 4, 0.3, b);
        REQUIRE(na->data == nb->data);
    }
    SECTION("preconditions") {
        Rng rng(11);
        REQUIRE_THROWS_AS(sample_noise(-1, 4, 1.0, rng), Error);
        REQUIRE_THROWS_AS(sample_noise(2, 0, 1.0, rng), Error);
        REQUIRE_THROWS_AS(sample_noise(2, 4, 0.0, rng), Error);
    }
}

TEST_CASE("perturb_embeddings replaces selected rows only") {
    Rng rng(12);
    auto x = filled({4, 3}, rng);
    std::vector<double> original = x->data;

    NoiseMask mask;
    mask.length = 4;
    mask.selected = {false, true, false, true};
    mask.draw_count = 2;
    auto noise = filled({2, 3}, rng);

    SECTION("selected rows take noise rows in order, others are bit-identical") {
        auto out = perturb_embeddings(nullptr, x, mask, noise);
        for (int j = 0; j < 3; ++j) {
            REQUIRE(out->at(0, j) == x->at(0, j));
            REQUIRE(out->at(2, j) == x->at(2, j));
            REQUIRE(out->at(1, j) == noise->at(0, j));
            REQUIRE(out->at(3, j) == noise->at(1, j));
        }
        REQUIRE(x->data == original);
    }
    SECTION("empty mask is the identity on values") {
        NoiseMask empty;
        empty.length = 4;
        empty.selected.assign(4, false);
        Rng r2(13);
        auto out = perturb_embeddings(nullptr, x, empty, sample_noise(0, 3, 1.0, r2));
        REQUIRE(out->data == x->data);
        REQUIRE(out.get() != x.get());
    }
    SECTION("full mask ignores the input entirely") {
        NoiseMask full;
        full.length = 4;
        full.selected.assign(4, true);
        full.draw_count = 4;
        auto wide_noise = filled({4, 3}, rng);
        auto out = perturb_embeddings(nullptr, x, full, wide_noise);
        REQUIRE(out->data == wide_noise->data);
        auto different_input = filled({4, 3}, rng);
        auto out2 = perturb_embeddings(nullptr, different_input, full, wide_noise);
        REQUIRE(out2->data == out->data);
    }
    SECTION("shape contracts") {
        REQUIRE_THROWS_AS(perturb_embeddings(nullptr, x, mask, filled({1, 3}, rng)), Error);
        REQUIRE_THROWS_AS(perturb_embeddings(nullptr, x, mask, filled({2, 2}, rng)), Error);
        NoiseMask wrong_len = mask;
        wrong_len.length = 5;
        REQUIRE_THROWS_AS(perturb_embeddings(nullptr, x, wrong_len, noise), Error);
    }
}

TEST_CASE("perturbation gradients flow through unselected rows only") {
    Rng rng(14);
    auto x = filled({4, 3}, rng, true);
    auto noise = filled({2, 3}, rng, true);
    NoiseMask mask;
    mask.length = 4;
    mask.selected = {false, true, false, true};
    mask.draw_count = 2;

    SECTION("analytic routing") {
        x->zero_grad();
        noise->zero_grad();
        Tape tape;
        auto loss = sum_all(&tape, perturb_embeddings(&tape, x, mask, noise));
        tape.backward_from(loss);
        for (int j = 0; j < 3; ++j) {
            REQUIRE(x->grad[0 * 3 + static_cast<std::size_t>(j)] != 0.0);
            REQUIRE(x->grad[1 * 3 + static_cast<std::size_t>(j)] == 0.0);
            REQUIRE(x->grad[2 * 3 + static_cast<std::size_t>(j)] != 0.0);
            REQUIRE(x->grad[3 * 3 + static_cast<std::size_t>(j)] == 0.0);
            REQUIRE(noise->grad[0 * 3 + static_cast<std::size_t>(j)] != 0.0);
            REQUIRE(noise->grad[1 * 3 + static_cast<std::size_t>(j)] != 0.0);
        }
    }
    SECTION("finite differences") {
        auto report = testutil::finite_difference_check(
            {{"x", x}, {"noise", noise}}, [&](Tape* tape) {
                return sum_all(tape, perturb_embeddings(tape, x, mask, noise));
            });
        REQUIRE(report.max_rel_err < 1e-4);
    }
    SECTION("embedding table rows whose only occurrence was masked get zero grad") {
        auto table = filled({6, 3}, rng, true);
        table->zero_grad();
        std::vector<int> ids = {1, 1, 2, 3};
        NoiseMask m2;
        m2.length = 4;
        // token 3 fully masked; token 1 masked at one of two occurrences
        m2.selected = {true, false, false, true};
        m2.draw_count = 2;
        Rng nr(15);
        auto n2 = sample_noise(2, 3, 1.0, nr);
        Tape tape;
        auto looked_up = embedding_lookup(&tape, table, ids);
        auto loss = sum_all(&tape, perturb_embeddings(&tape, looked_up, m2, n2));
        tape.backward_from(loss);
        auto row_nonzero = [&](int r) {
            bool nz = false;
            for (int j = 0; j < 3; ++j) {
                nz = nz || table->grad[static_cast<std::size_t>(r) * 3 + static_cast<std::size_t>(j)] != 0.0;
            }
            return nz;
        };
        REQUIRE(row_nonzero(1));       // surviving occurrence at position 1
        REQUIRE(row_nonzero(2));       // never masked
        REQUIRE_FALSE(row_nonzero(3)); // only occurrence replaced by noise
        REQUIRE_FALSE(row_nonzero(0)); // never looked up
    }
}

TEST_CASE("apply_noise composes the phase gate, mask, and noise") {
    Rng init(16);
    auto x = filled({6, 5}, init, true);
    std::vector<bool> no_pads(6, false);

    SECTION("eval phase returns the very same tensor") {
        NoiseConfig cfg;
        cfg.theta = 0.75;
        Rng rng(17);
        ApplyResult res = apply_noise(nullptr, x, no_pads, cfg, Phase::eval, rng);
        REQUIRE(res.embedded.get() == x.get());
        REQUIRE(res.mask.draw_count == 0);
    }
    SECTION("train with theta 0 preserves all values") {
        NoiseConfig cfg;
        cfg.theta = 0.0;
        Rng rng(18);
        ApplyResult res = apply_noise(nullptr, x, no_pads, cfg, Phase::train, rng);
        REQUIRE(res.embedded->data == x->data);
    }
    SECTION("train is deterministic under a fixed seed") {
        NoiseConfig cfg;
        cfg.theta = 0.75;
        Rng a(19), b(19);
        ApplyResult ra = apply_noise(nullptr, x, no_pads, cfg, Phase::train, a);
        ApplyResult rb = apply_noise(nullptr, x, no_pads, cfg, Phase::train, b);
        REQUIRE(ra.embedded->data == rb.embedded->data);
        REQUIRE(ra.mask.selected == rb.mask.selected);
    }
    SECTION("pads survive even at theta 1") {
        NoiseConfig cfg;
        cfg.theta = 1.0;
        std::vector<bool> pads = {true, false, false, false, false, true};
        Rng rng(20);
        ApplyResult res = apply_noise(nullptr, x, pads, cfg, Phase::train, rng);
        for (int j = 0; j < 5; ++j) {
            REQUIRE(res.embedded->at(0, j) == x->at(0, j));
            REQUIRE(res.embedded->at(5, j) == x->at(5, j));
        }
        REQUIRE(res.mask.draw_count == 4);
        for (int i = 1; i < 5; ++i) {
            bool row_differs = false;
            for (int j = 0; j < 5; ++j) row_differs = row_differs || res.embedded->at(i, j) != x->at(i, j);
            REQUIRE(row_differs);
        }
    }
    SECTION("bad config is rejected in both phases") {
        NoiseConfig cfg;
        cfg.theta = 2.0;
        Rng rng(21);
        REQUIRE_THROWS_AS(apply_noise(nullptr, x, no_pads, cfg, Phase::train, rng), Error);
        REQUIRE_THROWS_AS(apply_noise(nullptr, x, no_pads, cfg, Phase::eval, rng), Error);
    }
    SECTION("replacement moments match the configured sigma") {
        NoiseConfig cfg;
        cfg.theta = 1.0;
        cfg.sigma = 0.7;
        Rng init2(22);
        auto big = filled({1000, 100}, init2);
        std::vector<bool> pads(1000, false);
        Rng rng(23);
        ApplyResult res = apply_noise(nullptr, big, pads, cfg, Phase::train, rng);
        double sum = 0.0, sum_sq = 0.0;
        for (double v : res.embedded->data) {
            sum += v;
            sum_sq += v * v;
        }
        double n = static_cast<double>(res.embedded->numel());
        double mean = sum / n;
        double var = sum_sq / n - mean * mean;
        REQUIRE_THAT(mean, WithinAbs(0.0, 3.0 * 0.7 / std::sqrt(n) + 1e-12));
        REQUIRE_THAT(var, WithinAbs(0.49, 0.01));
    }
}
