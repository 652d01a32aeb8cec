// Adam optimizer with bias correction. Moment state is keyed by parameter
// name so checkpoint round-trips and freeze policies stay stable across runs.
#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "slogen/error.hpp"
#include "slogen/tensor.hpp"

namespace slogen {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    explicit Adam(AdamConfig cfg) : cfg_(cfg) {
        if (cfg_.lr <= 0.0) fail(ErrorCategory::config, "optimizer learning rate must be positive");
        if (cfg_.beta1 < 0.0 || cfg_.beta1 >= 1.0 || cfg_.beta2 < 0.0 || cfg_.beta2 >= 1.0) {
            fail(ErrorCategory::config, "optimizer betas must lie in [0,1)");
        }
        if (cfg_.eps <= 0.0) fail(ErrorCategory::config, "optimizer eps must be positive");
    }

    const AdamConfig& config() const { return cfg_; }
    long step_count() const { return step_; }

    // Applies one update to every named parameter. Parameters whose grad was
    // never touched this step are treated as having zero gradient (their
    // moments still decay). Non-finite gradients abort with the offending
    // parameter named.
    void step(const std::vector<std::pair<std::string, TensorPtr>>& params) {
        ++step_;
        double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
        double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
        for (const auto& [name, p] : params) {
            Moments& mom = state_[name];
            if (mom.m.size() != p->data.size()) {
                mom.m.assign(p->data.size(), 0.0);
                mom.v.assign(p->data.size(), 0.0);
            }
            bool has_grad = !p->grad.empty();
            for (std::size_t i = 0; i < p->data.size(); ++i) {
                double g = has_grad ? p->grad[i] : 0.0;
                if (!std::isfinite(g)) {
                    fail(ErrorCategory::training,
                         "non-finite gradient in parameter '" + name + "' at step " + std::to_string(step_));
                }
                mom.m[i] = cfg_.beta1 * mom.m[i] + (1.0 - cfg_.beta1) * g;
                mom.v[i] = cfg_.beta2 * mom.v[i] + (1.0 - cfg_.beta2) * g * g;
                double m_hat = mom.m[i] / c1;
                double v_hat = mom.v[i] / c2;
                p->data[i] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
            }
        }
    }

private:
    struct Moments {
        std::vector<double> m;
        std::vector<double> v;
    };
    AdamConfig cfg_;
    long step_ = 0;
    std::map<std::string, Moments> state_;
};

} // namespace slogen
