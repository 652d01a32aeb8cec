// Dense 64-bit tensors with tape-based reverse-mode differentiation.
// Ops are free functions taking a Tape*; passing nullptr runs the forward
// computation without recording anything. A node is recorded only when the
// result requires grad, and backward walks the tape in reverse order.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "slogen/error.hpp"

namespace slogen {

using Shape = std::vector<int>;

inline std::string shape_str(const Shape& shape) {
    std::ostringstream out;
    out << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << ",";
        out << shape[i];
    }
    out << "]";
    return out.str();
}

struct Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

struct Tensor {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad; // empty until a backward pass touches it

    std::size_t numel() const { return data.size(); }

    int rows() const { return shape.empty() ? 1 : shape[0]; }
    int cols() const { return shape.size() < 2 ? 1 : shape[1]; }

    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols()) + static_cast<std::size_t>(c)]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols()) + static_cast<std::size_t>(c)]; }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }

    void zero_grad() { grad.clear(); }

    static std::size_t shape_numel(const Shape& shape) {
        std::size_t n = 1;
        for (int d : shape) {
            if (d < 0) fail(ErrorCategory::model, "tensor dimensions must be non-negative, got " + shape_str(shape));
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }

    static TensorPtr zeros(Shape shape, bool requires_grad = false) {
        auto t = std::make_shared<Tensor>();
        std::size_t n = shape_numel(shape);
        t->shape = std::move(shape);
        t->data.assign(n, 0.0);
        t->requires_grad = requires_grad;
        return t;
    }

    static TensorPtr from(Shape shape, std::vector<double> values, bool requires_grad = false) {
        std::size_t n = shape_numel(shape);
        if (values.size() != n) {
            fail(ErrorCategory::model, "tensor data length " + std::to_string(values.size()) +
                                       " does not match shape " + shape_str(shape));
        }
        auto t = std::make_shared<Tensor>();
        t->shape = std::move(shape);
        t->data = std::move(values);
        t->requires_grad = requires_grad;
        return t;
    }

    static TensorPtr scalar(double value, bool requires_grad = false) {
        return from({1}, {value}, requires_grad);
    }
};

class Tape {
public:
    void record(std::vector<TensorPtr> parents, TensorPtr out, std::function<void()> backward) {
        nodes_.push_back(Node{std::move(parents), std::move(out), std::move(backward)});
    }

    std::size_t size() const { return nodes_.size(); }

    const std::vector<TensorPtr>& parents_of(std::size_t i) const { return nodes_[i].parents; }

    // Seeds d(loss)/d(loss) = 1 and accumulates gradients in reverse
    // recording order. Grads are accumulated, not reset; callers zero
    // parameter grads between steps.
    void backward_from(const TensorPtr& loss) {
        if (loss->numel() != 1) {
            fail(ErrorCategory::model, "backward requires a scalar loss, got shape " + shape_str(loss->shape));
        }
        loss->ensure_grad();
        loss->grad[0] += 1.0;
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            if (it->out->grad.empty()) continue; // not on the path to the loss
            it->backward();
        }
    }

private:
    struct Node {
        std::vector<TensorPtr> parents;
        TensorPtr out;
        std::function<void()> backward;
    };
    std::vector<Node> nodes_;
};

namespace detail {

inline bool any_requires_grad(std::initializer_list<const TensorPtr*> ts) {
    for (const TensorPtr* t : ts) {
        if ((*t)->requires_grad) return true;
    }
    return false;
}

inline void require_2d(const TensorPtr& t, const char* op) {
    if (t->shape.size() != 2) {
        fail(ErrorCategory::model, std::string(op) + " expects a 2-d tensor, got " + shape_str(t->shape));
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// Ops
// ---------------------------------------------------------------------------

inline TensorPtr matmul(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
    detail::require_2d(a, "matmul");
    detail::require_2d(b, "matmul");
    if (a->shape[1] != b->shape[0]) {
        fail(ErrorCategory::model,
             "matmul shape mismatch: " + shape_str(a->shape) + " x " + shape_str(b->shape));
    }
    int m = a->shape[0], k = a->shape[1], n = b->shape[1];
    auto out = Tensor::zeros({m, n});
    for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
            double av = a->at(i, p);
            if (av == 0.0) continue;
            for (int j = 0; j < n; ++j) out->at(i, j) += av * b->at(p, j);
        }
    }
    out->requires_grad = detail::any_requires_grad({&a, &b});
    if (tape && out->requires_grad) {
        tape->record({a, b}, out, [a, b, out, m, k, n] {
            if (a->requires_grad) {
                a->ensure_grad();
                for (int i = 0; i < m; ++i) {
                    for (int j = 0; j < n; ++j) {
                        double g = out->grad[static_cast<std::size_t>(i) * n + j];
                        if (g == 0.0) continue;
                        for (int p = 0; p < k; ++p) {
                            a->grad[static_cast<std::size_t>(i) * k + p] += g * b->at(p, j);
                        }
                    }
                }
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (int i = 0; i < m; ++i) {
                    for (int p = 0; p < k; ++p) {
                        double av = a->at(i, p);
                        if (av == 0.0) continue;
                        for (int j = 0; j < n; ++j) {
                            b->grad[static_cast<std::size_t>(p) * n + j] +=
                                av * out->grad[static_cast<std::size_t>(i) * n + j];
                        }
                    }
                }
            }
        });
    }
    return out;
}

inline TensorPtr transpose(Tape* tape, const TensorPtr& a) {
    detail::require_2d(a, "transpose");
    int m = a->shape[0], n = a->shape[1];
    auto out = Tensor::zeros({n, m});
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) out->at(j, i) = a->at(i, j);
    }
    out->requires_grad = a->requires_grad;
    if (tape && out->requires_grad) {
        tape->record({a}, out, [a, out, m, n] {
            a->ensure_grad();
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < n; ++j) {
                    a->grad[static_cast<std::size_t>(i) * n + j] +=
                        out->grad[static_cast<std::size_t>(j) * m + i];
                }
            }
        });
    }
    return out;
}

inline TensorPtr add(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
    if (a->shape != b->shape) {
        fail(ErrorCategory::model, "add shape mismatch: " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    }
    auto out = Tensor::zeros(a->shape);
    for (std::size_t i = 0; i < out->data.size(); ++i) out->data[i] = a->data[i] + b->data[i];
    out->requires_grad = detail::any_requires_grad({&a, &b});
    if (tape && out->requires_grad) {
        tape->record({a, b}, out, [a, b, out] {
            if (a->requires_grad) {
                a->ensure_grad();
                for (std::size_t i = 0; i < out->grad.size(); ++i) a->grad[i] += out->grad[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (std::size_t i = 0; i < out->grad.size(); ++i) b->grad[i] += out->grad[i];
            }
        });
    }
    return out;
}

// Adds a length-n bias vector to every row of x[m,n].
inline TensorPtr add_row_bias(Tape* tape, const TensorPtr& x, const TensorPtr& bias) {
    detail::require_2d(x, "add_row_bias");
    if (bias->shape.size() != 1 || bias->shape[0] != x->shape[1]) {
        fail(ErrorCategory::model,
             "bias shape " + shape_str(bias->shape) + " does not match rows of " + shape_str(x->shape));
    }
    int m = x->shape[0], n = x->shape[1];
    auto out = Tensor::zeros(x->shape);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) out->at(i, j) = x->at(i, j) + bias->data[static_cast<std::size_t>(j)];
    }
    out->requires_grad = detail::any_requires_grad({&x, &bias});
    if (tape && out->requires_grad) {
        tape->record({x, bias}, out, [x, bias, out, m, n] {
            if (x->requires_grad) {
                x->ensure_grad();
                for (std::size_t i = 0; i < out->grad.size(); ++i) x->grad[i] += out->grad[i];
            }
            if (bias->requires_grad) {
                bias->ensure_grad();
                for (int i = 0; i < m; ++i) {
                    for (int j = 0; j < n; ++j) {
                        bias->grad[static_cast<std::size_t>(j)] += out->grad[static_cast<std::size_t>(i) * n + j];
                    }
                }
            }
        });
    }
    return out;
}

inline TensorPtr scale(Tape* tape, const TensorPtr& x, double factor) {
    auto out = Tensor::zeros(x->shape);
    for (std::size_t i = 0; i < out->data.size(); ++i) out->data[i] = x->data[i] * factor;
    out->requires_grad = x->requires_grad;
    if (tape && out->requires_grad) {
        tape->record({x}, out, [x, out, factor] {
            x->ensure_grad();
            for (std::size_t i = 0; i < out->grad.size(); ++i) x->grad[i] += factor * out->grad[i];
        });
    }
    return out;
}

// x + mask where mask is plain data (no gradient); used for additive
// attention masks.
inline TensorPtr add_constant(Tape* tape, const TensorPtr& x, const std::vector<double>& mask) {
    if (mask.size() != x->data.size()) {
        fail(ErrorCategory::model, "additive mask size " + std::to_string(mask.size()) +
                                   " does not match tensor " + shape_str(x->shape));
    }
    auto out = Tensor::zeros(x->shape);
    for (std::size_t i = 0; i < out->data.size(); ++i) out->data[i] = x->data[i] + mask[i];
    out->requires_grad = x->requires_grad;
    if (tape && out->requires_grad) {
        tape->record({x}, out, [x, out] {
            x->ensure_grad();
            for (std::size_t i = 0; i < out->grad.size(); ++i) x->grad[i] += out->grad[i];
        });
    }
    return out;
}

// Exact (erf-based) GELU; smooth everywhere, which keeps finite-difference
// checks clean.
inline TensorPtr gelu(Tape* tape, const TensorPtr& x) {
    static constexpr double kInvSqrt2 = 0.70710678118654752440;
    static constexpr double kInvSqrt2Pi = 0.39894228040143267794;
    auto out = Tensor::zeros(x->shape);
    for (std::size_t i = 0; i < out->data.size(); ++i) {
        double v = x->data[i];
        out->data[i] = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
    }
    out->requires_grad = x->requires_grad;
    if (tape && out->requires_grad) {
        tape->record({x}, out, [x, out] {
            x->ensure_grad();
            for (std::size_t i = 0; i < out->grad.size(); ++i) {
                double v = x->data[i];
                double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
                double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
                x->grad[i] += out->grad[i] * (cdf + v * pdf);
            }
        });
    }
    return out;
}

// Softmax along `axis` (negative counts from the end), max-subtracted.
inline TensorPtr softmax(Tape* tape, const TensorPtr& x, int axis = -1) {
    int rank = static_cast<int>(x->shape.size());
    if (axis < 0) axis += rank;
    if (axis < 0 || axis >= rank) {
        fail(ErrorCategory::model, "softmax axis out of range for shape " + shape_str(x->shape));
    }
    std::size_t n = static_cast<std::size_t>(x->shape[static_cast<std::size_t>(axis)]);
    std::size_t inner = 1, outer = 1;
    for (int i = axis + 1; i < rank; ++i) inner *= static_cast<std::size_t>(x->shape[static_cast<std::size_t>(i)]);
    for (int i = 0; i < axis; ++i) outer *= static_cast<std::size_t>(x->shape[static_cast<std::size_t>(i)]);

    auto out = Tensor::zeros(x->shape);
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
            std::size_t base = o * n * inner + in;
            double mx = x->data[base];
            for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, x->data[base + i * inner]);
            double sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double e = std::exp(x->data[base + i * inner] - mx);
                out->data[base + i * inner] = e;
                sum += e;
            }
            for (std::size_t i = 0; i < n; ++i) out->data[base + i * inner] /= sum;
        }
    }
    out->requires_grad = x->requires_grad;
    if (tape && out->requires_grad) {
        tape->record({x}, out, [x, out, n, inner, outer] {
            x->ensure_grad();
            for (std::size_t o = 0; o < outer; ++o) {
                for (std::size_t in = 0; in < inner; ++in) {
                    std::size_t base = o * n * inner + in;
                    double dot = 0.0;
                    for (std::size_t i = 0; i < n; ++i) {
                        dot += out->grad[base + i * inner] * out->data[base + i * inner];
                    }
                    for (std::size_t i = 0; i < n; ++i) {
                        std::size_t k = base + i * inner;
                        x->grad[k] += out->data[k] * (out->grad[k] - dot);
                    }
                }
            }
        });
    }
    return out;
}

// Normalizes the last axis to zero mean / unit (population) variance, then
// applies the gain/bias affine.
inline TensorPtr layer_norm(Tape* tape, const TensorPtr& x, const TensorPtr& gain,
                            const TensorPtr& bias, double eps = 1e-5) {
    if (x->shape.empty()) fail(ErrorCategory::model, "layer_norm needs at least rank 1");
    if (eps <= 0.0) fail(ErrorCategory::model, "layer_norm eps must be positive");
    std::size_t n = static_cast<std::size_t>(x->shape.back());
    if (gain->shape.size() != 1 || static_cast<std::size_t>(gain->shape[0]) != n ||
        bias->shape.size() != 1 || static_cast<std::size_t>(bias->shape[0]) != n) {
        fail(ErrorCategory::model, "layer_norm affine shape mismatch for " + shape_str(x->shape));
    }
    std::size_t rows = x->numel() / n;
    auto out = Tensor::zeros(x->shape);
    // cache x-hat and 1/stddev per row for the backward pass
    auto xhat = std::make_shared<std::vector<double>>(x->numel());
    auto inv_std = std::make_shared<std::vector<double>>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        std::size_t base = r * n;
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += x->data[base + i];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double d = x->data[base + i] - mean;
            var += d * d;
        }
        var /= static_cast<double>(n);
        double w = 1.0 / std::sqrt(var + eps);
        (*inv_std)[r] = w;
        for (std::size_t i = 0; i < n; ++i) {
            double h = (x->data[base + i] - mean) * w;
            (*xhat)[base + i] = h;
            out->data[base + i] = gain->data[i] * h + bias->data[i];
        }
    }
    out->requires_grad = detail::any_requires_grad({&x, &gain, &bias});
    if (tape && out->requires_grad) {
        tape->record({x, gain, bias}, out, [x, gain, bias, out, xhat, inv_std, rows, n] {
            for (std::size_t r = 0; r < rows; ++r) {
                std::size_t base = r * n;
                if (gain->requires_grad) {
                    gain->ensure_grad();
                    for (std::size_t i = 0; i < n; ++i) {
                        gain->grad[i] += out->grad[base + i] * (*xhat)[base + i];
                    }
                }
                if (bias->requires_grad) {
                    bias->ensure_grad();
                    for (std::size_t i = 0; i < n; ++i) bias->grad[i] += out->grad[base + i];
                }
                if (x->requires_grad) {
                    x->ensure_grad();
                    double mean_h = 0.0, mean_hx = 0.0;
                    for (std::size_t i = 0; i < n; ++i) {
                        double h = gain->data[i] * out->grad[base + i];
                        mean_h += h;
                        mean_hx += h * (*xhat)[base + i];
                    }
                    mean_h /= static_cast<double>(n);
                    mean_hx /= static_cast<double>(n);
                    for (std::size_t i = 0; i < n; ++i) {
                        double h = gain->data[i] * out->grad[base + i];
                        x->grad[base + i] +=
                            (*inv_std)[r] * (h - mean_h - (*xhat)[base + i] * mean_hx);
                    }
                }
            }
        });
    }
    return out;
}

// Gathers rows of table[V,d]; gradients flow only into the looked-up rows.
inline TensorPtr embedding_lookup(Tape* tape, const TensorPtr& table, const std::vector<int>& ids) {
    detail::require_2d(table, "embedding_lookup");
    int V = table->shape[0], d = table->shape[1];
    for (int id : ids) {
        if (id < 0 || id >= V) {
            fail(ErrorCategory::model,
                 "embedding id " + std::to_string(id) + " out of range [0," + std::to_string(V) + ")");
        }
    }
    if (ids.empty()) fail(ErrorCategory::model, "embedding_lookup needs at least one id");
    int L = static_cast<int>(ids.size());
    auto out = Tensor::zeros({L, d});
    for (int i = 0; i < L; ++i) {
        for (int j = 0; j < d; ++j) out->at(i, j) = table->at(ids[static_cast<std::size_t>(i)], j);
    }
    out->requires_grad = table->requires_grad;
    if (tape && out->requires_grad) {
        auto ids_copy = ids;
        tape->record({table}, out, [table, out, ids_copy, d] {
            table->ensure_grad();
            for (std::size_t i = 0; i < ids_copy.size(); ++i) {
                std::size_t src = i * static_cast<std::size_t>(d);
                std::size_t dst = static_cast<std::size_t>(ids_copy[i]) * static_cast<std::size_t>(d);
                for (int j = 0; j < d; ++j) table->grad[dst + static_cast<std::size_t>(j)] += out->grad[src + static_cast<std::size_t>(j)];
            }
        });
    }
    return out;
}

// Mean negative log-likelihood over non-pad target positions.
inline TensorPtr cross_entropy(Tape* tape, const TensorPtr& logits, const std::vector<int>& targets,
                               const std::vector<bool>& target_is_pad) {
    detail::require_2d(logits, "cross_entropy");
    int L = logits->shape[0], V = logits->shape[1];
    if (static_cast<int>(targets.size()) != L || static_cast<int>(target_is_pad.size()) != L) {
        fail(ErrorCategory::model, "cross_entropy targets/mask must have " + std::to_string(L) + " entries");
    }
    std::size_t n_active = 0;
    for (int i = 0; i < L; ++i) {
        if (target_is_pad[static_cast<std::size_t>(i)]) continue;
        ++n_active;
        int t = targets[static_cast<std::size_t>(i)];
        if (t < 0 || t >= V) {
            fail(ErrorCategory::model,
                 "cross_entropy target " + std::to_string(t) + " out of range [0," + std::to_string(V) + ")");
        }
    }
    if (n_active == 0) fail(ErrorCategory::model, "cross_entropy: every target position is padding");

    auto probs = std::make_shared<std::vector<double>>(logits->data.size(), 0.0);
    double total = 0.0;
    for (int i = 0; i < L; ++i) {
        if (target_is_pad[static_cast<std::size_t>(i)]) continue;
        std::size_t base = static_cast<std::size_t>(i) * static_cast<std::size_t>(V);
        double mx = logits->data[base];
        for (int v = 1; v < V; ++v) mx = std::max(mx, logits->data[base + static_cast<std::size_t>(v)]);
        double sum = 0.0;
        for (int v = 0; v < V; ++v) {
            double e = std::exp(logits->data[base + static_cast<std::size_t>(v)] - mx);
            (*probs)[base + static_cast<std::size_t>(v)] = e;
            sum += e;
        }
        for (int v = 0; v < V; ++v) (*probs)[base + static_cast<std::size_t>(v)] /= sum;
        double log_z = mx + std::log(sum);
        total += log_z - logits->data[base + static_cast<std::size_t>(targets[static_cast<std::size_t>(i)])];
    }
    auto out = Tensor::scalar(total / static_cast<double>(n_active));
    out->requires_grad = logits->requires_grad;
    if (tape && out->requires_grad) {
        auto targets_copy = targets;
        auto pad_copy = target_is_pad;
        tape->record({logits}, out, [logits, out, probs, targets_copy, pad_copy, L, V, n_active] {
            logits->ensure_grad();
            double g = out->grad[0] / static_cast<double>(n_active);
            for (int i = 0; i < L; ++i) {
                if (pad_copy[static_cast<std::size_t>(i)]) continue;
                std::size_t base = static_cast<std::size_t>(i) * static_cast<std::size_t>(V);
                for (int v = 0; v < V; ++v) {
                    double p = (*probs)[base + static_cast<std::size_t>(v)];
                    double indicator = v == targets_copy[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
                    logits->grad[base + static_cast<std::size_t>(v)] += g * (p - indicator);
                }
            }
        });
    }
    return out;
}

inline TensorPtr concat_rows(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
    detail::require_2d(a, "concat_rows");
    detail::require_2d(b, "concat_rows");
    if (a->shape[1] != b->shape[1]) {
        fail(ErrorCategory::model,
             "concat_rows column mismatch: " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    }
    int ma = a->shape[0], mb = b->shape[0], n = a->shape[1];
    auto out = Tensor::zeros({ma + mb, n});
    std::copy(a->data.begin(), a->data.end(), out->data.begin());
    std::copy(b->data.begin(), b->data.end(), out->data.begin() + static_cast<std::ptrdiff_t>(a->data.size()));
    out->requires_grad = detail::any_requires_grad({&a, &b});
    if (tape && out->requires_grad) {
        tape->record({a, b}, out, [a, b, out] {
            std::size_t na = a->data.size();
            if (a->requires_grad) {
                a->ensure_grad();
                for (std::size_t i = 0; i < na; ++i) a->grad[i] += out->grad[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (std::size_t i = 0; i < b->data.size(); ++i) b->grad[i] += out->grad[na + i];
            }
        });
    }
    return out;
}

inline TensorPtr slice_rows(Tape* tape, const TensorPtr& x, int from, int to) {
    detail::require_2d(x, "slice_rows");
    if (from < 0 || to > x->shape[0] || from >= to) {
        fail(ErrorCategory::model, "slice_rows [" + std::to_string(from) + "," + std::to_string(to) +
                                   ") invalid for " + shape_str(x->shape));
    }
    int n = x->shape[1];
    auto out = Tensor::zeros({to - from, n});
    std::copy(x->data.begin() + static_cast<std::ptrdiff_t>(from) * n,
              x->data.begin() + static_cast<std::ptrdiff_t>(to) * n, out->data.begin());
    out->requires_grad = x->requires_grad;
    if (tape && out->requires_grad) {
        tape->record({x}, out, [x, out, from, n] {
            x->ensure_grad();
            std::size_t offset = static_cast<std::size_t>(from) * static_cast<std::size_t>(n);
            for (std::size_t i = 0; i < out->grad.size(); ++i) x->grad[offset + i] += out->grad[i];
        });
    }
    return out;
}

inline TensorPtr slice_cols(Tape* tape, const TensorPtr& x, int from, int to) {
    detail::require_2d(x, "slice_cols");
    if (from < 0 || to > x->shape[1] || from >= to) {
        fail(ErrorCategory::model, "slice_cols [" + std::to_string(from) + "," + std::to_string(to) +
                                   ") invalid for " + shape_str(x->shape));
    }
    int m = x->shape[0], n = x->shape[1], w = to - from;
    auto out = Tensor::zeros({m, w});
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < w; ++j) out->at(i, j) = x->at(i, from + j);
    }
    out->requires_grad = x->requires_grad;
    if (tape && out->requires_grad) {
        tape->record({x}, out, [x, out, from, m, n, w] {
            x->ensure_grad();
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < w; ++j) {
                    x->grad[static_cast<std::size_t>(i) * n + from + j] +=
                        out->grad[static_cast<std::size_t>(i) * w + j];
                }
            }
        });
    }
    return out;
}

inline TensorPtr concat_cols(Tape* tape, const std::vector<TensorPtr>& parts) {
    if (parts.empty()) fail(ErrorCategory::model, "concat_cols needs at least one tensor");
    int m = parts[0]->shape[0];
    int total = 0;
    for (const TensorPtr& p : parts) {
        detail::require_2d(p, "concat_cols");
        if (p->shape[0] != m) {
            fail(ErrorCategory::model, "concat_cols row mismatch: " + shape_str(p->shape));
        }
        total += p->shape[1];
    }
    auto out = Tensor::zeros({m, total});
    int col = 0;
    for (const TensorPtr& p : parts) {
        int w = p->shape[1];
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < w; ++j) out->at(i, col + j) = p->at(i, j);
        }
        col += w;
    }
    bool rg = false;
    for (const TensorPtr& p : parts) rg = rg || p->requires_grad;
    out->requires_grad = rg;
    if (tape && out->requires_grad) {
        tape->record(parts, out, [parts, out, m, total] {
            int col = 0;
            for (const TensorPtr& p : parts) {
                int w = p->shape[1];
                if (p->requires_grad) {
                    p->ensure_grad();
                    for (int i = 0; i < m; ++i) {
                        for (int j = 0; j < w; ++j) {
                            p->grad[static_cast<std::size_t>(i) * w + j] +=
                                out->grad[static_cast<std::size_t>(i) * total + col + j];
                        }
                    }
                }
                col += w;
            }
        });
    }
    return out;
}

// sum_i weights[i] * scalars[i]; used to combine per-sequence losses into a
// token-weighted batch mean.
inline TensorPtr linear_combination(Tape* tape, const std::vector<TensorPtr>& scalars,
                                    const std::vector<double>& weights) {
    if (scalars.empty() || scalars.size() != weights.size()) {
        fail(ErrorCategory::model, "linear_combination needs matching non-empty scalars and weights");
    }
    double total = 0.0;
    bool rg = false;
    for (std::size_t i = 0; i < scalars.size(); ++i) {
        if (scalars[i]->numel() != 1) {
            fail(ErrorCategory::model, "linear_combination expects scalars, got " + shape_str(scalars[i]->shape));
        }
        total += weights[i] * scalars[i]->data[0];
        rg = rg || scalars[i]->requires_grad;
    }
    auto out = Tensor::scalar(total);
    out->requires_grad = rg;
    if (tape && out->requires_grad) {
        auto w = weights;
        tape->record(scalars, out, [scalars, out, w] {
            for (std::size_t i = 0; i < scalars.size(); ++i) {
                if (!scalars[i]->requires_grad) continue;
                scalars[i]->ensure_grad();
                scalars[i]->grad[0] += w[i] * out->grad[0];
            }
        });
    }
    return out;
}

} // namespace slogen
