#include "toytts/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace toytts {

namespace {

using detail::Node;

Tensor record(const char* op, Shape shape, std::vector<double> data,
              std::initializer_list<const Tensor*> inputs, std::function<void(Node&)> bw) {
    for (double v : data) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string(op) + ": non-finite value in output of shape " +
                               shape_str(shape));
        }
    }
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->op = op;
    bool needs_grad = false;
    for (const Tensor* t : inputs) {
        needs_grad = needs_grad || t->requires_grad();
    }
    if (needs_grad) {
        node->requires_grad = true;
        for (const Tensor* t : inputs) {
            node->parents.push_back(t->node());
        }
        node->backward = std::move(bw);
    }
    return Tensor::from_node(std::move(node));
}

Tensor record_many(const char* op, Shape shape, std::vector<double> data,
                   const std::vector<Tensor>& inputs, std::function<void(Node&)> bw) {
    for (double v : data) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string(op) + ": non-finite value in output of shape " +
                               shape_str(shape));
        }
    }
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->op = op;
    bool needs_grad = std::any_of(inputs.begin(), inputs.end(),
                                  [](const Tensor& t) { return t.requires_grad(); });
    if (needs_grad) {
        node->requires_grad = true;
        for (const Tensor& t : inputs) {
            node->parents.push_back(t.node());
        }
        node->backward = std::move(bw);
    }
    return Tensor::from_node(std::move(node));
}

// Gradient buffer of parent k, or null when that parent is not differentiated.
std::vector<double>* grad_of(Node& self, std::size_t k) {
    Node* p = self.parents[k].get();
    return p->requires_grad ? &p->grad : nullptr;
}

const std::vector<double>& data_of(Node& self, std::size_t k) { return self.parents[k]->data; }

enum class Broadcast { same, scalar, column, row };

Broadcast resolve_broadcast(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() == b.shape()) {
        return Broadcast::same;
    }
    if (b.numel() == 1) {
        return Broadcast::scalar;
    }
    if (a.rank() == 2 && b.rank() == 2) {
        if (b.dim(0) == a.dim(0) && b.dim(1) == 1) {
            return Broadcast::column;
        }
        if (b.dim(0) == 1 && b.dim(1) == a.dim(1)) {
            return Broadcast::row;
        }
    }
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
}

// Flat index into b for flat index i of a (a has `cols` columns).
inline std::size_t b_index(Broadcast mode, std::size_t i, std::size_t cols) {
    switch (mode) {
        case Broadcast::same:
            return i;
        case Broadcast::scalar:
            return 0;
        case Broadcast::column:
            return i / cols;
        case Broadcast::row:
            return i % cols;
    }
    return 0;
}

std::size_t cols_of(const Tensor& a) { return a.rank() == 2 ? a.dim(1) : 1; }

template <class Fwd, class Deriv>
Tensor unary(const char* op, const Tensor& a, Fwd f, Deriv dydx) {
    const auto x = a.data();
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = f(x[i]);
    }
    return record(op, a.shape(), std::move(y), {&a}, [dydx](Node& self) {
        auto* ga = grad_of(self, 0);
        if (!ga) {
            return;
        }
        const auto& x = data_of(self, 0);
        for (std::size_t i = 0; i < x.size(); ++i) {
            (*ga)[i] += self.grad[i] * dydx(x[i], self.data[i]);
        }
    });
}

void require_rank2(const char* op, const Tensor& a) {
    if (a.rank() != 2) {
        throw ShapeError(std::string(op) + ": expected a rank-2 tensor, got shape " +
                         shape_str(a.shape()));
    }
}

// Splits `a` into (outer, n, inner) around `axis`.
struct AxisView {
    std::size_t outer, n, inner;
};

AxisView axis_view(const char* op, const Tensor& a, std::size_t axis) {
    if (a.rank() == 1 && axis == 0) {
        return {1, a.dim(0), 1};
    }
    if (a.rank() == 2 && axis == 0) {
        return {1, a.dim(0), a.dim(1)};
    }
    if (a.rank() == 2 && axis == 1) {
        return {a.dim(0), a.dim(1), 1};
    }
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                     " unsupported for shape " + shape_str(a.shape()));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    const Broadcast mode = resolve_broadcast("add", a, b);
    const std::size_t cols = cols_of(a);
    const auto x = a.data();
    const auto y = b.data();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = x[i] + y[b_index(mode, i, cols)];
    }
    return record("add", a.shape(), std::move(out), {&a, &b}, [mode, cols](Node& self) {
        if (auto* ga = grad_of(self, 0)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                (*ga)[i] += self.grad[i];
            }
        }
        if (auto* gb = grad_of(self, 1)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                (*gb)[b_index(mode, i, cols)] += self.grad[i];
            }
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    const Broadcast mode = resolve_broadcast("sub", a, b);
    const std::size_t cols = cols_of(a);
    const auto x = a.data();
    const auto y = b.data();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = x[i] - y[b_index(mode, i, cols)];
    }
    return record("sub", a.shape(), std::move(out), {&a, &b}, [mode, cols](Node& self) {
        if (auto* ga = grad_of(self, 0)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                (*ga)[i] += self.grad[i];
            }
        }
        if (auto* gb = grad_of(self, 1)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                (*gb)[b_index(mode, i, cols)] -= self.grad[i];
            }
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    const Broadcast mode = resolve_broadcast("mul", a, b);
    const std::size_t cols = cols_of(a);
    const auto x = a.data();
    const auto y = b.data();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = x[i] * y[b_index(mode, i, cols)];
    }
    return record("mul", a.shape(), std::move(out), {&a, &b}, [mode, cols](Node& self) {
        const auto& x = data_of(self, 0);
        const auto& y = data_of(self, 1);
        if (auto* ga = grad_of(self, 0)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                (*ga)[i] += self.grad[i] * y[b_index(mode, i, cols)];
            }
        }
        if (auto* gb = grad_of(self, 1)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                (*gb)[b_index(mode, i, cols)] += self.grad[i] * x[i];
            }
        }
    });
}

Tensor scale(const Tensor& a, double factor) {
    return unary(
        "scale", a, [factor](double x) { return x * factor; },
        [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
    return unary(
        "add_scalar", a, [value](double x) { return x + value; },
        [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& a) {
    return unary(
        "neg", a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor square(const Tensor& a) {
    return unary(
        "square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor exp(const Tensor& a) {
    return unary(
        "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
    return unary(
        "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor tanh(const Tensor& a) {
    return unary(
        "tanh", a, [](double x) { return std::tanh(x); },
        [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
    return unary(
        "sigmoid", a,
        [](double x) {
            if (x >= 0) {
                return 1.0 / (1.0 + std::exp(-x));
            }
            const double e = std::exp(x);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& a) {
    return unary(
        "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    if (!(lo <= hi)) {
        throw ContractError("clamp: lo must not exceed hi");
    }
    return unary(
        "clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
        [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    }
    const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
    const auto x = a.data();
    const auto y = b.data();
    std::vector<double> out(n * m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double xv = x[i * k + p];
            const double* yrow = &y[p * m];
            double* orow = &out[i * m];
            for (std::size_t j = 0; j < m; ++j) {
                orow[j] += xv * yrow[j];
            }
        }
    }
    return record("matmul", {n, m}, std::move(out), {&a, &b}, [n, k, m](Node& self) {
        const auto& x = data_of(self, 0);
        const auto& y = data_of(self, 1);
        const auto& g = self.grad;
        if (auto* ga = grad_of(self, 0)) {
            // dA = G B^T
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < m; ++j) {
                        acc += g[i * m + j] * y[p * m + j];
                    }
                    (*ga)[i * k + p] += acc;
                }
            }
        }
        if (auto* gb = grad_of(self, 1)) {
            // dB = A^T G
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    const double xv = x[i * k + p];
                    for (std::size_t j = 0; j < m; ++j) {
                        (*gb)[p * m + j] += xv * g[i * m + j];
                    }
                }
            }
        }
    });
}

Tensor transpose(const Tensor& a) {
    require_rank2("transpose", a);
    const std::size_t r = a.dim(0), c = a.dim(1);
    const auto x = a.data();
    std::vector<double> out(r * c);
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            out[j * r + i] = x[i * c + j];
        }
    }
    return record("transpose", {c, r}, std::move(out), {&a}, [r, c](Node& self) {
        if (auto* ga = grad_of(self, 0)) {
            for (std::size_t i = 0; i < r; ++i) {
                for (std::size_t j = 0; j < c; ++j) {
                    (*ga)[i * c + j] += self.grad[j * r + i];
                }
            }
        }
    });
}

Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    if (x.rank() != 2 || weight.rank() != 3 || weight.dim(1) != x.dim(0)) {
        throw ShapeError("conv1d: input " + shape_str(x.shape()) + " incompatible with weight " +
                         shape_str(weight.shape()));
    }
    const std::size_t cin = x.dim(0), len = x.dim(1);
    const std::size_t cout = weight.dim(0), kernel = weight.dim(2);
    if (kernel % 2 == 0) {
        throw ShapeError("conv1d: same-padding needs an odd kernel, weight " +
                         shape_str(weight.shape()));
    }
    const bool has_bias = bias.defined();
    if (has_bias && bias.numel() != cout) {
        throw ShapeError("conv1d: bias " + shape_str(bias.shape()) + " does not match weight " +
                         shape_str(weight.shape()));
    }
    const long pad = static_cast<long>(kernel / 2);
    const auto xv = x.data();
    const auto wv = weight.data();
    std::vector<double> out(cout * len, 0.0);
    for (std::size_t o = 0; o < cout; ++o) {
        const double b0 = has_bias ? bias.data()[o] : 0.0;
        for (std::size_t t = 0; t < len; ++t) {
            double acc = b0;
            for (std::size_t c = 0; c < cin; ++c) {
                for (std::size_t k = 0; k < kernel; ++k) {
                    const long s = static_cast<long>(t) + static_cast<long>(k) - pad;
                    if (s >= 0 && s < static_cast<long>(len)) {
                        acc += wv[(o * cin + c) * kernel + k] * xv[c * len + static_cast<std::size_t>(s)];
                    }
                }
            }
            out[o * len + t] = acc;
        }
    }
    auto bw = [cin, len, cout, kernel, pad, has_bias](Node& self) {
        const auto& xd = data_of(self, 0);
        const auto& wd = data_of(self, 1);
        const auto& g = self.grad;
        auto* gx = grad_of(self, 0);
        auto* gw = grad_of(self, 1);
        for (std::size_t o = 0; o < cout; ++o) {
            for (std::size_t t = 0; t < len; ++t) {
                const double go = g[o * len + t];
                if (go == 0.0) {
                    continue;
                }
                for (std::size_t c = 0; c < cin; ++c) {
                    for (std::size_t k = 0; k < kernel; ++k) {
                        const long s = static_cast<long>(t) + static_cast<long>(k) - pad;
                        if (s < 0 || s >= static_cast<long>(len)) {
                            continue;
                        }
                        const std::size_t xi = c * len + static_cast<std::size_t>(s);
                        const std::size_t wi = (o * cin + c) * kernel + k;
                        if (gx) {
                            (*gx)[xi] += go * wd[wi];
                        }
                        if (gw) {
                            (*gw)[wi] += go * xd[xi];
                        }
                    }
                }
            }
        }
        if (has_bias) {
            if (auto* gb = grad_of(self, 2)) {
                for (std::size_t o = 0; o < cout; ++o) {
                    for (std::size_t t = 0; t < len; ++t) {
                        (*gb)[o] += g[o * len + t];
                    }
                }
            }
        }
    };
    if (has_bias) {
        return record("conv1d", {cout, len}, std::move(out), {&x, &weight, &bias}, bw);
    }
    return record("conv1d", {cout, len}, std::move(out), {&x, &weight}, bw);
}

Tensor softmax(const Tensor& a, std::size_t axis) {
    const AxisView v = axis_view("softmax", a, axis);
    const auto x = a.data();
    std::vector<double> out(x.size());
    for (std::size_t o = 0; o < v.outer; ++o) {
        for (std::size_t i = 0; i < v.inner; ++i) {
            auto idx = [&](std::size_t k) { return (o * v.n + k) * v.inner + i; };
            double mx = x[idx(0)];
            for (std::size_t k = 1; k < v.n; ++k) {
                mx = std::max(mx, x[idx(k)]);
            }
            double total = 0.0;
            for (std::size_t k = 0; k < v.n; ++k) {
                out[idx(k)] = std::exp(x[idx(k)] - mx);
                total += out[idx(k)];
            }
            for (std::size_t k = 0; k < v.n; ++k) {
                out[idx(k)] /= total;
            }
        }
    }
    return record("softmax", a.shape(), std::move(out), {&a}, [v](Node& self) {
        auto* ga = grad_of(self, 0);
        if (!ga) {
            return;
        }
        const auto& y = self.data;
        const auto& g = self.grad;
        for (std::size_t o = 0; o < v.outer; ++o) {
            for (std::size_t i = 0; i < v.inner; ++i) {
                auto idx = [&](std::size_t k) { return (o * v.n + k) * v.inner + i; };
                double dot = 0.0;
                for (std::size_t k = 0; k < v.n; ++k) {
                    dot += g[idx(k)] * y[idx(k)];
                }
                for (std::size_t k = 0; k < v.n; ++k) {
                    (*ga)[idx(k)] += y[idx(k)] * (g[idx(k)] - dot);
                }
            }
        }
    });
}

Tensor layer_norm(const Tensor& a, std::size_t axis, double eps) {
    const AxisView v = axis_view("layer_norm", a, axis);
    const auto x = a.data();
    std::vector<double> out(x.size());
    std::vector<double> inv_std(v.outer * v.inner);
    const double n = static_cast<double>(v.n);
    for (std::size_t o = 0; o < v.outer; ++o) {
        for (std::size_t i = 0; i < v.inner; ++i) {
            auto idx = [&](std::size_t k) { return (o * v.n + k) * v.inner + i; };
            double mu = 0.0;
            for (std::size_t k = 0; k < v.n; ++k) {
                mu += x[idx(k)];
            }
            mu /= n;
            double var = 0.0;
            for (std::size_t k = 0; k < v.n; ++k) {
                const double d = x[idx(k)] - mu;
                var += d * d;
            }
            var /= n;
            const double is = 1.0 / std::sqrt(var + eps);
            inv_std[o * v.inner + i] = is;
            for (std::size_t k = 0; k < v.n; ++k) {
                out[idx(k)] = (x[idx(k)] - mu) * is;
            }
        }
    }
    return record("layer_norm", a.shape(), std::move(out), {&a},
                  [v, n, inv_std = std::move(inv_std)](Node& self) {
                      auto* ga = grad_of(self, 0);
                      if (!ga) {
                          return;
                      }
                      const auto& y = self.data;
                      const auto& g = self.grad;
                      for (std::size_t o = 0; o < v.outer; ++o) {
                          for (std::size_t i = 0; i < v.inner; ++i) {
                              auto idx = [&](std::size_t k) { return (o * v.n + k) * v.inner + i; };
                              double mg = 0.0, mgy = 0.0;
                              for (std::size_t k = 0; k < v.n; ++k) {
                                  mg += g[idx(k)];
                                  mgy += g[idx(k)] * y[idx(k)];
                              }
                              mg /= n;
                              mgy /= n;
                              const double is = inv_std[o * v.inner + i];
                              for (std::size_t k = 0; k < v.n; ++k) {
                                  (*ga)[idx(k)] += is * (g[idx(k)] - mg - y[idx(k)] * mgy);
                              }
                          }
                      }
                  });
}

Tensor sum(const Tensor& a) {
    double total = 0.0;
    for (double v : a.data()) {
        total += v;
    }
    return record("sum", {}, {total}, {&a}, [](Node& self) {
        if (auto* ga = grad_of(self, 0)) {
            for (double& g : *ga) {
                g += self.grad[0];
            }
        }
    });
}

Tensor mean(const Tensor& a) {
    if (a.numel() == 0) {
        throw ShapeError("mean: empty tensor");
    }
    return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor mse(const Tensor& a, const Tensor& b) { return mean(square(sub(a, b))); }

Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_numel(shape) != a.numel()) {
        throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
    }
    std::vector<double> out(a.data().begin(), a.data().end());
    return record("reshape", std::move(shape), std::move(out), {&a}, [](Node& self) {
        if (auto* ga = grad_of(self, 0)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                (*ga)[i] += self.grad[i];
            }
        }
    });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) {
        throw ShapeError("concat_rows: no inputs");
    }
    const std::size_t cols = parts.front().rank() == 2 ? parts.front().dim(1) : 0;
    std::size_t rows = 0;
    std::vector<std::size_t> offsets;
    for (const Tensor& p : parts) {
        if (p.rank() != 2 || p.dim(1) != cols) {
            throw ShapeError("concat_rows: incompatible shapes " + shape_str(parts.front().shape()) +
                             " and " + shape_str(p.shape()));
        }
        offsets.push_back(rows * cols);
        rows += p.dim(0);
    }
    std::vector<double> out;
    out.reserve(rows * cols);
    for (const Tensor& p : parts) {
        out.insert(out.end(), p.data().begin(), p.data().end());
    }
    return record_many("concat_rows", {rows, cols}, std::move(out), parts,
                       [offsets](Node& self) {
                           for (std::size_t k = 0; k < self.parents.size(); ++k) {
                               if (auto* gp = grad_of(self, k)) {
                                   for (std::size_t i = 0; i < gp->size(); ++i) {
                                       (*gp)[i] += self.grad[offsets[k] + i];
                                   }
                               }
                           }
                       });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
    require_rank2("slice_rows", a);
    if (begin > end || end > a.dim(0)) {
        throw ShapeError("slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") out of bounds for shape " + shape_str(a.shape()));
    }
    const std::size_t cols = a.dim(1);
    std::vector<double> out(a.data().begin() + static_cast<long>(begin * cols),
                            a.data().begin() + static_cast<long>(end * cols));
    return record("slice_rows", {end - begin, cols}, std::move(out), {&a},
                  [offset = begin * cols](Node& self) {
                      if (auto* ga = grad_of(self, 0)) {
                          for (std::size_t i = 0; i < self.grad.size(); ++i) {
                              (*ga)[offset + i] += self.grad[i];
                          }
                      }
                  });
}

Tensor gather_rows(const Tensor& a, const std::vector<std::size_t>& rows) {
    require_rank2("gather_rows", a);
    const std::size_t cols = a.dim(1);
    const auto x = a.data();
    std::vector<double> out;
    out.reserve(rows.size() * cols);
    for (std::size_t r : rows) {
        if (r >= a.dim(0)) {
            throw ShapeError("gather_rows: row " + std::to_string(r) + " out of range for shape " +
                             shape_str(a.shape()));
        }
        out.insert(out.end(), x.begin() + static_cast<long>(r * cols),
                   x.begin() + static_cast<long>((r + 1) * cols));
    }
    return record("gather_rows", {rows.size(), cols}, std::move(out), {&a},
                  [rows, cols](Node& self) {
                      if (auto* ga = grad_of(self, 0)) {
                          for (std::size_t k = 0; k < rows.size(); ++k) {
                              for (std::size_t j = 0; j < cols; ++j) {
                                  (*ga)[rows[k] * cols + j] += self.grad[k * cols + j];
                              }
                          }
                      }
                  });
}

Tensor gather_cols(const Tensor& a, const std::vector<std::size_t>& cols) {
    require_rank2("gather_cols", a);
    const std::size_t r = a.dim(0), c = a.dim(1);
    for (std::size_t j : cols) {
        if (j >= c) {
            throw ShapeError("gather_cols: column " + std::to_string(j) + " out of range for shape " +
                             shape_str(a.shape()));
        }
    }
    const auto x = a.data();
    const std::size_t m = cols.size();
    std::vector<double> out(r * m);
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t k = 0; k < m; ++k) {
            out[i * m + k] = x[i * c + cols[k]];
        }
    }
    return record("gather_cols", {r, m}, std::move(out), {&a}, [cols, r, c](Node& self) {
        if (auto* ga = grad_of(self, 0)) {
            const std::size_t m = cols.size();
            for (std::size_t i = 0; i < r; ++i) {
                for (std::size_t k = 0; k < m; ++k) {
                    (*ga)[i * c + cols[k]] += self.grad[i * m + k];
                }
            }
        }
    });
}

Tensor flip_rows(const Tensor& a) {
    require_rank2("flip_rows", a);
    std::vector<std::size_t> rows(a.dim(0));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        rows[i] = rows.size() - 1 - i;
    }
    return gather_rows(a, rows);
}

}  // namespace toytts
