#include "latpoison/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace latpoison::ad {

namespace {

Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

void require_matrix(const char* op, const Tensor& t) {
    if (t.shape().size() != 2) {
        throw ShapeError(op, "expected a 2-D tensor, got " + to_string(t.shape()));
    }
}

void require_same(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError(op, a.shape(), b.shape());
    }
}

// Applies f elementwise; df(x, y) gives dy/dx from the input and output values.
template <class F, class DF>
Tensor unary(const Tensor& x, F f, DF df) {
    std::vector<double> out(x.size());
    const auto in = x.values();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = f(in[i]);
    }
    return Tensor::make_result(x.shape(), std::move(out), {x}, [df](Node& self) {
        Node& px = parent(self, 0);
        if (!px.requires_grad) {
            return;
        }
        auto& g = px.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] += self.grad[i] * df(px.value[i], self.value[i]);
        }
    });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_matrix("matmul", a);
    require_matrix("matmul", b);
    const std::size_t rows = a.dim(0);
    const std::size_t inner = a.dim(1);
    const std::size_t cols = b.dim(1);
    if (b.dim(0) != inner) {
        throw ShapeError("matmul", a.shape(), b.shape());
    }
    std::vector<double> out(rows * cols, 0.0);
    const auto av = a.values();
    const auto bv = b.values();
    for (std::size_t r = 0; r < rows; ++r) {
        double* orow = out.data() + r * cols;
        for (std::size_t k = 0; k < inner; ++k) {
            const double s = av[r * inner + k];
            const double* brow = bv.data() + k * cols;
            for (std::size_t c = 0; c < cols; ++c) {
                orow[c] += s * brow[c];
            }
        }
    }
    return Tensor::make_result({rows, cols}, std::move(out), {a, b},
                               [rows, inner, cols](Node& self) {
        Node& pa = parent(self, 0);
        Node& pb = parent(self, 1);
        const double* g = self.grad.data();
        if (pa.requires_grad) {
            auto& ga = pa.grad_buffer();
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t k = 0; k < inner; ++k) {
                    const double* brow = pb.value.data() + k * cols;
                    const double* grow = g + r * cols;
                    double acc = 0.0;
                    for (std::size_t c = 0; c < cols; ++c) {
                        acc += grow[c] * brow[c];
                    }
                    ga[r * inner + k] += acc;
                }
            }
        }
        if (pb.requires_grad) {
            auto& gb = pb.grad_buffer();
            for (std::size_t r = 0; r < rows; ++r) {
                const double* grow = g + r * cols;
                for (std::size_t k = 0; k < inner; ++k) {
                    const double s = pa.value[r * inner + k];
                    double* gbrow = gb.data() + k * cols;
                    for (std::size_t c = 0; c < cols; ++c) {
                        gbrow[c] += s * grow[c];
                    }
                }
            }
        }
    });
}

Tensor linear(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    require_matrix("linear", input);
    require_matrix("linear", weights);
    if (input.dim(1) != weights.dim(0)) {
        throw ShapeError("linear", input.shape(), weights.shape());
    }
    if (bias.shape() != Shape{weights.dim(1)}) {
        throw ShapeError("linear", weights.shape(), bias.shape());
    }
    const std::size_t rows = input.dim(0);
    const std::size_t inner = input.dim(1);
    const std::size_t cols = weights.dim(1);
    std::vector<double> out(rows * cols);
    const auto xv = input.values();
    const auto wv = weights.values();
    const auto bv = bias.values();
    for (std::size_t r = 0; r < rows; ++r) {
        double* orow = out.data() + r * cols;
        std::copy(bv.begin(), bv.end(), orow);
        for (std::size_t k = 0; k < inner; ++k) {
            const double s = xv[r * inner + k];
            if (s == 0.0) {
                continue;
            }
            const double* wrow = wv.data() + k * cols;
            for (std::size_t c = 0; c < cols; ++c) {
                orow[c] += s * wrow[c];
            }
        }
    }
    return Tensor::make_result({rows, cols}, std::move(out), {input, weights, bias},
                               [rows, inner, cols](Node& self) {
        Node& px = parent(self, 0);
        Node& pw = parent(self, 1);
        Node& pb = parent(self, 2);
        const double* g = self.grad.data();
        if (px.requires_grad) {
            auto& gx = px.grad_buffer();
            for (std::size_t r = 0; r < rows; ++r) {
                const double* grow = g + r * cols;
                for (std::size_t k = 0; k < inner; ++k) {
                    const double* wrow = pw.value.data() + k * cols;
                    double acc = 0.0;
                    for (std::size_t c = 0; c < cols; ++c) {
                        acc += grow[c] * wrow[c];
                    }
                    gx[r * inner + k] += acc;
                }
            }
        }
        if (pw.requires_grad) {
            auto& gw = pw.grad_buffer();
            for (std::size_t r = 0; r < rows; ++r) {
                const double* grow = g + r * cols;
                for (std::size_t k = 0; k < inner; ++k) {
                    const double s = px.value[r * inner + k];
                    if (s == 0.0) {
                        continue;
                    }
                    double* gwrow = gw.data() + k * cols;
                    for (std::size_t c = 0; c < cols; ++c) {
                        gwrow[c] += s * grow[c];
                    }
                }
            }
        }
        if (pb.requires_grad) {
            auto& gb = pb.grad_buffer();
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t c = 0; c < cols; ++c) {
                    gb[c] += g[r * cols + c];
                }
            }
        }
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same("add", a, b);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = a.values()[i] + b.values()[i];
    }
    return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
        for (std::size_t p = 0; p < 2; ++p) {
            Node& pn = parent(self, p);
            if (pn.requires_grad) {
                auto& g = pn.grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) {
                    g[i] += self.grad[i];
                }
            }
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same("sub", a, b);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = a.values()[i] - b.values()[i];
    }
    return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
        Node& pa = parent(self, 0);
        Node& pb = parent(self, 1);
        if (pa.requires_grad) {
            auto& g = pa.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += self.grad[i];
            }
        }
        if (pb.requires_grad) {
            auto& g = pb.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] -= self.grad[i];
            }
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same("mul", a, b);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = a.values()[i] * b.values()[i];
    }
    return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
        Node& pa = parent(self, 0);
        Node& pb = parent(self, 1);
        if (pa.requires_grad) {
            auto& g = pa.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += self.grad[i] * pb.value[i];
            }
        }
        if (pb.requires_grad) {
            auto& g = pb.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += self.grad[i] * pa.value[i];
            }
        }
    });
}

Tensor scale(const Tensor& x, double factor) {
    return unary(
        x, [factor](double v) { return v * factor; },
        [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double offset) {
    return unary(
        x, [offset](double v) { return v + offset; }, [](double, double) { return 1.0; });
}

Tensor add_scaled_row(const Tensor& x, const Tensor& row, std::span<const double> coeffs) {
    require_matrix("add_scaled_row", x);
    const std::size_t rows = x.dim(0);
    const std::size_t cols = x.dim(1);
    if (row.size() != cols) {
        throw ShapeError("add_scaled_row", x.shape(), row.shape());
    }
    if (coeffs.size() != rows) {
        throw ShapeError("add_scaled_row", "expected " + std::to_string(rows) +
                                               " row coefficients, got " +
                                               std::to_string(coeffs.size()));
    }
    std::vector<double> c(coeffs.begin(), coeffs.end());
    std::vector<double> out(x.size());
    const auto xv = x.values();
    const auto rv = row.values();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < cols; ++j) {
            out[r * cols + j] = xv[r * cols + j] + c[r] * rv[j];
        }
    }
    return Tensor::make_result(x.shape(), std::move(out), {x, row},
                               [rows, cols, c = std::move(c)](Node& self) {
        Node& px = parent(self, 0);
        Node& pr = parent(self, 1);
        if (px.requires_grad) {
            auto& g = px.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += self.grad[i];
            }
        }
        if (pr.requires_grad) {
            auto& g = pr.grad_buffer();
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t j = 0; j < cols; ++j) {
                    g[j] += c[r] * self.grad[r * cols + j];
                }
            }
        }
    });
}

Tensor mul_row(const Tensor& x, const Tensor& row) {
    require_matrix("mul_row", x);
    const std::size_t rows = x.dim(0);
    const std::size_t cols = x.dim(1);
    if (row.size() != cols) {
        throw ShapeError("mul_row", x.shape(), row.shape());
    }
    std::vector<double> out(x.size());
    const auto xv = x.values();
    const auto rv = row.values();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < cols; ++j) {
            out[r * cols + j] = xv[r * cols + j] * rv[j];
        }
    }
    return Tensor::make_result(x.shape(), std::move(out), {x, row}, [rows, cols](Node& self) {
        Node& px = parent(self, 0);
        Node& pr = parent(self, 1);
        if (px.requires_grad) {
            auto& g = px.grad_buffer();
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t j = 0; j < cols; ++j) {
                    g[r * cols + j] += self.grad[r * cols + j] * pr.value[j];
                }
            }
        }
        if (pr.requires_grad) {
            auto& g = pr.grad_buffer();
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t j = 0; j < cols; ++j) {
                    g[j] += self.grad[r * cols + j] * px.value[r * cols + j];
                }
            }
        }
    });
}

Tensor sigmoid(const Tensor& x) {
    return unary(
        x,
        [](double v) {
            if (v >= 0.0) {
                return 1.0 / (1.0 + std::exp(-v));
            }
            const double e = std::exp(v);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor leaky_relu(const Tensor& x, double slope) {
    return unary(
        x, [slope](double v) { return v > 0.0 ? v : slope * v; },
        [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
}

Tensor exp(const Tensor& x) {
    return unary(
        x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor square(const Tensor& x) {
    return unary(
        x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor sum(const Tensor& x) {
    double total = 0.0;
    for (double v : x.values()) {
        total += v;
    }
    return Tensor::make_result({1}, {total}, {x}, [](Node& self) {
        Node& px = parent(self, 0);
        if (px.requires_grad) {
            auto& g = px.grad_buffer();
            for (auto& gi : g) {
                gi += self.grad[0];
            }
        }
    });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

Tensor bce(const Tensor& prediction, const Tensor& target) {
    require_same("bce", prediction, target);
    const auto pv = prediction.values();
    const auto tv = target.values();
    const double n = static_cast<double>(pv.size());
    double total = 0.0;
    for (std::size_t i = 0; i < pv.size(); ++i) {
        const double p = std::clamp(pv[i], kBceClamp, 1.0 - kBceClamp);
        total -= tv[i] * std::log(p) + (1.0 - tv[i]) * std::log1p(-p);
    }
    return Tensor::make_result({1}, {total / n}, {prediction, target}, [n](Node& self) {
        Node& pp = parent(self, 0);
        Node& pt = parent(self, 1);
        const double g = self.grad[0] / n;
        if (pp.requires_grad) {
            auto& gp = pp.grad_buffer();
            for (std::size_t i = 0; i < gp.size(); ++i) {
                const double p = std::clamp(pp.value[i], kBceClamp, 1.0 - kBceClamp);
                const double t = pt.value[i];
                gp[i] += g * (-t / p + (1.0 - t) / (1.0 - p));
            }
        }
        if (pt.requires_grad) {
            auto& gt = pt.grad_buffer();
            for (std::size_t i = 0; i < gt.size(); ++i) {
                const double p = std::clamp(pp.value[i], kBceClamp, 1.0 - kBceClamp);
                gt[i] += g * (std::log1p(-p) - std::log(p));
            }
        }
    });
}

Tensor kl_standard_normal(const Tensor& mu, const Tensor& log_var) {
    require_same("kl_standard_normal", mu, log_var);
    const double batch = mu.shape().size() >= 2 ? static_cast<double>(mu.dim(0)) : 1.0;
    const auto mv = mu.values();
    const auto lv = log_var.values();
    double total = 0.0;
    for (std::size_t i = 0; i < mv.size(); ++i) {
        total += mv[i] * mv[i] + std::exp(lv[i]) - 1.0 - lv[i];
    }
    return Tensor::make_result({1}, {0.5 * total / batch}, {mu, log_var}, [batch](Node& self) {
        Node& pm = parent(self, 0);
        Node& pl = parent(self, 1);
        const double g = self.grad[0] / batch;
        if (pm.requires_grad) {
            auto& gm = pm.grad_buffer();
            for (std::size_t i = 0; i < gm.size(); ++i) {
                gm[i] += g * pm.value[i];
            }
        }
        if (pl.requires_grad) {
            auto& gl = pl.grad_buffer();
            for (std::size_t i = 0; i < gl.size(); ++i) {
                gl[i] += g * 0.5 * (std::exp(pl.value[i]) - 1.0);
            }
        }
    });
}

Tensor l1_norm(const Tensor& x) {
    double total = 0.0;
    for (double v : x.values()) {
        total += std::abs(v);
    }
    return Tensor::make_result({1}, {total}, {x}, [](Node& self) {
        Node& px = parent(self, 0);
        if (px.requires_grad) {
            auto& g = px.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double v = px.value[i];
                const double sign = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
                g[i] += self.grad[0] * sign;
            }
        }
    });
}

Tensor l2_norm(const Tensor& x) {
    double total = 0.0;
    for (double v : x.values()) {
        total += v * v;
    }
    const double norm = std::sqrt(total);
    return Tensor::make_result({1}, {norm}, {x}, [norm](Node& self) {
        Node& px = parent(self, 0);
        if (px.requires_grad && norm > 0.0) {
            auto& g = px.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += self.grad[0] * px.value[i] / norm;
            }
        }
    });
}

}  // namespace latpoison::ad
