#include "vcformer/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "vcformer/fft.hpp"

namespace vcformer {

// ============================================================================
// Tape
// ============================================================================

Var Tape::leaf(Tensor value, bool requires_grad) {
    return emplace(std::move(value), requires_grad, nullptr);
}

Var Tape::emplace(Tensor value, bool requires_grad, BackwardFn backward) {
    Node node;
    node.value = std::move(value);
    node.requires_grad = requires_grad;
    if (requires_grad) node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

void Tape::accumulate(Var v, const Tensor& g) {
    if (!nodes_[v.id].requires_grad) return;
    Tensor& slot = grads_[v.id];
    slot = slot.defined() ? add(slot, g) : g;
}

void Tape::backward(Var loss) {
    const Tensor& lv = value(loss);
    if (lv.size() != 1) {
        throw ShapeError("backward: loss must be scalar, got " + lv.shape_str());
    }
    grads_.assign(nodes_.size(), Tensor());
    grads_[loss.id] = Tensor::full(lv.shape(), 1.0);
    for (int i = loss.id; i >= 0; --i) {
        if (!nodes_[i].backward || !grads_[i].defined()) continue;
        nodes_[i].backward(*this, grads_[i]);
    }
}

Tensor Tape::grad(Var v) const {
    if (v.id < static_cast<int>(grads_.size()) && grads_[v.id].defined()) {
        return grads_[v.id];
    }
    return Tensor::zeros(nodes_[v.id].value.shape());
}

// ============================================================================
// Operations
// ============================================================================

namespace ad {

namespace {

bool any_grad(const Tape& t, std::initializer_list<Var> vars) {
    for (Var v : vars) {
        if (t.requires_grad(v)) return true;
    }
    return false;
}

// Column-sum of a rank-2 tensor, for row-vector broadcast adjoints.
Tensor col_sum(const Tensor& a) {
    std::size_t m = a.extent(0), n = a.extent(1);
    std::vector<double> out(n, 0.0);
    const double* pa = a.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j] += pa[i * n + j];
    return Tensor({n}, std::move(out));
}

} // namespace

Var add(Tape& t, Var a, Var b) {
    bool rg = any_grad(t, {a, b});
    return t.emplace(vcformer::add(t.value(a), t.value(b)), rg,
                     [a, b](Tape& tp, const Tensor& g) {
                         tp.accumulate(a, g);
                         tp.accumulate(b, g);
                     });
}

Var sub(Tape& t, Var a, Var b) {
    bool rg = any_grad(t, {a, b});
    return t.emplace(vcformer::sub(t.value(a), t.value(b)), rg,
                     [a, b](Tape& tp, const Tensor& g) {
                         tp.accumulate(a, g);
                         tp.accumulate(b, mul_scalar(g, -1.0));
                     });
}

Var mul(Tape& t, Var a, Var b) {
    bool rg = any_grad(t, {a, b});
    Tensor av = t.value(a), bv = t.value(b);
    return t.emplace(vcformer::mul(av, bv), rg,
                     [a, b, av, bv](Tape& tp, const Tensor& g) {
                         tp.accumulate(a, vcformer::mul(g, bv));
                         tp.accumulate(b, vcformer::mul(g, av));
                     });
}

Var add_scalar(Tape& t, Var a, double s) {
    return t.emplace(vcformer::add_scalar(t.value(a), s), t.requires_grad(a),
                     [a](Tape& tp, const Tensor& g) { tp.accumulate(a, g); });
}

Var mul_scalar(Tape& t, Var a, double s) {
    return t.emplace(vcformer::mul_scalar(t.value(a), s), t.requires_grad(a),
                     [a, s](Tape& tp, const Tensor& g) {
                         tp.accumulate(a, vcformer::mul_scalar(g, s));
                     });
}

Var add_rowvec(Tape& t, Var a, Var row) {
    bool rg = any_grad(t, {a, row});
    return t.emplace(vcformer::add_rowvec(t.value(a), t.value(row)), rg,
                     [a, row](Tape& tp, const Tensor& g) {
                         tp.accumulate(a, g);
                         tp.accumulate(row, col_sum(g));
                     });
}

Var relu(Tape& t, Var a) {
    Tensor av = t.value(a);
    return t.emplace(vcformer::relu(av), t.requires_grad(a),
                     [a, av](Tape& tp, const Tensor& g) {
                         std::vector<double> out(g.size());
                         for (std::size_t i = 0; i < out.size(); ++i)
                             out[i] = av[i] > 0.0 ? g[i] : 0.0;
                         tp.accumulate(a, Tensor(g.shape(), std::move(out)));
                     });
}

Var gelu(Tape& t, Var a) {
    Tensor av = t.value(a);
    return t.emplace(vcformer::gelu(av), t.requires_grad(a),
                     [a, av](Tape& tp, const Tensor& g) {
                         std::vector<double> out(g.size());
                         for (std::size_t i = 0; i < out.size(); ++i)
                             out[i] = g[i] * gelu_grad_scalar(av[i]);
                         tp.accumulate(a, Tensor(g.shape(), std::move(out)));
                     });
}

Var sum(Tape& t, Var a) {
    Tensor av = t.value(a);
    return t.emplace(Tensor::scalar(vcformer::sum(av)), t.requires_grad(a),
                     [a, shape = av.shape()](Tape& tp, const Tensor& g) {
                         tp.accumulate(a, Tensor::full(shape, g[0]));
                     });
}

Var mean(Tape& t, Var a) {
    Tensor av = t.value(a);
    double n = static_cast<double>(av.size());
    return t.emplace(Tensor::scalar(vcformer::mean(av)), t.requires_grad(a),
                     [a, shape = av.shape(), n](Tape& tp, const Tensor& g) {
                         tp.accumulate(a, Tensor::full(shape, g[0] / n));
                     });
}

Var matmul(Tape& t, Var a, Var b) {
    bool rg = any_grad(t, {a, b});
    Tensor av = t.value(a), bv = t.value(b);
    return t.emplace(vcformer::matmul(av, bv), rg,
                     [a, b, av, bv](Tape& tp, const Tensor& g) {
                         tp.accumulate(a, vcformer::matmul(g, vcformer::transpose(bv)));
                         tp.accumulate(b, vcformer::matmul(vcformer::transpose(av), g));
                     });
}

Var transpose(Tape& t, Var a) {
    return t.emplace(vcformer::transpose(t.value(a)), t.requires_grad(a),
                     [a](Tape& tp, const Tensor& g) {
                         tp.accumulate(a, vcformer::transpose(g));
                     });
}

Var reshape(Tape& t, Var a, std::vector<std::size_t> shape) {
    std::vector<std::size_t> orig = t.value(a).shape();
    return t.emplace(vcformer::reshape(t.value(a), std::move(shape)),
                     t.requires_grad(a), [a, orig](Tape& tp, const Tensor& g) {
                         tp.accumulate(a, vcformer::reshape(g, orig));
                     });
}

Var slice_cols(Tape& t, Var a, std::size_t c0, std::size_t c1) {
    Tensor av = t.value(a);
    std::size_t m = av.extent(0), n = av.extent(1);
    return t.emplace(vcformer::slice_cols(av, c0, c1), t.requires_grad(a),
                     [a, m, n, c0, c1](Tape& tp, const Tensor& g) {
                         std::vector<double> out(m * n, 0.0);
                         std::size_t w = c1 - c0;
                         for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t j = 0; j < w; ++j)
                                 out[i * n + c0 + j] = g[i * w + j];
                         tp.accumulate(a, Tensor({m, n}, std::move(out)));
                     });
}

Var concat_cols(Tape& t, const std::vector<Var>& parts) {
    bool rg = false;
    std::vector<Tensor> values;
    values.reserve(parts.size());
    std::vector<std::size_t> widths;
    for (Var p : parts) {
        rg = rg || t.requires_grad(p);
        values.push_back(t.value(p));
        widths.push_back(t.value(p).extent(1));
    }
    return t.emplace(vcformer::concat_cols(values), rg,
                     [parts, widths](Tape& tp, const Tensor& g) {
                         std::size_t off = 0;
                         for (std::size_t i = 0; i < parts.size(); ++i) {
                             tp.accumulate(parts[i],
                                           vcformer::slice_cols(g, off, off + widths[i]));
                             off += widths[i];
                         }
                     });
}

Var roll_last(Tape& t, Var a, std::int64_t shift) {
    // The adjoint of a circular shift is the shift in the other direction.
    return t.emplace(vcformer::roll_last_axis(t.value(a), shift), t.requires_grad(a),
                     [a, shift](Tape& tp, const Tensor& g) {
                         tp.accumulate(a, vcformer::roll_last_axis(g, -shift));
                     });
}

Var softmax_rows(Tape& t, Var a) {
    Tensor y = vcformer::softmax_rows(t.value(a));
    return t.emplace(y, t.requires_grad(a), [a, y](Tape& tp, const Tensor& g) {
        std::size_t m = y.extent(0), n = y.extent(1);
        std::vector<double> out(m * n);
        for (std::size_t i = 0; i < m; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * y[i * n + j];
            for (std::size_t j = 0; j < n; ++j)
                out[i * n + j] = y[i * n + j] * (g[i * n + j] - dot);
        }
        tp.accumulate(a, Tensor(y.shape(), std::move(out)));
    });
}

Var layernorm(Tape& t, Var a, Var gamma, Var beta, double eps) {
    bool rg = any_grad(t, {a, gamma, beta});
    Tensor av = t.value(a), gv = t.value(gamma), bv = t.value(beta);
    Tensor y = vcformer::layernorm(av, gv, bv, eps);
    return t.emplace(y, rg, [a, gamma, beta, av, gv, eps](Tape& tp, const Tensor& g) {
        std::size_t m = av.extent(0), n = av.extent(1);
        double dn = static_cast<double>(n);
        std::vector<double> gx(m * n), ggamma(n, 0.0), gbeta(n, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            const double* row = av.data() + i * n;
            double mu = 0.0;
            for (std::size_t j = 0; j < n; ++j) mu += row[j];
            mu /= dn;
            double var = 0.0;
            for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
            var /= dn;
            double inv = 1.0 / std::sqrt(var + eps);
            // xhat statistics against gamma-scaled upstream
            double mean_gg = 0.0, mean_ggx = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                double xhat = (row[j] - mu) * inv;
                double gg = g[i * n + j] * gv[j];
                mean_gg += gg;
                mean_ggx += gg * xhat;
                ggamma[j] += g[i * n + j] * xhat;
                gbeta[j] += g[i * n + j];
            }
            mean_gg /= dn;
            mean_ggx /= dn;
            for (std::size_t j = 0; j < n; ++j) {
                double xhat = (row[j] - mu) * inv;
                double gg = g[i * n + j] * gv[j];
                gx[i * n + j] = (gg - mean_gg - xhat * mean_ggx) * inv;
            }
        }
        tp.accumulate(a, Tensor(av.shape(), std::move(gx)));
        tp.accumulate(gamma, Tensor({n}, std::move(ggamma)));
        tp.accumulate(beta, Tensor({n}, std::move(gbeta)));
    });
}

// ----------------------------------------------------------------------------
// FFT primitives. The interleaved representation keeps complex values inside
// plain real tensors, so the adjoints below are ordinary real-valued chain
// rules; both are pinned by finite-difference tests.
// ----------------------------------------------------------------------------

namespace {

Tensor complex_to_interleaved(const ComplexTensor& c) {
    std::vector<std::size_t> shape = c.shape();
    shape.back() *= 2;
    std::vector<double> buf(c.interleaved().begin(), c.interleaved().end());
    return Tensor(std::move(shape), std::move(buf));
}

ComplexTensor interleaved_to_complex(const Tensor& t) {
    std::vector<std::size_t> shape = t.shape();
    shape.back() /= 2;
    std::vector<double> buf(t.values().begin(), t.values().end());
    return ComplexTensor(std::move(shape), std::move(buf));
}

} // namespace

Var rfft(Tape& t, Var a) {
    Tensor av = t.value(a);
    std::size_t t_len = av.shape().back();
    Tensor spec = complex_to_interleaved(rfft_last_axis(av));
    return t.emplace(spec, t.requires_grad(a),
                     [a, t_len, shape = av.shape()](Tape& tp, const Tensor& g) {
                         // Adjoint: embed the F retained bins in a length-T
                         // spectrum (no conjugate mirror -- the dropped bins
                         // are not outputs) and take T * Re(ifft(.)).
                         std::size_t bins = t_len / 2 + 1;
                         std::size_t rows = g.size() / (2 * bins);
                         std::vector<double> out(rows * t_len);
                         std::vector<std::complex<double>> buf(t_len);
                         for (std::size_t r = 0; r < rows; ++r) {
                             std::fill(buf.begin(), buf.end(), std::complex<double>{0.0, 0.0});
                             for (std::size_t k = 0; k < bins; ++k)
                                 buf[k] = {g[(r * bins + k) * 2], g[(r * bins + k) * 2 + 1]};
                             fft::transform(buf.data(), t_len, true);
                             for (std::size_t j = 0; j < t_len; ++j)
                                 out[r * t_len + j] =
                                     buf[j].real() * static_cast<double>(t_len);
                         }
                         tp.accumulate(a, Tensor(shape, std::move(out)));
                     });
}

Var irfft(Tape& t, Var spec, std::size_t t_len) {
    Tensor sv = t.value(spec);
    Tensor y = irfft_last_axis(interleaved_to_complex(sv), t_len);
    return t.emplace(y, t.requires_grad(spec),
                     [spec, t_len, shape = sv.shape()](Tape& tp, const Tensor& g) {
                         // Adjoint: rfft of the upstream signal, with interior
                         // bins doubled (they feed the output through both the
                         // bin and its conjugate mirror) and everything / T.
                         std::size_t bins = t_len / 2 + 1;
                         std::size_t rows = g.size() / t_len;
                         std::vector<double> out(rows * bins * 2);
                         std::vector<std::complex<double>> buf(t_len);
                         double inv_t = 1.0 / static_cast<double>(t_len);
                         for (std::size_t r = 0; r < rows; ++r) {
                             for (std::size_t j = 0; j < t_len; ++j)
                                 buf[j] = {g[r * t_len + j], 0.0};
                             fft::transform(buf.data(), t_len, false);
                             for (std::size_t k = 0; k < bins; ++k) {
                                 bool mirrored = k != 0 && !(t_len % 2 == 0 && k == t_len / 2);
                                 double c = (mirrored ? 2.0 : 1.0) * inv_t;
                                 out[(r * bins + k) * 2] = buf[k].real() * c;
                                 out[(r * bins + k) * 2 + 1] = buf[k].imag() * c;
                             }
                         }
                         tp.accumulate(spec, Tensor(shape, std::move(out)));
                     });
}

Var cross_spectrum(Tape& t, Var q, Var k) {
    Tensor qv = t.value(q), kv = t.value(k);
    if (qv.rank() != 2 || !qv.same_shape(kv)) {
        throw ShapeError("cross_spectrum: shape mismatch " + qv.shape_str() + " vs " +
                         kv.shape_str());
    }
    std::size_t n = qv.extent(0);
    std::size_t w = qv.extent(1); // 2 * bins
    std::size_t bins = w / 2;
    std::vector<double> out(n * n * w);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double* po = out.data() + (i * n + j) * w;
            const double* pq = qv.data() + i * w;
            const double* pk = kv.data() + j * w;
            for (std::size_t f = 0; f < bins; ++f) {
                double ar = pq[2 * f], ai = pq[2 * f + 1];
                double br = pk[2 * f], bi = pk[2 * f + 1];
                po[2 * f] = ar * br + ai * bi;
                po[2 * f + 1] = ai * br - ar * bi;
            }
        }
    }
    bool rg = any_grad(t, {q, k});
    return t.emplace(Tensor({n * n, w}, std::move(out)), rg,
                     [q, k, qv, kv, n, w, bins](Tape& tp, const Tensor& g) {
                         std::vector<double> gq(n * w, 0.0), gk(n * w, 0.0);
                         for (std::size_t i = 0; i < n; ++i) {
                             for (std::size_t j = 0; j < n; ++j) {
                                 const double* pg = g.data() + (i * n + j) * w;
                                 const double* pq = qv.data() + i * w;
                                 const double* pk = kv.data() + j * w;
                                 for (std::size_t f = 0; f < bins; ++f) {
                                     double gr = pg[2 * f], gi = pg[2 * f + 1];
                                     double ar = pq[2 * f], ai = pq[2 * f + 1];
                                     double br = pk[2 * f], bi = pk[2 * f + 1];
                                     gq[i * w + 2 * f] += gr * br - gi * bi;
                                     gq[i * w + 2 * f + 1] += gr * bi + gi * br;
                                     gk[j * w + 2 * f] += gr * ar + gi * ai;
                                     gk[j * w + 2 * f + 1] += gr * ai - gi * ar;
                                 }
                             }
                         }
                         tp.accumulate(q, Tensor({n, w}, std::move(gq)));
                         tp.accumulate(k, Tensor({n, w}, std::move(gk)));
                     });
}

Var lag_contract(Tape& t, Var r, Var weights) {
    Tensor rv = t.value(r), wv = t.value(weights);
    if (rv.rank() != 3 || wv.rank() != 1 || rv.extent(2) != wv.extent(0)) {
        throw ShapeError("lag_contract: shape mismatch " + rv.shape_str() + " vs " +
                         wv.shape_str());
    }
    std::size_t n0 = rv.extent(0), n1 = rv.extent(1), L = rv.extent(2);
    std::vector<double> out(n0 * n1, 0.0);
    for (std::size_t p = 0; p < n0 * n1; ++p) {
        const double* pr = rv.data() + p * L;
        double acc = 0.0;
        for (std::size_t tau = 0; tau < L; ++tau) acc += wv[tau] * pr[tau];
        out[p] = acc;
    }
    bool rg = any_grad(t, {r, weights});
    return t.emplace(Tensor({n0, n1}, std::move(out)), rg,
                     [r, weights, rv, wv, n0, n1, L](Tape& tp, const Tensor& g) {
                         std::vector<double> gr(n0 * n1 * L), gw(L, 0.0);
                         for (std::size_t p = 0; p < n0 * n1; ++p) {
                             const double* pr = rv.data() + p * L;
                             for (std::size_t tau = 0; tau < L; ++tau) {
                                 gr[p * L + tau] = g[p] * wv[tau];
                                 gw[tau] += g[p] * pr[tau];
                             }
                         }
                         tp.accumulate(r, Tensor({n0, n1, L}, std::move(gr)));
                         tp.accumulate(weights, Tensor({L}, std::move(gw)));
                     });
}

Var linear_solve(Tape& t, Var a, Var b) {
    Tensor av = t.value(a), bv = t.value(b);
    Tensor x = vcformer::linear_solve(av, bv);
    bool rg = any_grad(t, {a, b});
    return t.emplace(x, rg, [a, b, av, x](Tape& tp, const Tensor& g) {
        Tensor grad_b = vcformer::linear_solve(vcformer::transpose(av), g);
        tp.accumulate(b, grad_b);
        tp.accumulate(a, mul_scalar(vcformer::matmul(grad_b, vcformer::transpose(x)), -1.0));
    });
}

Var mse(Tape& t, Var pred, Var target) {
    Tensor pv = t.value(pred), tv = t.value(target);
    if (!pv.same_shape(tv)) {
        throw ShapeError("mse: shape mismatch " + pv.shape_str() + " vs " +
                         tv.shape_str());
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < pv.size(); ++i) {
        double d = pv[i] - tv[i];
        acc += d * d;
    }
    double n = static_cast<double>(pv.size());
    bool rg = any_grad(t, {pred, target});
    return t.emplace(Tensor::scalar(acc / n), rg,
                     [pred, target, pv, tv, n](Tape& tp, const Tensor& g) {
                         std::vector<double> gp(pv.size()), gt(pv.size());
                         double c = 2.0 * g[0] / n;
                         for (std::size_t i = 0; i < pv.size(); ++i) {
                             double d = c * (pv[i] - tv[i]);
                             gp[i] = d;
                             gt[i] = -d;
                         }
                         tp.accumulate(pred, Tensor(pv.shape(), std::move(gp)));
                         tp.accumulate(target, Tensor(tv.shape(), std::move(gt)));
                     });
}

} // namespace ad

// ============================================================================
// Solvers
// ============================================================================

Tensor linear_solve(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || a.extent(0) != a.extent(1)) {
        throw ShapeError("linear_solve: A must be square, got " + a.shape_str());
    }
    if (b.rank() != 2 || b.extent(0) != a.extent(0)) {
        throw ShapeError("linear_solve: incompatible shapes " + a.shape_str() +
                         " vs " + b.shape_str());
    }
    std::size_t n = a.extent(0), m = b.extent(1);
    std::vector<double> lu(a.values().begin(), a.values().end());
    std::vector<double> x(b.values().begin(), b.values().end());

    double scale = 0.0;
    for (double v : lu) scale = std::max(scale, std::abs(v));
    double tol = scale * 1e-13 + 1e-300;

    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(lu[r * n + col]) > std::abs(lu[piv * n + col])) piv = r;
        if (!(std::abs(lu[piv * n + col]) > tol)) {
            throw NumericError("linear_solve: pivot " +
                               std::to_string(lu[piv * n + col]) + " at row " +
                               std::to_string(col) + " (matrix singular within tolerance)");
        }
        if (piv != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(lu[piv * n + c], lu[col * n + c]);
            for (std::size_t c = 0; c < m; ++c) std::swap(x[piv * m + c], x[col * m + c]);
        }
        double inv = 1.0 / lu[col * n + col];
        for (std::size_t r = col + 1; r < n; ++r) {
            double f = lu[r * n + col] * inv;
            lu[r * n + col] = f;
            for (std::size_t c = col + 1; c < n; ++c) lu[r * n + c] -= f * lu[col * n + c];
            for (std::size_t c = 0; c < m; ++c) x[r * m + c] -= f * x[col * m + c];
        }
    }
    for (std::size_t ii = n; ii-- > 0;) {
        for (std::size_t c = 0; c < m; ++c) {
            double s = x[ii * m + c];
            for (std::size_t k = ii + 1; k < n; ++k) s -= lu[ii * n + k] * x[k * m + c];
            x[ii * m + c] = s / lu[ii * n + ii];
        }
    }
    return Tensor({n, m}, std::move(x));
}

namespace {

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Small n only.
void jacobi_eigen(std::vector<double>& a, std::size_t n, std::vector<double>& v,
                  std::vector<double>& eig) {
    v.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a[p * n + q] * a[p * n + q];
        if (off < 1e-30) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double apq = a[p * n + q];
                if (std::abs(apq) < 1e-300) continue;
                double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                double tt = (theta >= 0 ? 1.0 : -1.0) /
                            (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(tt * tt + 1.0);
                double s = tt * c;
                for (std::size_t k = 0; k < n; ++k) {
                    double akp = a[k * n + p], akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double apk = a[p * n + k], aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double vkp = v[k * n + p], vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    eig.resize(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = a[i * n + i];
}

} // namespace

Tensor psd_pinv_solve(const Tensor& a, const Tensor& b, double rel_tol) {
    if (a.rank() != 2 || a.extent(0) != a.extent(1) || b.rank() != 2 ||
        b.extent(0) != a.extent(0)) {
        throw ShapeError("psd_pinv_solve: incompatible shapes " + a.shape_str() +
                         " vs " + b.shape_str());
    }
    std::size_t n = a.extent(0), m = b.extent(1);
    std::vector<double> work(a.values().begin(), a.values().end());
    std::vector<double> v, eig;
    jacobi_eigen(work, n, v, eig);
    double lmax = 0.0;
    for (double e : eig) lmax = std::max(lmax, std::abs(e));
    double cut = lmax * rel_tol;
    // X = V diag(1/eig where eig > cut) V^T B
    std::vector<double> vtb(n * m, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) {
            double vki = v[k * n + i];
            for (std::size_t c = 0; c < m; ++c) vtb[i * m + c] += vki * b.at2(k, c);
        }
    for (std::size_t i = 0; i < n; ++i) {
        double scale = eig[i] > cut ? 1.0 / eig[i] : 0.0;
        for (std::size_t c = 0; c < m; ++c) vtb[i * m + c] *= scale;
    }
    std::vector<double> x(n * m, 0.0);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i) {
            double vki = v[k * n + i];
            for (std::size_t c = 0; c < m; ++c) x[k * m + c] += vki * vtb[i * m + c];
        }
    return Tensor({n, m}, std::move(x));
}

// ============================================================================
// Gradient checking
// ============================================================================

GradCheckReport grad_check(
    const std::function<Var(Tape&, const std::vector<Var>&)>& build,
    const std::vector<std::pair<std::string, Tensor>>& params, double h_scale) {
    // One analytic pass.
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(params.size());
    for (const auto& [name, tensor] : params) vars.push_back(tape.leaf(tensor, true));
    Var loss = build(tape, vars);
    tape.backward(loss);
    std::vector<Tensor> analytic;
    analytic.reserve(params.size());
    for (Var v : vars) analytic.push_back(tape.grad(v));

    auto eval = [&](const std::vector<Tensor>& ps) {
        Tape t2;
        std::vector<Var> vs;
        vs.reserve(ps.size());
        for (const Tensor& p : ps) vs.push_back(t2.leaf(p, false));
        return t2.value(build(t2, vs))[0];
    };

    std::vector<Tensor> current;
    current.reserve(params.size());
    for (const auto& [name, tensor] : params) current.push_back(tensor);

    GradCheckReport report;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        GradCheckEntry entry;
        entry.name = params[pi].first;
        const Tensor& base = params[pi].second;
        for (std::size_t c = 0; c < base.size(); ++c) {
            double theta = base[c];
            double h = h_scale * std::max(1.0, std::abs(theta));
            std::vector<double> buf(base.values().begin(), base.values().end());
            buf[c] = theta + h;
            current[pi] = Tensor(base.shape(), buf);
            double fp = eval(current);
            buf[c] = theta - h;
            current[pi] = Tensor(base.shape(), std::move(buf));
            double fm = eval(current);
            current[pi] = base;
            double numeric = (fp - fm) / (2.0 * h);
            double a = analytic[pi][c];
            double denom = std::max(std::abs(a), std::abs(numeric));
            double err = denom < 1e-8 ? std::abs(a - numeric)
                                      : std::abs(a - numeric) / denom;
            entry.max_rel_err = std::max(entry.max_rel_err, err);
        }
        report.worst = std::max(report.worst, entry.max_rel_err);
        report.entries.push_back(std::move(entry));
    }
    return report;
}

} // namespace vcformer
