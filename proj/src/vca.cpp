#include "vcformer/vca.hpp"

#include <cmath>

namespace vcformer {

VcaParams VcaParams::init(std::size_t d, Rng& rng, DType dtype) {
    double s = 1.0 / std::sqrt(static_cast<double>(d));
    VcaParams p;
    p.w_q = Tensor::random_uniform({d, d}, rng, -s, s, dtype);
    p.w_k = Tensor::random_uniform({d, d}, rng, -s, s, dtype);
    p.w_v = Tensor::random_uniform({d, d}, rng, -s, s, dtype);
    // near-identity output projection
    std::vector<double> wo(d * d);
    for (double& v : wo) v = rng.uniform(-0.02 * s, 0.02 * s);
    for (std::size_t i = 0; i < d; ++i) wo[i * d + i] += 1.0;
    p.w_o = Tensor({d, d}, std::move(wo), dtype);
    p.lambda = Tensor::full({d}, 1.0 / static_cast<double>(d), dtype);
    return p;
}

namespace {

void check_width(const Tensor& x, const VcaParams& p) {
    if (x.rank() != 2 || x.extent(1) != p.w_q.extent(0)) {
        throw ShapeError("vca_forward: token width mismatch, input " + x.shape_str() +
                         " vs projection " + p.w_q.shape_str());
    }
}

} // namespace

Tensor vca_forward(const Tensor& x, const VcaParams& p, Tensor* pre_softmax) {
    check_width(x, p);
    Tensor q = matmul(x, p.w_q);
    Tensor k = matmul(x, p.w_k);
    Tensor v = matmul(x, p.w_v);
    Tensor scores = aggregate_scores(lagged_corr_fft(q, k), p.lambda);
    if (pre_softmax) *pre_softmax = scores;
    Tensor attn = softmax_rows(scores);
    return matmul(matmul(attn, v), p.w_o);
}

Tensor export_corr_map(const Tensor& x, const VcaParams& p) {
    Tensor map;
    vca_forward(x, p, &map);
    return map;
}

namespace ad {

VcaVars vca_register(Tape& t, const VcaParams& p, bool requires_grad) {
    return {t.leaf(p.w_q, requires_grad), t.leaf(p.w_k, requires_grad),
            t.leaf(p.w_v, requires_grad), t.leaf(p.w_o, requires_grad),
            t.leaf(p.lambda, requires_grad)};
}

Var vca_forward(Tape& t, Var x, const VcaVars& p, Var* pre_softmax) {
    Var q = matmul(t, x, p.w_q);
    Var k = matmul(t, x, p.w_k);
    Var v = matmul(t, x, p.w_v);
    Var scores = aggregate_scores(t, lagged_corr_fft(t, q, k), p.lambda);
    if (pre_softmax) *pre_softmax = scores;
    Var attn = softmax_rows(t, scores);
    return matmul(t, matmul(t, attn, v), p.w_o);
}

} // namespace ad

} // namespace vcformer
