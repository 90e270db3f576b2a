#include "vcformer/ktd.hpp"

namespace vcformer {

KtdParams KtdParams::init(std::size_t n_vars, std::size_t seg_len, std::size_t m,
                          Rng& rng, double ridge_eps, DType dtype) {
    KtdParams p;
    p.encoder = MlpParams::init(n_vars * seg_len, m, m, rng, dtype);
    p.decoder = MlpParams::init(m, m, n_vars * seg_len, rng, dtype);
    p.seg_len = seg_len;
    p.ridge_eps = ridge_eps;
    return p;
}

KtdParams KtdParams::identity(std::size_t seg_len, double ridge_eps) {
    KtdParams p;
    p.seg_len = seg_len;
    p.ridge_eps = ridge_eps;
    p.identity_stub = true;
    return p;
}

std::vector<Tensor> segment(const Tensor& x, std::size_t seg_len) {
    if (x.rank() != 2) throw ShapeError("segment: need rank 2, got " + x.shape_str());
    std::size_t d = x.extent(1);
    if (seg_len == 0 || d % seg_len != 0) {
        throw ConfigError("segment: segment length " + std::to_string(seg_len) +
                          " does not divide token width " + std::to_string(d));
    }
    std::size_t n_seg = d / seg_len;
    if (n_seg < 2) {
        throw ConfigError("segment: need at least two snapshots to fit K, got " +
                          std::to_string(n_seg));
    }
    std::vector<Tensor> out;
    out.reserve(n_seg);
    for (std::size_t j = 0; j < n_seg; ++j)
        out.push_back(slice_cols(x, j * seg_len, (j + 1) * seg_len));
    return out;
}

KoopmanFit fit_koopman(const Tensor& snapshots, double eps) {
    if (snapshots.rank() != 2 || snapshots.extent(1) < 2) {
        throw ConfigError("fit_koopman: need at least two snapshot columns, got " +
                          snapshots.shape_str());
    }
    std::size_t n = snapshots.extent(1);
    KoopmanFit fit;
    fit.z_back = slice_cols(snapshots, 0, n - 1);
    fit.z_fore = slice_cols(snapshots, 1, n);
    Tensor gram = matmul(transpose(fit.z_back), fit.z_back);
    if (eps > 0.0) gram = add(gram, mul_scalar(Tensor::identity(n - 1), eps));
    fit.gram = gram;
    fit.eps = eps;
    return fit;
}

Tensor KoopmanFit::apply(const Tensor& z) const {
    Tensor w = matmul(transpose(z_back), z);
    Tensor y = eps > 0.0 ? linear_solve(gram, w) : psd_pinv_solve(gram, w);
    return matmul(z_fore, y);
}

Tensor KoopmanFit::dense() const {
    return apply(Tensor::identity(z_back.extent(0)));
}

Tensor ktd_forward(const Tensor& x, const KtdParams& p, Nonlinearity nl) {
    std::size_t n_vars = x.extent(0);
    auto segments = segment(x, p.seg_len);
    std::size_t n_seg = segments.size();

    // Encode segments into snapshot columns z [M x n_seg], variate-major
    // flattening.
    std::vector<Tensor> cols;
    cols.reserve(n_seg);
    for (const Tensor& seg : segments) {
        Tensor flat_row = reshape(seg, {1, n_vars * p.seg_len});
        Tensor z = p.identity_stub ? flat_row : mlp_apply(flat_row, p.encoder, nl);
        cols.push_back(transpose(z)); // [M x 1]
    }
    Tensor z_all = concat_cols(cols);
    KoopmanFit fit = fit_koopman(z_all, p.ridge_eps);

    // Roll forward n_seg steps from the last embedding and decode.
    Tensor z_cur = cols.back();
    std::vector<Tensor> out_blocks;
    out_blocks.reserve(n_seg);
    for (std::size_t step = 0; step < n_seg; ++step) {
        z_cur = fit.apply(z_cur);
        Tensor z_row = transpose(z_cur);
        Tensor decoded = p.identity_stub ? z_row : mlp_apply(z_row, p.decoder, nl);
        out_blocks.push_back(reshape(decoded, {n_vars, p.seg_len}));
    }
    return concat_cols(out_blocks);
}

namespace ad {

KtdVars ktd_register(Tape& t, const KtdParams& p, bool requires_grad) {
    return {mlp_register(t, p.encoder, requires_grad),
            mlp_register(t, p.decoder, requires_grad)};
}

Var ktd_forward(Tape& t, Var x, const KtdVars& vars, const KtdParams& p,
                Nonlinearity nl) {
    const Tensor& xv = t.value(x);
    std::size_t n_vars = xv.extent(0);
    std::size_t d = xv.extent(1);
    if (p.seg_len == 0 || d % p.seg_len != 0 || d / p.seg_len < 2) {
        throw ConfigError("ktd_forward: segment length " + std::to_string(p.seg_len) +
                          " incompatible with token width " + std::to_string(d));
    }
    if (p.ridge_eps <= 0.0 || p.identity_stub) {
        throw ConfigError("ktd_forward: the differentiable path needs MLPs and "
                          "ridge_eps > 0");
    }
    std::size_t n_seg = d / p.seg_len;

    std::vector<Var> cols;
    cols.reserve(n_seg);
    for (std::size_t j = 0; j < n_seg; ++j) {
        Var seg = slice_cols(t, x, j * p.seg_len, (j + 1) * p.seg_len);
        Var flat_row = reshape(t, seg, {1, n_vars * p.seg_len});
        Var z = mlp_apply(t, flat_row, vars.encoder, nl);
        cols.push_back(transpose(t, z));
    }
    Var z_all = concat_cols(t, cols);
    Var z_back = slice_cols(t, z_all, 0, n_seg - 1);
    Var z_fore = slice_cols(t, z_all, 1, n_seg);
    Var gram = add(t, matmul(t, transpose(t, z_back), z_back),
                   t.constant(mul_scalar(Tensor::identity(n_seg - 1), p.ridge_eps)));

    Var z_cur = cols.back();
    std::vector<Var> out_blocks;
    out_blocks.reserve(n_seg);
    for (std::size_t step = 0; step < n_seg; ++step) {
        Var w = matmul(t, transpose(t, z_back), z_cur);
        Var y = linear_solve(t, gram, w);
        z_cur = matmul(t, z_fore, y);
        Var decoded = mlp_apply(t, transpose(t, z_cur), vars.decoder, nl);
        out_blocks.push_back(reshape(t, decoded, {n_vars, p.seg_len}));
    }
    return concat_cols(t, out_blocks);
}

} // namespace ad

} // namespace vcformer
