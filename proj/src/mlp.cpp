#include "vcformer/mlp.hpp"

#include <cmath>

namespace vcformer {

Nonlinearity nonlinearity_from_string(const std::string& name) {
    if (name == "gelu") return Nonlinearity::Gelu;
    if (name == "relu") return Nonlinearity::Relu;
    throw ConfigError("unknown nonlinearity '" + name + "' (expected gelu or relu)");
}

std::string nonlinearity_to_string(Nonlinearity nl) {
    return nl == Nonlinearity::Gelu ? "gelu" : "relu";
}

MlpParams MlpParams::init(std::size_t in, std::size_t hidden, std::size_t out,
                          Rng& rng, DType dtype) {
    double s1 = 1.0 / std::sqrt(static_cast<double>(in));
    double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    MlpParams p;
    p.w1 = Tensor::random_uniform({in, hidden}, rng, -s1, s1, dtype);
    p.b1 = Tensor::zeros({hidden}, dtype);
    p.w2 = Tensor::random_uniform({hidden, out}, rng, -s2, s2, dtype);
    p.b2 = Tensor::zeros({out}, dtype);
    return p;
}

Tensor mlp_apply(const Tensor& x, const MlpParams& p, Nonlinearity nl) {
    Tensor h = add_rowvec(matmul(x, p.w1), p.b1);
    h = nl == Nonlinearity::Gelu ? gelu(h) : relu(h);
    return add_rowvec(matmul(h, p.w2), p.b2);
}

namespace ad {

MlpVars mlp_register(Tape& t, const MlpParams& p, bool requires_grad) {
    return {t.leaf(p.w1, requires_grad), t.leaf(p.b1, requires_grad),
            t.leaf(p.w2, requires_grad), t.leaf(p.b2, requires_grad)};
}

Var mlp_apply(Tape& t, Var x, const MlpVars& p, Nonlinearity nl) {
    Var h = add_rowvec(t, matmul(t, x, p.w1), p.b1);
    h = nl == Nonlinearity::Gelu ? gelu(t, h) : relu(t, h);
    return add_rowvec(t, matmul(t, h, p.w2), p.b2);
}

} // namespace ad

} // namespace vcformer
