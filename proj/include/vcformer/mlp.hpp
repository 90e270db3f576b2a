#pragma once

#include <string>

#include "vcformer/autodiff.hpp"
#include "vcformer/rng.hpp"
#include "vcformer/tensor.hpp"

namespace vcformer {

enum class Nonlinearity { Gelu, Relu };

Nonlinearity nonlinearity_from_string(const std::string& name);
std::string nonlinearity_to_string(Nonlinearity nl);

/**
 * One-hidden-layer perceptron acting on the last dimension:
 * y = act(x W1 + b1) W2 + b2 for row-matrix inputs.
 */
struct MlpParams {
    Tensor w1, b1, w2, b2;

    static MlpParams init(std::size_t in, std::size_t hidden, std::size_t out,
                          Rng& rng, DType dtype = DType::F64);
};

struct MlpVars {
    Var w1, b1, w2, b2;
};

Tensor mlp_apply(const Tensor& x, const MlpParams& p, Nonlinearity nl);

namespace ad {
MlpVars mlp_register(Tape& t, const MlpParams& p, bool requires_grad);
Var mlp_apply(Tape& t, Var x, const MlpVars& p, Nonlinearity nl);
} // namespace ad

} // namespace vcformer
