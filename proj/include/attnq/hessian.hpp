#pragma once

#include <string>

#include "attnq/matrix.hpp"
#include "attnq/model.hpp"

namespace attnq {

// Which weight of the attention block a factor pair targets. kGptqBaseline
// is the plain input-gram Hessian with an identity row factor.
enum class LayerKind { kQuery, kKey, kValue, kOut, kGptqBaseline };

std::string to_string(LayerKind kind);

// Head selector for factors that are shared across heads.
inline constexpr int kAllHeads = -1;

// Kronecker pair approximating the curvature of the attention reconstruction
// error: H = h_col ⊗ h_row under column-major vectorization of the weight.
struct HessianFactors {
    DenseMatrix h_col;
    DenseMatrix h_row;
    LayerKind kind = LayerKind::kGptqBaseline;
    int head = kAllHeads;
};

// Per-sample building blocks, exposed so the factor algebra can be tested on
// synthetic intermediates.
DenseMatrix input_gram_term(const DenseMatrix& x);                             // X·Xᵀ
DenseMatrix value_col_term(const DenseMatrix& x, const DenseMatrix& attn);     // 2·X·Aᵀ·A·Xᵀ
DenseMatrix value_row_factor(const DenseMatrix& w_out_head);                   // Wᵀ·W

// Accumulates the factor pair for one (kind, head) over the calibration set.
// Query/Key/Value require a concrete head; kGptqBaseline ignores it and kOut
// accepts kAllHeads (full stacked attention output) or a head index
// (per-head block).
HessianFactors build_factors(LayerKind kind, const AttentionBlock& block,
                             const CalibrationSet& calib, int head);

// Adds damp_fraction * mean(diag) * I to each factor; a factor with a zero
// diagonal mean becomes damp_fraction * I. The result factorizes.
HessianFactors dampen(const HessianFactors& factors, double damp_fraction);
DenseMatrix dampen_matrix(const DenseMatrix& m, double damp_fraction);

// Σ X·Xᵀ of the layer's true input (undoubled): block input for query, key,
// value and the baseline; stacked attention output for out. Used for the
// layer reconstruction metric.
DenseMatrix layer_input_gram(LayerKind kind, const AttentionBlock& block,
                             const CalibrationSet& calib);

} // namespace attnq
