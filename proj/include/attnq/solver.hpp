#pragma once

#include <map>
#include <string>
#include <vector>

#include "attnq/hessian.hpp"
#include "attnq/linalg.hpp"
#include "attnq/matrix.hpp"
#include "attnq/model.hpp"
#include "attnq/quant.hpp"

namespace attnq {

struct QuantResult {
    IntMatrix codes;
    std::vector<QuantGrid> grids; // one per row
    DenseMatrix dequantized;      // grids[i].scale * (codes[i][j] - grids[i].zero_point)
    DenseMatrix e_rows;           // accumulated normalized quantization errors
    std::map<std::string, double> metrics;
};

// Damped factor pair plus the inverse-Cholesky factors the update formulas
// consume.
struct HeadFactors {
    DenseMatrix h_col;
    DenseMatrix h_row;
    UpperTriangular u_col;
    UpperTriangular u_row;
};

// One entry per head for the row-partitioned kinds; a single entry for the
// out projection (full or block-diagonal column factor).
struct HeadFactorSet {
    LayerKind kind = LayerKind::kGptqBaseline;
    OutPolicy out_policy = OutPolicy::kFull;
    std::vector<HeadFactors> heads;
    DenseMatrix input_gram; // Σ X·Xᵀ of the layer's true input, for metrics
};

// Computes the Cholesky machinery from already damped factor matrices.
HeadFactors make_head_factors(DenseMatrix h_col, DenseMatrix h_row);

// Builds, dampens, and factorizes everything boa_quantize_layer needs.
HeadFactorSet prepare_head_factors(LayerKind kind, const AttentionBlock& block,
                                   const CalibrationSet& calib, const QuantConfig& config);

// Nearest rounding of every entry against its row grid.
QuantResult rtn_quantize(const DenseMatrix& w, const std::vector<QuantGrid>& grids);

// Column-sequential quantization with error compensation. Mutates w in
// place (it drifts onto the grid); every row r uses row_ucol[r] as its
// inverse-Cholesky column factor. Returns the normalized error matrix E with
// E(r, j) = (w(r, j) - q(r, j)) / u(j, j).
DenseMatrix gptq_core(DenseMatrix& w, const std::vector<const UpperTriangular*>& row_ucol,
                      const std::vector<QuantGrid>& grids, IntMatrix* codes_out);

// Cross-row compensation after row j of a head is quantized: rows j+1..
// receive -(u_row(j, i) / u_row(j, j)) * (e_row · u_col).
void row_update(DenseMatrix& w_head, std::span<const double> e_row, const UpperTriangular& u_row,
                const UpperTriangular& u_col, int row);

// Head-stacked engine: w has num_heads blocks of head_dim rows; grids are
// per row of w. Row j of every head quantizes in one gptq_core pass, then
// each head compensates its remaining rows.
QuantResult quantize_head_stacked(const DenseMatrix& w, const HeadFactorSet& factors,
                                  const std::vector<QuantGrid>& grids);

// Full layer entry point: fits per-row grids from the head's column factor,
// dispatches to the stacked engine (query/key/value/baseline) or a plain
// gptq_core run (out), and fills the metrics.
QuantResult boa_quantize_layer(LayerKind kind, const AttentionBlock& block, const DenseMatrix& w,
                               const HeadFactorSet& factors, const QuantConfig& config);

} // namespace attnq
