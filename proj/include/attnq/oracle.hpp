#pragma once

#include <span>
#include <string>
#include <vector>

#include "attnq/hessian.hpp"
#include "attnq/matrix.hpp"
#include "attnq/model.hpp"
#include "attnq/quant.hpp"

namespace attnq {

// Brute-force references. Everything here uses column-major vectorization,
// so vec(M1 · W · M2) = (M2ᵀ ⊗ M1) · vec(W) holds as written.

// Central-difference Hessian of f(W) = ‖M1 · W · M2‖_F² at W = 0; must match
// 2 · kron(M2·M2ᵀ, M1ᵀ·M1).
DenseMatrix fd_quadratic_hessian(const DenseMatrix& m1, const DenseMatrix& m2, int dw_rows,
                                 int dw_cols);

// 2·JᵀJ where J is the finite-difference Jacobian of the attention output
// with respect to one head's weight slice. The residual vanishes at the
// expansion point, so this is the exact curvature of the attention
// reconstruction error.
DenseMatrix fd_attention_hessian(const AttentionBlock& block, const DenseMatrix& x, LayerKind kind,
                                 int head);

struct ObsResult {
    std::vector<double> weights; // final (fully quantized) vector
    std::vector<int> codes;
    double loss = 0.0;          // Δᵀ · h_full · Δ against the input vector
    double path_deviation = 0.0; // max disagreement between the two update paths
};

// Sequential quantize-and-compensate on a materialized Hessian. Runs two
// independent update paths in lockstep: one reads the fixed Cholesky factor
// of the (processing-order permuted) inverse Hessian, the other recomputes
// the inverse of the remaining principal submatrix at every step. They must
// agree within 1e-8; disagreement throws.
ObsResult obs_full_update(const DenseMatrix& h_full, std::span<const double> w_vec,
                          std::span<const int> quant_order, std::span<const QuantGrid> grids);

struct ExhaustiveResult {
    std::vector<int> codes;
    double loss = 0.0;
};

// Global optimum over all code assignments; ties resolve to the
// lexicographically smallest code vector.
ExhaustiveResult exhaustive_min_assignment(const DenseMatrix& h_full, std::span<const double> w_vec,
                                           std::span<const QuantGrid> grids);

// First-order response of the attention output to a query-weight
// perturbation, using the per-row softmax Jacobian.
DenseMatrix linearized_query_response(const AttentionBlock& block, const DenseMatrix& x, int head,
                                      const DenseMatrix& delta_wq_head);

// sqrt(Σ_i ‖W_out,h · V_hᵀ · J_σ,i‖_F²) / sqrt(head_dim): the constant factor
// of the relaxation bound for the query layer.
double softmax_response_frobenius(const AttentionBlock& block, const DenseMatrix& x, int head);

struct ValidationCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

// The oracle suite behind the `validate` CLI subcommand.
std::vector<ValidationCheck> run_validation(int dim, int num_heads, int seq_len);

} // namespace attnq
