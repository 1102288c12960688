#pragma once

#include <vector>

#include "attnq/matrix.hpp"

namespace attnq {

// Bias-free multi-head attention block. Head h of w_q/w_k/w_v lives in rows
// [h*head_dim, (h+1)*head_dim); head h of w_out in the same column range.
struct AttentionBlock {
    int dim = 0;
    int num_heads = 0;
    int head_dim = 0;
    DenseMatrix w_q, w_k, w_v, w_out;
    bool causal = false;

    void validate() const;

    DenseMatrix head_rows(const DenseMatrix& w, int head) const;
    DenseMatrix head_cols(const DenseMatrix& w, int head) const;
};

// Calibration inputs; each sample is dim x seq_len with token positions as
// columns.
struct CalibrationSet {
    std::vector<DenseMatrix> samples;

    void validate(int dim) const;
};

struct HeadTrace {
    DenseMatrix q, k, v; // seq_len x head_dim
    DenseMatrix attn;    // seq_len x seq_len, row-stochastic
};

struct ForwardTrace {
    std::vector<HeadTrace> heads;
    DenseMatrix x_out;  // dim x seq_len, stacked (A_h V_h)ᵀ
    DenseMatrix output; // dim x seq_len
};

// Row-wise softmax with per-row max subtraction; -inf logits mask cleanly.
void softmax_rows(DenseMatrix& z);

ForwardTrace mha_forward(const AttentionBlock& block, const DenseMatrix& x);

// Sum over samples of the squared Frobenius distance between the two blocks'
// attention outputs.
double attention_recon_error(const AttentionBlock& block, const AttentionBlock& quantized,
                             const CalibrationSet& calib);

// Sum over samples of ‖(w_hat - w) · X‖_F².
double layer_recon_error(const DenseMatrix& w, const DenseMatrix& w_hat,
                         const CalibrationSet& calib);

} // namespace attnq
