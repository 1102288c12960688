#include "attnq/hessian.hpp"

#include <string>

namespace attnq {

std::string to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::kQuery: return "query";
        case LayerKind::kKey: return "key";
        case LayerKind::kValue: return "value";
        case LayerKind::kOut: return "out";
        case LayerKind::kGptqBaseline: return "gptq_baseline";
    }
    return "?";
}

DenseMatrix input_gram_term(const DenseMatrix& x) {
    return gram_rows(x);
}

DenseMatrix value_col_term(const DenseMatrix& x, const DenseMatrix& attn) {
    // 2 · X Aᵀ A Xᵀ = 2 · (A Xᵀ)ᵀ (A Xᵀ)
    const DenseMatrix ax = matmul(attn, transpose(x));
    return scaled(gram_cols(ax), 2.0);
}

DenseMatrix value_row_factor(const DenseMatrix& w_out_head) {
    return gram_cols(w_out_head);
}

namespace {

void check_head(int head, int num_heads, LayerKind kind) {
    const bool needs_head =
        kind == LayerKind::kQuery || kind == LayerKind::kKey || kind == LayerKind::kValue;
    if (needs_head && (head < 0 || head >= num_heads)) {
        throw HeadOutOfRange("build_factors: head " + std::to_string(head) + " for " +
                             to_string(kind) + " with " + std::to_string(num_heads) + " heads");
    }
    if (kind == LayerKind::kOut && head != kAllHeads && (head < 0 || head >= num_heads)) {
        throw HeadOutOfRange("build_factors: out head " + std::to_string(head) + " out of range");
    }
}

void accumulate(DenseMatrix& acc, const DenseMatrix& term) {
    if (acc.empty()) {
        acc = term;
        return;
    }
    for (size_t i = 0; i < acc.data().size(); ++i) {
        acc.data()[i] += term.data()[i];
    }
}

} // namespace

HessianFactors build_factors(LayerKind kind, const AttentionBlock& block,
                             const CalibrationSet& calib, int head) {
    block.validate();
    if (calib.samples.empty()) {
        throw EmptyCalibration("build_factors: empty calibration set");
    }
    calib.validate(block.dim);
    check_head(head, block.num_heads, kind);

    HessianFactors factors;
    factors.kind = kind;
    factors.head = kind == LayerKind::kGptqBaseline ? kAllHeads : head;

    DenseMatrix col_acc;
    DenseMatrix row_acc;
    for (const DenseMatrix& x : calib.samples) {
        switch (kind) {
            case LayerKind::kGptqBaseline:
                accumulate(col_acc, scaled(input_gram_term(x), 2.0));
                break;
            case LayerKind::kQuery: {
                const ForwardTrace trace = mha_forward(block, x);
                accumulate(col_acc, scaled(input_gram_term(x), 2.0));
                accumulate(row_acc, gram_cols(trace.heads[head].k));
                break;
            }
            case LayerKind::kKey: {
                const ForwardTrace trace = mha_forward(block, x);
                accumulate(col_acc, scaled(input_gram_term(x), 2.0));
                accumulate(row_acc, gram_cols(trace.heads[head].q));
                break;
            }
            case LayerKind::kValue: {
                const ForwardTrace trace = mha_forward(block, x);
                accumulate(col_acc, value_col_term(x, trace.heads[head].attn));
                break;
            }
            case LayerKind::kOut: {
                const ForwardTrace trace = mha_forward(block, x);
                const DenseMatrix x_out =
                    head == kAllHeads
                        ? trace.x_out
                        : submatrix(trace.x_out, head * block.head_dim,
                                    (head + 1) * block.head_dim, 0, x.cols());
                accumulate(col_acc, scaled(gram_rows(x_out), 2.0));
                break;
            }
        }
    }

    factors.h_col = std::move(col_acc);
    switch (kind) {
        case LayerKind::kGptqBaseline:
            factors.h_row = DenseMatrix::identity(block.head_dim);
            break;
        case LayerKind::kQuery:
        case LayerKind::kKey:
            factors.h_row = std::move(row_acc);
            break;
        case LayerKind::kValue:
            factors.h_row = value_row_factor(block.head_cols(block.w_out, head));
            break;
        case LayerKind::kOut:
            factors.h_row = DenseMatrix::identity(block.dim);
            break;
    }
    return factors;
}

DenseMatrix dampen_matrix(const DenseMatrix& m, double damp_fraction) {
    if (!(damp_fraction > 0.0)) {
        throw InvalidArgument("dampen: damp_fraction must be positive");
    }
    if (m.rows() != m.cols() || m.rows() == 0) {
        throw ShapeMismatch("dampen: factor must be square");
    }
    double mean_diag = 0.0;
    for (int i = 0; i < m.rows(); ++i) {
        mean_diag += m(i, i);
    }
    mean_diag /= m.rows();
    const double lambda = mean_diag == 0.0 ? damp_fraction : damp_fraction * mean_diag;
    DenseMatrix out = m;
    for (int i = 0; i < m.rows(); ++i) {
        out(i, i) += lambda;
    }
    return out;
}

HessianFactors dampen(const HessianFactors& factors, double damp_fraction) {
    HessianFactors out = factors;
    out.h_col = dampen_matrix(factors.h_col, damp_fraction);
    out.h_row = dampen_matrix(factors.h_row, damp_fraction);
    return out;
}

DenseMatrix layer_input_gram(LayerKind kind, const AttentionBlock& block,
                             const CalibrationSet& calib) {
    calib.validate(block.dim);
    DenseMatrix acc;
    for (const DenseMatrix& x : calib.samples) {
        if (kind == LayerKind::kOut) {
            accumulate(acc, gram_rows(mha_forward(block, x).x_out));
        } else {
            accumulate(acc, gram_rows(x));
        }
    }
    return acc;
}

} // namespace attnq
