#include "attnq/model.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace attnq {

void AttentionBlock::validate() const {
    if (dim <= 0 || num_heads <= 0 || head_dim <= 0 || dim != num_heads * head_dim) {
        throw InvalidDims("AttentionBlock: need dim = num_heads * head_dim with all positive");
    }
    for (const DenseMatrix* w : {&w_q, &w_k, &w_v, &w_out}) {
        if (w->rows() != dim || w->cols() != dim) {
            throw ShapeMismatch("AttentionBlock: weights must be dim x dim");
        }
        require_finite(*w, "AttentionBlock");
    }
}

DenseMatrix AttentionBlock::head_rows(const DenseMatrix& w, int head) const {
    return submatrix(w, head * head_dim, (head + 1) * head_dim, 0, dim);
}

DenseMatrix AttentionBlock::head_cols(const DenseMatrix& w, int head) const {
    return submatrix(w, 0, dim, head * head_dim, (head + 1) * head_dim);
}

void CalibrationSet::validate(int dim) const {
    if (samples.empty()) {
        throw EmptyCalibration("CalibrationSet: no samples");
    }
    for (const DenseMatrix& x : samples) {
        if (x.rows() != dim || x.cols() == 0) {
            throw ShapeMismatch("CalibrationSet: sample must have dim rows, got " +
                                std::to_string(x.rows()) + "x" + std::to_string(x.cols()));
        }
        require_finite(x, "CalibrationSet");
    }
}

void softmax_rows(DenseMatrix& z) {
    for (int i = 0; i < z.rows(); ++i) {
        double* row = z.row_ptr(i);
        double m = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < z.cols(); ++j) {
            m = std::max(m, row[j]);
        }
        double sum = 0.0;
        for (int j = 0; j < z.cols(); ++j) {
            row[j] = std::exp(row[j] - m);
            sum += row[j];
        }
        for (int j = 0; j < z.cols(); ++j) {
            row[j] /= sum;
        }
    }
}

ForwardTrace mha_forward(const AttentionBlock& block, const DenseMatrix& x) {
    block.validate();
    if (x.rows() != block.dim || x.cols() == 0) {
        throw ShapeMismatch("mha_forward: input must have dim rows");
    }
    require_finite(x, "mha_forward");

    const int seq_len = x.cols();
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(block.head_dim));

    ForwardTrace trace;
    trace.heads.reserve(block.num_heads);
    trace.x_out = DenseMatrix(block.dim, seq_len);
    trace.output = DenseMatrix(block.dim, seq_len);

    for (int h = 0; h < block.num_heads; ++h) {
        HeadTrace head;
        head.q = transpose(matmul(block.head_rows(block.w_q, h), x));
        head.k = transpose(matmul(block.head_rows(block.w_k, h), x));
        head.v = transpose(matmul(block.head_rows(block.w_v, h), x));

        DenseMatrix logits = matmul(head.q, transpose(head.k));
        for (double& v : logits.data()) {
            v *= inv_sqrt_dh;
        }
        if (block.causal) {
            for (int i = 0; i < seq_len; ++i) {
                for (int j = i + 1; j < seq_len; ++j) {
                    logits(i, j) = -std::numeric_limits<double>::infinity();
                }
            }
        }
        softmax_rows(logits);
        head.attn = std::move(logits);

        const DenseMatrix context = transpose(matmul(head.attn, head.v)); // head_dim x seq_len
        set_submatrix(trace.x_out, h * block.head_dim, 0, context);
        const DenseMatrix contribution = matmul(block.head_cols(block.w_out, h), context);
        for (size_t i = 0; i < trace.output.data().size(); ++i) {
            trace.output.data()[i] += contribution.data()[i];
        }
        trace.heads.push_back(std::move(head));
    }
    return trace;
}

double attention_recon_error(const AttentionBlock& block, const AttentionBlock& quantized,
                             const CalibrationSet& calib) {
    if (block.dim != quantized.dim || block.num_heads != quantized.num_heads ||
        block.causal != quantized.causal) {
        throw ShapeMismatch("attention_recon_error: blocks must have identical geometry");
    }
    calib.validate(block.dim);
    double total = 0.0;
    for (const DenseMatrix& x : calib.samples) {
        const DenseMatrix a = mha_forward(block, x).output;
        const DenseMatrix b = mha_forward(quantized, x).output;
        double s = 0.0;
        for (size_t i = 0; i < a.data().size(); ++i) {
            const double d = a.data()[i] - b.data()[i];
            s += d * d;
        }
        total += s;
    }
    return total;
}

double layer_recon_error(const DenseMatrix& w, const DenseMatrix& w_hat,
                         const CalibrationSet& calib) {
    if (!w.same_shape(w_hat)) {
        throw ShapeMismatch("layer_recon_error: weight shapes differ");
    }
    calib.validate(w.cols());
    const DenseMatrix delta = w_hat - w;
    double total = 0.0;
    for (const DenseMatrix& x : calib.samples) {
        const DenseMatrix r = matmul(delta, x);
        for (double v : r.data()) {
            total += v * v;
        }
    }
    return total;
}

} // namespace attnq
