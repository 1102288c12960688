#include "attnq/solver.hpp"

#include <string>
#include <utility>

namespace attnq {

namespace {

DenseMatrix dequantize(const IntMatrix& codes, const std::vector<QuantGrid>& grids) {
    DenseMatrix out(codes.rows, codes.cols);
    for (int i = 0; i < codes.rows; ++i) {
        const QuantGrid& g = grids[i];
        for (int j = 0; j < codes.cols; ++j) {
            out(i, j) = g.scale * (codes.at(i, j) - g.zero_point);
        }
    }
    return out;
}

// tr(ΔW · G · ΔWᵀ); with G = Σ X Xᵀ this equals Σ ‖ΔW X‖_F².
double gram_recon_error(const DenseMatrix& delta, const DenseMatrix& gram) {
    double total = 0.0;
    for (int r = 0; r < delta.rows(); ++r) {
        total += quadratic_form(delta.row(r), gram);
    }
    return total;
}

// vec(ΔW)ᵀ (h_col ⊗ h_row) vec(ΔW) = tr(h_row · ΔW · h_col · ΔWᵀ).
double kron_quad_score(const DenseMatrix& delta, const DenseMatrix& h_col,
                       const DenseMatrix& h_row) {
    const DenseMatrix lhs = matmul(h_row, delta);
    const DenseMatrix rhs = matmul(delta, h_col);
    double total = 0.0;
    for (size_t i = 0; i < lhs.data().size(); ++i) {
        total += lhs.data()[i] * rhs.data()[i];
    }
    return total;
}

} // namespace

HeadFactors make_head_factors(DenseMatrix h_col, DenseMatrix h_row) {
    UpperTriangular u_col = inverse_cholesky_upper(h_col);
    UpperTriangular u_row = inverse_cholesky_upper(h_row);
    return HeadFactors{std::move(h_col), std::move(h_row), std::move(u_col), std::move(u_row)};
}

HeadFactorSet prepare_head_factors(LayerKind kind, const AttentionBlock& block,
                                   const CalibrationSet& calib, const QuantConfig& config) {
    config.validate();
    HeadFactorSet set;
    set.kind = kind;
    set.out_policy = config.out_policy;
    set.input_gram = layer_input_gram(kind, block, calib);

    if (kind == LayerKind::kOut) {
        DenseMatrix h_col;
        if (config.out_policy == OutPolicy::kFull) {
            h_col = build_factors(kind, block, calib, kAllHeads).h_col;
        } else {
            // Block-diagonal column factor from the per-head attention
            // outputs; cross-head compensation is structurally zero.
            h_col = DenseMatrix(block.dim, block.dim);
            for (int h = 0; h < block.num_heads; ++h) {
                set_submatrix(h_col, h * block.head_dim, h * block.head_dim,
                              build_factors(kind, block, calib, h).h_col);
            }
        }
        set.heads.push_back(make_head_factors(dampen_matrix(h_col, config.damp_fraction),
                                              DenseMatrix::identity(block.dim)));
        return set;
    }

    for (int h = 0; h < block.num_heads; ++h) {
        const HessianFactors raw = build_factors(kind, block, calib, h);
        const HessianFactors damped = dampen(raw, config.damp_fraction);
        set.heads.push_back(make_head_factors(damped.h_col, damped.h_row));
    }
    return set;
}

QuantResult rtn_quantize(const DenseMatrix& w, const std::vector<QuantGrid>& grids) {
    if (grids.size() != static_cast<size_t>(w.rows())) {
        throw ShapeMismatch("rtn_quantize: one grid per row required");
    }
    require_finite(w, "rtn_quantize");
    QuantResult result;
    result.grids = grids;
    result.codes = IntMatrix(w.rows(), w.cols());
    for (int i = 0; i < w.rows(); ++i) {
        for (int j = 0; j < w.cols(); ++j) {
            result.codes.at(i, j) = quantize_affine(w(i, j), grids[i]).code;
        }
    }
    result.dequantized = dequantize(result.codes, grids);
    return result;
}

DenseMatrix gptq_core(DenseMatrix& w, const std::vector<const UpperTriangular*>& row_ucol,
                      const std::vector<QuantGrid>& grids, IntMatrix* codes_out) {
    const int rows = w.rows();
    const int cols = w.cols();
    if (row_ucol.size() != static_cast<size_t>(rows) || grids.size() != static_cast<size_t>(rows)) {
        throw ShapeMismatch("gptq_core: need one u_col and one grid per row");
    }
    for (const UpperTriangular* u : row_ucol) {
        if (u == nullptr || u->size() != cols) {
            throw ShapeMismatch("gptq_core: u_col must be square of size w.cols()");
        }
    }
    require_finite(w, "gptq_core");

    DenseMatrix errors(rows, cols);
    for (int j = 0; j < cols; ++j) {
        for (int r = 0; r < rows; ++r) {
            const UpperTriangular& u = *row_ucol[r];
            const Quantized q = quantize_affine(w(r, j), grids[r]);
            if (codes_out != nullptr) {
                codes_out->at(r, j) = q.code;
            }
            const double err = (w(r, j) - q.value) / u(j, j);
            errors(r, j) = err;
            double* wrow = w.row_ptr(r);
            for (int k = j + 1; k < cols; ++k) {
                wrow[k] -= err * u(j, k);
            }
            wrow[j] = q.value;
        }
    }
    return errors;
}

void row_update(DenseMatrix& w_head, std::span<const double> e_row, const UpperTriangular& u_row,
                const UpperTriangular& u_col, int row) {
    const int cols = w_head.cols();
    if (e_row.size() != static_cast<size_t>(cols) || u_col.size() != cols ||
        u_row.size() != w_head.rows() || row < 0 || row >= w_head.rows()) {
        throw ShapeMismatch("row_update: inconsistent shapes");
    }
    if (row + 1 >= w_head.rows()) {
        return;
    }
    // v = e · u_col, computed once; u_col upper means entries j <= k contribute.
    std::vector<double> v(cols, 0.0);
    for (int j = 0; j < cols; ++j) {
        const double e = e_row[j];
        if (e == 0.0) {
            continue;
        }
        for (int k = j; k < cols; ++k) {
            v[k] += e * u_col(j, k);
        }
    }
    for (int i = row + 1; i < w_head.rows(); ++i) {
        const double coeff = u_row(row, i) / u_row(row, row);
        if (coeff == 0.0) {
            continue;
        }
        double* wrow = w_head.row_ptr(i);
        for (int k = 0; k < cols; ++k) {
            wrow[k] -= coeff * v[k];
        }
    }
}

QuantResult quantize_head_stacked(const DenseMatrix& w, const HeadFactorSet& factors,
                                  const std::vector<QuantGrid>& grids) {
    const int num_heads = static_cast<int>(factors.heads.size());
    if (num_heads == 0 || w.rows() % num_heads != 0) {
        throw ShapeMismatch("quantize_head_stacked: rows must partition into head blocks");
    }
    const int head_dim = w.rows() / num_heads;
    const int cols = w.cols();
    if (grids.size() != static_cast<size_t>(w.rows())) {
        throw ShapeMismatch("quantize_head_stacked: one grid per row required");
    }
    for (const HeadFactors& hf : factors.heads) {
        if (hf.u_col.size() != cols || hf.u_row.size() != head_dim) {
            throw ShapeMismatch("quantize_head_stacked: factor sizes do not match the layer");
        }
    }

    // Working copies per head; the original w stays untouched.
    std::vector<DenseMatrix> work;
    work.reserve(num_heads);
    for (int h = 0; h < num_heads; ++h) {
        work.push_back(submatrix(w, h * head_dim, (h + 1) * head_dim, 0, cols));
    }

    QuantResult result;
    result.grids = grids;
    result.codes = IntMatrix(w.rows(), cols);
    result.e_rows = DenseMatrix(w.rows(), cols);

    std::vector<const UpperTriangular*> row_ucol(num_heads);
    for (int h = 0; h < num_heads; ++h) {
        row_ucol[h] = &factors.heads[h].u_col;
    }

    for (int j = 0; j < head_dim; ++j) {
        DenseMatrix stack(num_heads, cols);
        std::vector<QuantGrid> stack_grids(num_heads);
        for (int h = 0; h < num_heads; ++h) {
            for (int k = 0; k < cols; ++k) {
                stack(h, k) = work[h](j, k);
            }
            stack_grids[h] = grids[h * head_dim + j];
        }

        IntMatrix stack_codes(num_heads, cols);
        const DenseMatrix errors = gptq_core(stack, row_ucol, stack_grids, &stack_codes);

        for (int h = 0; h < num_heads; ++h) {
            const int layer_row = h * head_dim + j;
            for (int k = 0; k < cols; ++k) {
                result.codes.at(layer_row, k) = stack_codes.at(h, k);
                result.e_rows(layer_row, k) = errors(h, k);
                work[h](j, k) = stack(h, k);
            }
            row_update(work[h], errors.row(h), factors.heads[h].u_row, factors.heads[h].u_col, j);
        }
    }

    result.dequantized = dequantize(result.codes, grids);
    return result;
}

QuantResult boa_quantize_layer(LayerKind kind, const AttentionBlock& block, const DenseMatrix& w,
                               const HeadFactorSet& factors, const QuantConfig& config) {
    config.validate();
    block.validate();
    if (kind != factors.kind) {
        throw ShapeMismatch("boa_quantize_layer: factor set was built for " +
                            to_string(factors.kind) + ", not " + to_string(kind));
    }
    if (w.rows() != block.dim || w.cols() != block.dim) {
        throw ShapeMismatch("boa_quantize_layer: weight must be dim x dim");
    }
    require_finite(w, "boa_quantize_layer");

    QuantResult result;
    if (kind == LayerKind::kOut) {
        if (factors.heads.size() != 1) {
            throw ShapeMismatch("boa_quantize_layer: out expects a single factor entry");
        }
        const std::vector<QuantGrid> grids = fit_row_scales(w, factors.heads[0].h_col, config);
        DenseMatrix work = w;
        std::vector<const UpperTriangular*> row_ucol(w.rows(), &factors.heads[0].u_col);
        result.codes = IntMatrix(w.rows(), w.cols());
        result.e_rows = gptq_core(work, row_ucol, grids, &result.codes);
        result.grids = grids;
        result.dequantized = dequantize(result.codes, grids);
    } else {
        if (factors.heads.size() != static_cast<size_t>(block.num_heads)) {
            throw ShapeMismatch("boa_quantize_layer: expected one factor entry per head");
        }
        std::vector<QuantGrid> grids;
        grids.reserve(w.rows());
        for (int h = 0; h < block.num_heads; ++h) {
            const DenseMatrix w_head =
                submatrix(w, h * block.head_dim, (h + 1) * block.head_dim, 0, w.cols());
            const std::vector<QuantGrid> head_grids =
                fit_row_scales(w_head, factors.heads[h].h_col, config);
            grids.insert(grids.end(), head_grids.begin(), head_grids.end());
        }
        result = quantize_head_stacked(w, factors, grids);
    }

    const DenseMatrix delta = result.dequantized - w;
    if (!factors.input_gram.empty()) {
        result.metrics["layer_recon_error"] = gram_recon_error(delta, factors.input_gram);
    }
    if (kind == LayerKind::kOut) {
        result.metrics["quad_score"] =
            kron_quad_score(delta, factors.heads[0].h_col, factors.heads[0].h_row);
    } else {
        for (int h = 0; h < block.num_heads; ++h) {
            const DenseMatrix head_delta =
                submatrix(delta, h * block.head_dim, (h + 1) * block.head_dim, 0, delta.cols());
            result.metrics["quad_score_head_" + std::to_string(h)] =
                kron_quad_score(head_delta, factors.heads[h].h_col, factors.heads[h].h_row);
        }
    }
    return result;
}

} // namespace attnq
