#include "attnq/quant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace attnq {

std::string to_string(Method m) {
    switch (m) {
        case Method::kRtn: return "rtn";
        case Method::kGptq: return "gptq";
        case Method::kBoa: return "boa";
    }
    return "?";
}

std::string to_string(OutPolicy p) {
    return p == OutPolicy::kFull ? "full" : "per_head";
}

bool method_from_string(const std::string& s, Method& out) {
    if (s == "rtn") { out = Method::kRtn; return true; }
    if (s == "gptq") { out = Method::kGptq; return true; }
    if (s == "boa") { out = Method::kBoa; return true; }
    return false;
}

bool out_policy_from_string(const std::string& s, OutPolicy& out) {
    if (s == "full") { out = OutPolicy::kFull; return true; }
    if (s == "per_head") { out = OutPolicy::kPerHead; return true; }
    return false;
}

std::vector<double> make_clip_grid(double min_ratio, int steps) {
    if (!(min_ratio > 0.0) || min_ratio > 1.0 || steps < 1) {
        throw InvalidArgument("make_clip_grid: need 0 < min_ratio <= 1 and steps >= 1");
    }
    std::vector<double> grid;
    grid.reserve(steps);
    if (steps == 1) {
        grid.push_back(1.0);
        return grid;
    }
    for (int i = 0; i < steps; ++i) {
        grid.push_back(1.0 - static_cast<double>(i) * (1.0 - min_ratio) / (steps - 1));
    }
    return grid;
}

void QuantConfig::validate() const {
    if (bits != 2 && bits != 3 && bits != 4 && bits != 8) {
        throw InvalidArgument("QuantConfig: unsupported bit-width " + std::to_string(bits) +
                              " (supported: 2, 3, 4, 8)");
    }
    if (!(damp_fraction > 0.0)) {
        throw InvalidArgument("QuantConfig: damp_fraction must be positive");
    }
    if (clip_grid.empty()) {
        throw InvalidArgument("QuantConfig: clip grid is empty");
    }
    if (clip_grid.front() != 1.0) {
        throw InvalidArgument("QuantConfig: clip grid must start at 1.0");
    }
    for (size_t i = 0; i < clip_grid.size(); ++i) {
        if (!(clip_grid[i] > 0.0) || clip_grid[i] > 1.0 ||
            (i > 0 && clip_grid[i] >= clip_grid[i - 1])) {
            throw InvalidArgument("QuantConfig: clip grid must be descending in (0, 1]");
        }
    }
}

Quantized quantize_affine(double x, const QuantGrid& grid) {
    const long long raw = std::llround(x / grid.scale) + grid.zero_point;
    const int code = static_cast<int>(std::clamp(raw, 0ll, static_cast<long long>(grid.max_code())));
    return {code, grid.scale * (code - grid.zero_point)};
}

namespace {

QuantGrid minmax_grid(double lo, double hi, double ratio, int bits) {
    const double wmin = ratio * lo;
    const double wmax = ratio * hi;
    const int max_code = (1 << bits) - 1;
    QuantGrid grid;
    grid.bits = bits;
    grid.scale = (wmax - wmin) / max_code;
    grid.zero_point = static_cast<int>(
        std::clamp(std::llround(-wmin / grid.scale), 0ll, static_cast<long long>(max_code)));
    return grid;
}

// Grid that reproduces a constant row exactly. For c = 0 any positive scale
// works; otherwise put |c| one step from the zero-point.
QuantGrid degenerate_grid(double c, int bits) {
    QuantGrid grid;
    grid.bits = bits;
    if (c == 0.0) {
        grid.scale = 1.0;
        grid.zero_point = 0;
    } else {
        grid.scale = std::abs(c);
        grid.zero_point = c > 0.0 ? 0 : 1;
    }
    return grid;
}

double row_score(std::span<const double> row, const QuantGrid& grid, const DenseMatrix& h_col) {
    const int n = static_cast<int>(row.size());
    std::vector<double> dw(n);
    for (int i = 0; i < n; ++i) {
        dw[i] = row[i] - quantize_affine(row[i], grid).value;
    }
    return quadratic_form(dw, h_col);
}

} // namespace

std::vector<QuantGrid> fit_row_scales(const DenseMatrix& w, const DenseMatrix& h_col,
                                      const QuantConfig& config) {
    config.validate();
    if (h_col.rows() != h_col.cols() || w.cols() != h_col.rows()) {
        throw ShapeMismatch("fit_row_scales: h_col must be square of size w.cols()");
    }
    require_finite(w, "fit_row_scales");
    require_finite(h_col, "fit_row_scales");

    std::vector<QuantGrid> grids;
    grids.reserve(w.rows());
    for (int r = 0; r < w.rows(); ++r) {
        const auto row = w.row(r);
        const auto [lo_it, hi_it] = std::minmax_element(row.begin(), row.end());
        const double lo = *lo_it;
        const double hi = *hi_it;
        if (lo == hi) {
            grids.push_back(degenerate_grid(lo, config.bits));
            continue;
        }
        QuantGrid best;
        double best_score = std::numeric_limits<double>::infinity();
        for (double ratio : config.clip_grid) {
            const QuantGrid candidate = minmax_grid(lo, hi, ratio, config.bits);
            const double score = row_score(row, candidate, h_col);
            if (score < best_score) {
                best_score = score;
                best = candidate;
            }
        }
        grids.push_back(best);
    }
    return grids;
}

} // namespace attnq
