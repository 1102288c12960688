#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "attnq/matrix.hpp"

namespace attnq {

// Uniform affine grid: representable values are scale * (code - zero_point)
// for codes in [0, 2^bits - 1].
struct QuantGrid {
    int bits = 3;
    double scale = 1.0;
    int zero_point = 0;

    int max_code() const { return (1 << bits) - 1; }
};

enum class Method { kRtn, kGptq, kBoa };
enum class OutPolicy { kFull, kPerHead };

std::string to_string(Method m);
std::string to_string(OutPolicy p);
bool method_from_string(const std::string& s, Method& out);
bool out_policy_from_string(const std::string& s, OutPolicy& out);

// Ratios from 1.0 down to min_ratio, inclusive, evenly spaced.
std::vector<double> make_clip_grid(double min_ratio, int steps);

struct QuantConfig {
    int bits = 3;
    Method method = Method::kBoa;
    double damp_fraction = 0.01;
    std::vector<double> clip_grid = make_clip_grid(0.5, 51);
    OutPolicy out_policy = OutPolicy::kFull;
    uint64_t seed = 0;

    // bits in {2,3,4,8}; clip grid nonempty, descending, containing 1.0.
    void validate() const;
};

struct Quantized {
    int code = 0;
    double value = 0.0;
};

// code = clamp(round(x/s) + z, 0, 2^bits - 1), rounding half away from zero.
Quantized quantize_affine(double x, const QuantGrid& grid);

// Per-row asymmetric min/max grids searched over the clip-ratio ladder,
// scored by dw · h_col · dwᵀ; ties break toward the larger ratio. Constant
// rows take a degenerate grid that represents them exactly.
std::vector<QuantGrid> fit_row_scales(const DenseMatrix& w, const DenseMatrix& h_col,
                                      const QuantConfig& config);

} // namespace attnq
