#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "attnq/linalg.hpp"
#include "attnq/oracle.hpp"
#include "attnq/solver.hpp"
#include "test_support.hpp"

using namespace attnq;
using attnq::testing::random_block;
using attnq::testing::random_matrix;
using attnq::testing::random_spd;

TEST_CASE("fd hessian of identity factors is twice the identity") {
    const DenseMatrix fd =
        fd_quadratic_hessian(DenseMatrix::identity(3), DenseMatrix::identity(2), 3, 2);
    CHECK(relative_frobenius_error(fd, scaled(DenseMatrix::identity(6), 2.0)) < 1e-9);
}

TEST_CASE("fd hessian vanishes when the left factor is zero") {
    const DenseMatrix fd = fd_quadratic_hessian(DenseMatrix(2, 2), DenseMatrix::identity(3), 2, 3);
    CHECK(frobenius_norm(fd) < 1e-9);
}

TEST_CASE("fd hessian matches the kronecker closed form") {
    for (int seed = 0; seed < 10; ++seed) {
        SplitMix64 rng(100 + seed);
        const DenseMatrix m1 = random_matrix(rng, 3, 2);
        const DenseMatrix m2 = random_matrix(rng, 2, 3);
        const DenseMatrix fd = fd_quadratic_hessian(m1, m2, 2, 2);
        const DenseMatrix closed = scaled(kron(gram_rows(m2), gram_cols(m1)), 2.0);
        CHECK(relative_frobenius_error(fd, closed) < 1e-5);
    }
}

TEST_CASE("fd hessian output is symmetric and PSD under random probes") {
    SplitMix64 rng(1);
    const DenseMatrix m1 = random_matrix(rng, 3, 3);
    const DenseMatrix m2 = random_matrix(rng, 3, 3);
    const DenseMatrix fd = fd_quadratic_hessian(m1, m2, 3, 3);
    CHECK(relative_frobenius_error(fd, transpose(fd)) < 1e-6);
    const double scale = frobenius_norm(fd);
    for (int trial = 0; trial < 16; ++trial) {
        const DenseMatrix v = random_matrix(rng, 9, 1);
        CHECK(quadratic_form(v.data(), fd) >= -1e-6 * scale);
    }
}

TEST_CASE("fd hessian enforces the element cap") {
    CHECK_THROWS_AS(fd_quadratic_hessian(DenseMatrix::identity(20), DenseMatrix::identity(20),
                                         20, 20),
                    DimensionOverflow);
}

TEST_CASE("attention hessian for the out projection matches its factors") {
    for (int seed = 0; seed < 3; ++seed) {
        SplitMix64 rng(200 + seed);
        const AttentionBlock block = random_block(rng, 4, 2);
        const DenseMatrix x = random_matrix(rng, 4, 3);
        const CalibrationSet calib{{x}};
        for (int head = 0; head < 2; ++head) {
            const HessianFactors f = build_factors(LayerKind::kOut, block, calib, head);
            const DenseMatrix fd = fd_attention_hessian(block, x, LayerKind::kOut, head);
            CHECK(relative_frobenius_error(fd, kron(f.h_col, f.h_row)) < 1e-5);
        }
    }
}

TEST_CASE("attention hessian for the value projection matches its factors") {
    for (int seed = 0; seed < 3; ++seed) {
        SplitMix64 rng(300 + seed);
        const AttentionBlock block = random_block(rng, 4, 2);
        const DenseMatrix x = random_matrix(rng, 4, 3);
        const CalibrationSet calib{{x}};
        for (int head = 0; head < 2; ++head) {
            const HessianFactors f = build_factors(LayerKind::kValue, block, calib, head);
            const DenseMatrix fd = fd_attention_hessian(block, x, LayerKind::kValue, head);
            CHECK(relative_frobenius_error(fd, kron(f.h_col, f.h_row)) < 1e-5);
        }
    }
}

TEST_CASE("query hessian is zero for a single token with zero attention weights") {
    SplitMix64 rng(2);
    AttentionBlock block = random_block(rng, 4, 2);
    block.w_q = DenseMatrix(4, 4);
    block.w_k = DenseMatrix(4, 4);
    const DenseMatrix x = random_matrix(rng, 4, 1);
    const DenseMatrix fd = fd_attention_hessian(block, x, LayerKind::kQuery, 0);
    CHECK(frobenius_norm(fd) < 1e-8);
}

TEST_CASE("query gauss-newton curvature agrees with a direct second difference") {
    SplitMix64 rng(3);
    const AttentionBlock block = random_block(rng, 4, 2);
    const DenseMatrix x = random_matrix(rng, 4, 3);
    const int head = 0;
    const DenseMatrix gauss_newton = fd_attention_hessian(block, x, LayerKind::kQuery, head);

    // Direct central-difference Hessian of the scalar reconstruction error.
    const CalibrationSet calib{{x}};
    const int n = block.head_dim * block.dim;
    const double h = 1e-3;
    auto error_at = [&](const DenseMatrix& delta) {
        AttentionBlock probe = block;
        for (int p = 0; p < n; ++p) {
            probe.w_q(head * block.head_dim + p % block.head_dim, p / block.head_dim) +=
                delta.data()[p];
        }
        return attention_recon_error(block, probe, calib);
    };
    DenseMatrix direct(n, n);
    DenseMatrix delta(1, n);
    for (int a = 0; a < n; ++a) {
        delta.data()[a] = h;
        const double fp = error_at(delta);
        delta.data()[a] = -h;
        const double fm = error_at(delta);
        delta.data()[a] = 0.0;
        direct(a, a) = (fp + fm) / (h * h);
        for (int b = a + 1; b < n; ++b) {
            delta.data()[a] = h;
            delta.data()[b] = h;
            const double fpp = error_at(delta);
            delta.data()[b] = -h;
            const double fpm = error_at(delta);
            delta.data()[a] = -h;
            delta.data()[b] = h;
            const double fmp = error_at(delta);
            delta.data()[b] = -h;
            const double fmm = error_at(delta);
            delta.data()[a] = 0.0;
            delta.data()[b] = 0.0;
            const double v = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
            direct(a, b) = v;
            direct(b, a) = v;
        }
    }
    CHECK(relative_frobenius_error(gauss_newton, direct) < 1e-3);
}

TEST_CASE("attention hessian rejects oversized problems") {
    SplitMix64 rng(4);
    const AttentionBlock block = random_block(rng, 16, 2);
    const DenseMatrix x = random_matrix(rng, 16, 3);
    CHECK_THROWS_AS(fd_attention_hessian(block, x, LayerKind::kValue, 0), DimensionOverflow);
}

TEST_CASE("surgeon updates on on-grid vectors do nothing") {
    SplitMix64 rng(5);
    const DenseMatrix h = random_spd(rng, 4, 2.0);
    const QuantGrid grid{2, 0.5, 1};
    std::vector<double> w(4);
    for (double& v : w) {
        v = grid.scale * (static_cast<double>(rng.next() % 4) - grid.zero_point);
    }
    const std::vector<int> order = {0, 1, 2, 3};
    const ObsResult result = obs_full_update(h, w, order, std::vector<QuantGrid>(4, grid));
    CHECK(result.loss == 0.0);
    for (int i = 0; i < 4; ++i) {
        CHECK(result.weights[i] == w[i]);
    }
}

TEST_CASE("a single-entry problem reduces to nearest rounding") {
    const DenseMatrix h = DenseMatrix::from_rows({{3.0}});
    const QuantGrid grid{2, 0.5, 1};
    const std::vector<double> w = {0.6};
    const std::vector<int> order = {0};
    const std::vector<QuantGrid> grids = {grid};
    const ObsResult result = obs_full_update(h, w, order, grids);
    const Quantized q = quantize_affine(0.6, grid);
    CHECK(result.codes[0] == q.code);
    CHECK(result.weights[0] == q.value);
}

TEST_CASE("surgeon updates beat plain rounding on almost every draw") {
    int wins = 0;
    const int draws = 100;
    for (int seed = 0; seed < draws; ++seed) {
        SplitMix64 rng(600 + seed);
        const DenseMatrix h = random_spd(rng, 4, 1.0);
        std::vector<double> w(4);
        for (double& v : w) {
            v = rng.next_gaussian();
        }
        const QuantGrid grid{2, 0.8, 2};
        const std::vector<QuantGrid> grids(4, grid);
        const std::vector<int> order = {0, 1, 2, 3};
        const ObsResult obs = obs_full_update(h, w, order, grids);

        std::vector<double> rtn_delta(4);
        for (int i = 0; i < 4; ++i) {
            rtn_delta[i] = quantize_affine(w[i], grid).value - w[i];
        }
        const double rtn_loss = quadratic_form(rtn_delta, h);
        if (obs.loss <= rtn_loss + 1e-12) {
            ++wins;
        }
    }
    CHECK(wins >= 95);
}

TEST_CASE("surgeon updates accept permuted processing orders") {
    SplitMix64 rng(6);
    const DenseMatrix h = random_spd(rng, 5, 3.0);
    std::vector<double> w(5);
    for (double& v : w) {
        v = rng.next_gaussian();
    }
    const QuantGrid grid{3, 0.4, 3};
    const std::vector<int> order = {3, 0, 4, 1, 2};
    const ObsResult result = obs_full_update(h, w, order, std::vector<QuantGrid>(5, grid));
    CHECK(result.path_deviation <= 1e-8);
    CHECK(result.weights.size() == 5);
}

TEST_CASE("obs rejects malformed orders") {
    const DenseMatrix h = DenseMatrix::identity(3);
    const std::vector<double> w = {0.1, 0.2, 0.3};
    const QuantGrid grid{2, 0.5, 1};
    const std::vector<int> bad_order = {0, 0, 2};
    CHECK_THROWS_AS(obs_full_update(h, w, bad_order, std::vector<QuantGrid>(3, grid)),
                    InvalidArgument);
}

TEST_CASE("exhaustive search returns zero loss for on-grid vectors") {
    const QuantGrid grid{2, 0.5, 1};
    std::vector<double> w;
    for (int c : {0, 2, 3}) {
        w.push_back(grid.scale * (c - grid.zero_point));
    }
    const ExhaustiveResult best =
        exhaustive_min_assignment(DenseMatrix::identity(3), w, std::vector<QuantGrid>(3, grid));
    CHECK(best.loss == 0.0);
    CHECK(best.codes == std::vector<int>{0, 2, 3});
}

TEST_CASE("a diagonal hessian makes the exhaustive optimum separable") {
    SplitMix64 rng(7);
    DenseMatrix h(4, 4);
    for (int i = 0; i < 4; ++i) {
        h(i, i) = 1.0 + rng.next_unit();
    }
    std::vector<double> w(4);
    for (double& v : w) {
        v = rng.next_gaussian();
    }
    const QuantGrid grid{2, 0.6, 2};
    const ExhaustiveResult best =
        exhaustive_min_assignment(h, w, std::vector<QuantGrid>(4, grid));
    for (int i = 0; i < 4; ++i) {
        CHECK(best.codes[i] == quantize_affine(w[i], grid).code);
    }
}

TEST_CASE("greedy surgeon never beats the exhaustive optimum") {
    for (int seed = 0; seed < 10; ++seed) {
        SplitMix64 rng(700 + seed);
        const DenseMatrix h = random_spd(rng, 6, 3.0);
        std::vector<double> w(6);
        for (double& v : w) {
            v = rng.next_gaussian();
        }
        const QuantGrid grid{2, 0.8, 2};
        const std::vector<QuantGrid> grids(6, grid);
        const std::vector<int> order = {0, 1, 2, 3, 4, 5};
        const ObsResult obs = obs_full_update(h, w, order, grids);
        const ExhaustiveResult best = exhaustive_min_assignment(h, w, grids);
        CHECK(obs.loss >= best.loss);
    }
}

TEST_CASE("exhaustive search rejects oversized spaces") {
    const int n = 6;
    const DenseMatrix h = DenseMatrix::identity(n);
    const std::vector<double> w(n, 0.0);
    const std::vector<QuantGrid> grids(n, QuantGrid{8, 0.1, 0}); // 256^6 combos
    CHECK_THROWS_AS(exhaustive_min_assignment(h, w, grids), SearchSpaceTooLarge);
}

TEST_CASE("the validation suite passes at the default tiny dims") {
    const auto checks = run_validation(4, 2, 3);
    for (const ValidationCheck& check : checks) {
        INFO(check.name, ": ", check.detail);
        CHECK(check.passed);
    }
}
