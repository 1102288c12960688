#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "attnq/io.hpp"
#include "attnq/model.hpp"
#include "test_support.hpp"

using namespace attnq;
using attnq::testing::random_matrix;

namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("attnq_io_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_bytes(const fs::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

} // namespace

TEST_CASE("tensor round trips are bit-exact") {
    const fs::path dir = scratch_dir("roundtrip");
    SplitMix64 rng(1);
    for (int trial = 0; trial < 8; ++trial) {
        const int rows = 1 + static_cast<int>(rng.next() % 5);
        const int cols = 1 + static_cast<int>(rng.next() % 5);
        const DenseMatrix m = random_matrix(rng, rows, cols);
        const fs::path path = dir / ("t" + std::to_string(trial) + ".btsr");
        write_matrix(path, m);
        const DenseMatrix back = read_matrix(path);
        REQUIRE(back.same_shape(m));
        CHECK(max_abs_diff(back, m) == 0.0);
        // A second write of the same data produces identical bytes.
        const fs::path again = dir / ("t" + std::to_string(trial) + "_again.btsr");
        write_matrix(again, m);
        CHECK(read_bytes(path) == read_bytes(again));
    }
}

TEST_CASE("f32 tensors round trip the narrowed values") {
    const fs::path dir = scratch_dir("f32");
    SplitMix64 rng(2);
    DenseMatrix m = random_matrix(rng, 3, 4);
    for (double& v : m.data()) {
        v = static_cast<float>(v);
    }
    write_matrix(dir / "t.btsr", m, TensorDtype::kF32);
    const TensorData back = read_tensor(dir / "t.btsr");
    CHECK(back.dtype == TensorDtype::kF32);
    for (size_t i = 0; i < back.values.size(); ++i) {
        CHECK(back.values[i] == m.data()[i]);
    }
}

TEST_CASE("the header layout is pinned byte for byte") {
    const fs::path dir = scratch_dir("header");
    const DenseMatrix m(2, 3, 0.0);
    write_matrix(dir / "t.btsr", m);
    const std::string bytes = read_bytes(dir / "t.btsr");
    REQUIRE(bytes.size() == 8 + 16 + 48);
    const unsigned char expected_header[8] = {0x42, 0x54, 0x53, 0x52, 0x01, 0x01, 0x02, 0x00};
    for (int i = 0; i < 8; ++i) {
        CHECK(static_cast<unsigned char>(bytes[i]) == expected_header[i]);
    }
    // dims as little-endian u64: 2 then 3.
    CHECK(static_cast<unsigned char>(bytes[8]) == 2);
    CHECK(static_cast<unsigned char>(bytes[16]) == 3);
    for (int i = 9; i < 16; ++i) {
        if (i != 16) {
            CHECK(bytes[i] == 0);
        }
    }
    for (int i = 17; i < 24; ++i) {
        CHECK(bytes[i] == 0);
    }
}

TEST_CASE("malformed tensor files raise distinct errors") {
    const fs::path dir = scratch_dir("errors");
    const fs::path good = dir / "good.btsr";
    write_matrix(good, DenseMatrix(2, 3, 1.5));
    const std::string bytes = read_bytes(good);

    SUBCASE("bad magic") {
        std::string bad = bytes;
        bad[0] = 'X';
        write_bytes(dir / "bad.btsr", bad);
        CHECK_THROWS_AS(read_tensor(dir / "bad.btsr"), BadMagic);
    }
    SUBCASE("unsupported version") {
        std::string bad = bytes;
        bad[4] = 2;
        write_bytes(dir / "bad.btsr", bad);
        CHECK_THROWS_AS(read_tensor(dir / "bad.btsr"), UnsupportedVersion);
    }
    SUBCASE("unsupported dtype") {
        std::string bad = bytes;
        bad[5] = 7;
        write_bytes(dir / "bad.btsr", bad);
        CHECK_THROWS_AS(read_tensor(dir / "bad.btsr"), UnsupportedDtype);
    }
    SUBCASE("bad rank") {
        std::string bad = bytes;
        bad[6] = 5;
        write_bytes(dir / "bad.btsr", bad);
        CHECK_THROWS_AS(read_tensor(dir / "bad.btsr"), DimMismatch);
    }
    SUBCASE("nonzero reserved byte") {
        std::string bad = bytes;
        bad[7] = 1;
        write_bytes(dir / "bad.btsr", bad);
        CHECK_THROWS_AS(read_tensor(dir / "bad.btsr"), UnsupportedVersion);
    }
    SUBCASE("truncated payload") {
        write_bytes(dir / "bad.btsr", bytes.substr(0, bytes.size() - 5));
        CHECK_THROWS_AS(read_tensor(dir / "bad.btsr"), TruncatedPayload);
    }
    SUBCASE("truncated header") {
        write_bytes(dir / "bad.btsr", bytes.substr(0, 6));
        CHECK_THROWS_AS(read_tensor(dir / "bad.btsr"), TruncatedPayload);
    }
    SUBCASE("trailing bytes") {
        write_bytes(dir / "bad.btsr", bytes + "xx");
        CHECK_THROWS_AS(read_tensor(dir / "bad.btsr"), DimMismatch);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(read_tensor(dir / "absent.btsr"), IoFailure);
    }
}

TEST_CASE("rank-1 and rank-3 tensors are supported") {
    const fs::path dir = scratch_dir("ranks");
    TensorData t;
    t.dims = {5};
    t.values = {1, 2, 3, 4, 5};
    write_tensor(dir / "v.btsr", t);
    const TensorData v = read_tensor(dir / "v.btsr");
    CHECK(v.dims == std::vector<uint64_t>{5});
    CHECK(v.values == t.values);
    CHECK_THROWS_AS(read_matrix(dir / "v.btsr"), DimMismatch);

    TensorData stack;
    stack.dims = {2, 3, 4};
    stack.values.resize(24);
    for (size_t i = 0; i < 24; ++i) {
        stack.values[i] = static_cast<double>(i);
    }
    write_tensor(dir / "s.btsr", stack);
    const TensorData s = read_tensor(dir / "s.btsr");
    CHECK(s.dims == stack.dims);
    CHECK(s.values == stack.values);

    TensorData bad;
    bad.dims = {2, 0};
    CHECK_THROWS_AS(write_tensor(dir / "bad.btsr", bad), DimMismatch);
}

TEST_CASE("toy model generation is reproducible byte for byte") {
    const fs::path a = scratch_dir("toy_a");
    const fs::path b = scratch_dir("toy_b");
    ToyModelSpec spec;
    spec.dim = 4;
    spec.num_heads = 2;
    spec.seq_len = 8;
    spec.num_samples = 2;
    spec.seed = 7;
    gen_toy_model(spec, a);
    gen_toy_model(spec, b);
    for (const auto& entry : fs::directory_iterator(a)) {
        const fs::path other = b / entry.path().filename();
        REQUIRE(fs::exists(other));
        CHECK(read_bytes(entry.path()) == read_bytes(other));
    }
    // A different seed changes the payload.
    const fs::path c = scratch_dir("toy_c");
    spec.seed = 8;
    gen_toy_model(spec, c);
    CHECK(read_bytes(a / "w_q.btsr") != read_bytes(c / "w_q.btsr"));
}

TEST_CASE("toy model shapes and manifest match the request") {
    const fs::path dir = scratch_dir("toy_shapes");
    ToyModelSpec spec;
    spec.dim = 4;
    spec.num_heads = 2;
    spec.seq_len = 8;
    spec.num_samples = 2;
    spec.seed = 3;
    const ModelManifest manifest = gen_toy_model(spec, dir);
    CHECK(manifest.head_dim == 2);
    CHECK(manifest.rng_name == "splitmix64");
    CHECK(manifest.calibration_paths.size() == 2);

    const ModelManifest reread = read_manifest(dir / "manifest.json");
    CHECK(reread.dim == 4);
    CHECK(reread.seed == 3);
    const LoadedModel model = load_model(reread, dir);
    CHECK(model.block.w_q.rows() == 4);
    CHECK(model.calib.samples.size() == 2);
    CHECK(model.calib.samples[0].cols() == 8);

    // Softmax rows of the generated model are stochastic.
    const ForwardTrace trace = mha_forward(model.block, model.calib.samples[0]);
    for (const HeadTrace& head : trace.heads) {
        for (int i = 0; i < head.attn.rows(); ++i) {
            double sum = 0.0;
            for (int j = 0; j < head.attn.cols(); ++j) {
                sum += head.attn(i, j);
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("toy model generation validates its dims") {
    const fs::path dir = scratch_dir("toy_bad");
    ToyModelSpec spec;
    spec.dim = 5;
    spec.num_heads = 2;
    CHECK_THROWS_AS(gen_toy_model(spec, dir), InvalidDims);
    spec.dim = 2;
    spec.num_heads = 2; // head_dim 1 < 2
    CHECK_THROWS_AS(gen_toy_model(spec, dir), InvalidDims);
    spec.dim = 4;
    spec.num_samples = 0;
    CHECK_THROWS_AS(gen_toy_model(spec, dir), InvalidDims);
}

TEST_CASE("manifest validation raises named errors") {
    const fs::path dir = scratch_dir("manifest");
    ToyModelSpec spec;
    spec.seed = 5;
    const ModelManifest manifest = gen_toy_model(spec, dir);

    SUBCASE("missing weight file") {
        ModelManifest broken = manifest;
        broken.w_k_path = "absent.btsr";
        CHECK_THROWS_AS(load_model(broken, dir), ManifestError);
    }
    SUBCASE("dimension mismatch") {
        write_matrix(dir / "wrong.btsr", DenseMatrix(3, 3, 0.0));
        ModelManifest broken = manifest;
        broken.w_v_path = "wrong.btsr";
        CHECK_THROWS_AS(load_model(broken, dir), DimMismatch);
    }
    SUBCASE("missing manifest fields") {
        std::ofstream out(dir / "broken.json");
        out << "{\"dim\": 4}\n";
        out.close();
        CHECK_THROWS_AS(read_manifest(dir / "broken.json"), ManifestError);
    }
    SUBCASE("invalid json") {
        std::ofstream out(dir / "garbage.json");
        out << "not json";
        out.close();
        CHECK_THROWS_AS(read_manifest(dir / "garbage.json"), ManifestError);
    }
    SUBCASE("inconsistent geometry") {
        ModelManifest broken = manifest;
        broken.head_dim = 3;
        write_manifest(dir / "inconsistent.json", broken);
        CHECK_THROWS_AS(read_manifest(dir / "inconsistent.json"), ManifestError);
    }
    SUBCASE("no calibration entries") {
        ModelManifest broken = manifest;
        broken.calibration_paths.clear();
        CHECK_THROWS_AS(load_model(broken, dir), EmptyCalibration);
    }
}

TEST_CASE("reports round trip and stay finite") {
    const fs::path dir = scratch_dir("report");
    Report report;
    report.config = {{"command", "quantize"}, {"bits", 3}};
    report.seed = 11;
    report.layer_metrics["w_q"]["layer_recon_error"] = 1.25;
    report.metrics["attention_recon_error"] = 0.0;

    write_report(dir / "report.json", report);
    const Report back = read_report(dir / "report.json");
    CHECK(back.schema_version == report.schema_version);
    CHECK(back.seed == report.seed);
    CHECK(back.layer_metrics == report.layer_metrics);
    CHECK(back.metrics == report.metrics);
    CHECK(back.metrics.at("attention_recon_error") == 0.0);

    SUBCASE("empty metrics are a valid document") {
        Report empty;
        write_report(dir / "empty.json", empty);
        const Report reread = read_report(dir / "empty.json");
        CHECK(reread.schema_version == 1);
        CHECK(reread.metrics.empty());
    }
    SUBCASE("non-finite metrics are rejected") {
        Report bad;
        bad.metrics["boom"] = std::numeric_limits<double>::infinity();
        CHECK_THROWS_AS(write_report(dir / "bad.json", bad), InvalidArgument);
    }
    SUBCASE("serialization is deterministic") {
        write_report(dir / "a.json", report);
        write_report(dir / "b.json", report);
        CHECK(read_bytes(dir / "a.json") == read_bytes(dir / "b.json"));
    }
}
