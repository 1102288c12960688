#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "attnq/matrix.hpp"
#include "attnq/model.hpp"

#include "json.hpp"

namespace attnq {

// Binary tensor file ("BTSR"): 4-byte magic, version byte (1), dtype byte
// (0 = float32, 1 = float64), rank byte (1..3), one reserved zero byte,
// rank little-endian u64 dims, then the row-major payload, little-endian on
// every host.
enum class TensorDtype : uint8_t { kF32 = 0, kF64 = 1 };

struct TensorData {
    TensorDtype dtype = TensorDtype::kF64;
    std::vector<uint64_t> dims;
    std::vector<double> values; // row-major; f32 payloads are widened on read
};

void write_tensor(const std::filesystem::path& path, const TensorData& tensor);
TensorData read_tensor(const std::filesystem::path& path);

void write_matrix(const std::filesystem::path& path, const DenseMatrix& m,
                  TensorDtype dtype = TensorDtype::kF64);
DenseMatrix read_matrix(const std::filesystem::path& path);

// Model manifest: geometry, PRNG provenance, and relative tensor paths.
struct ModelManifest {
    int dim = 0;
    int num_heads = 0;
    int head_dim = 0;
    bool causal = false;
    std::string rng_name = "splitmix64";
    uint64_t seed = 0;
    std::string w_q_path, w_k_path, w_v_path, w_out_path;
    std::vector<std::string> calibration_paths;
};

ModelManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const ModelManifest& manifest);

struct LoadedModel {
    AttentionBlock block;
    CalibrationSet calib;
};

// Resolves the manifest's relative paths against base_dir and checks every
// dimension; all failure modes raise named errors.
LoadedModel load_model(const ModelManifest& manifest, const std::filesystem::path& base_dir);

struct ToyModelSpec {
    int dim = 4;
    int num_heads = 2;
    int seq_len = 8;
    int num_samples = 2;
    bool causal = false;
    uint64_t seed = 0;
};

// Writes weight and calibration tensors plus a manifest into out_dir.
// Weights are iid normal scaled by 1/sqrt(dim); calibration samples iid
// standard normal; byte-for-byte reproducible from the seed.
ModelManifest gen_toy_model(const ToyModelSpec& spec, const std::filesystem::path& out_dir);

// Run report. Timing values are wall-clock and therefore volatile; callers
// that need byte-identical outputs pass them only to the printed copy.
struct Report {
    int schema_version = 1;
    nlohmann::json config = nlohmann::json::object();
    uint64_t seed = 0;
    std::map<std::string, std::map<std::string, double>> layer_metrics;
    std::map<std::string, double> metrics;
    std::map<std::string, double> timings;

    nlohmann::json to_json() const;
    static Report from_json(const nlohmann::json& j);
};

// Deterministic serialization (sorted keys); every metric must be finite.
void write_report(const std::filesystem::path& path, const Report& report);
Report read_report(const std::filesystem::path& path);

} // namespace attnq
