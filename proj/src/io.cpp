#include "attnq/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "attnq/rng.hpp"

namespace attnq {

namespace {

constexpr char kMagic[4] = {'B', 'T', 'S', 'R'};
constexpr uint8_t kVersion = 1;

void append_u64_le(std::string& buf, uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
}

void append_u32_le(std::string& buf, uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
}

uint64_t parse_u64_le(const unsigned char* p) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v |= static_cast<uint64_t>(p[i]) << (8 * i);
    }
    return v;
}

uint32_t parse_u32_le(const unsigned char* p) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<uint32_t>(p[i]) << (8 * i);
    }
    return v;
}

size_t element_size(TensorDtype dtype) {
    return dtype == TensorDtype::kF32 ? 4 : 8;
}

} // namespace

void write_tensor(const std::filesystem::path& path, const TensorData& tensor) {
    if (tensor.dims.empty() || tensor.dims.size() > 3) {
        throw DimMismatch("write_tensor: rank must be 1, 2, or 3");
    }
    uint64_t count = 1;
    for (uint64_t d : tensor.dims) {
        if (d == 0) {
            throw DimMismatch("write_tensor: zero-sized dimension");
        }
        count *= d;
    }
    if (tensor.values.size() != count) {
        throw DimMismatch("write_tensor: payload length does not match dims");
    }
    for (double v : tensor.values) {
        if (!std::isfinite(v)) {
            throw InvalidArgument("write_tensor: non-finite value");
        }
    }

    std::string buf;
    buf.reserve(8 + 8 * tensor.dims.size() + element_size(tensor.dtype) * tensor.values.size());
    buf.append(kMagic, 4);
    buf.push_back(static_cast<char>(kVersion));
    buf.push_back(static_cast<char>(tensor.dtype));
    buf.push_back(static_cast<char>(tensor.dims.size()));
    buf.push_back(0); // reserved
    for (uint64_t d : tensor.dims) {
        append_u64_le(buf, d);
    }
    if (tensor.dtype == TensorDtype::kF64) {
        for (double v : tensor.values) {
            append_u64_le(buf, std::bit_cast<uint64_t>(v));
        }
    } else {
        for (double v : tensor.values) {
            append_u32_le(buf, std::bit_cast<uint32_t>(static_cast<float>(v)));
        }
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoFailure("write_tensor: cannot open " + path.string());
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) {
        throw IoFailure("write_tensor: short write to " + path.string());
    }
}

TensorData read_tensor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoFailure("read_tensor: cannot open " + path.string());
    }
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto* p = reinterpret_cast<const unsigned char*>(buf.data());

    if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0) {
        throw BadMagic("read_tensor: bad magic in " + path.string());
    }
    if (buf.size() < 8) {
        throw TruncatedPayload("read_tensor: header truncated in " + path.string());
    }
    if (p[4] != kVersion) {
        throw UnsupportedVersion("read_tensor: version " + std::to_string(p[4]));
    }
    if (p[5] != 0 && p[5] != 1) {
        throw UnsupportedDtype("read_tensor: dtype byte " + std::to_string(p[5]));
    }
    const auto dtype = static_cast<TensorDtype>(p[5]);
    const int rank = p[6];
    if (rank < 1 || rank > 3) {
        throw DimMismatch("read_tensor: rank " + std::to_string(rank));
    }
    if (p[7] != 0) {
        throw UnsupportedVersion("read_tensor: nonzero reserved byte");
    }
    if (buf.size() < 8 + 8 * static_cast<size_t>(rank)) {
        throw TruncatedPayload("read_tensor: dims truncated in " + path.string());
    }

    TensorData tensor;
    tensor.dtype = dtype;
    uint64_t count = 1;
    for (int i = 0; i < rank; ++i) {
        const uint64_t d = parse_u64_le(p + 8 + 8 * i);
        if (d == 0 || d > (uint64_t(1) << 32)) {
            throw DimMismatch("read_tensor: invalid dimension " + std::to_string(d));
        }
        tensor.dims.push_back(d);
        count *= d;
    }
    const size_t header = 8 + 8 * static_cast<size_t>(rank);
    const size_t expected = header + element_size(dtype) * count;
    if (buf.size() < expected) {
        throw TruncatedPayload("read_tensor: payload truncated (" + std::to_string(buf.size()) +
                               " of " + std::to_string(expected) + " bytes)");
    }
    if (buf.size() > expected) {
        throw DimMismatch("read_tensor: trailing bytes after payload");
    }

    tensor.values.resize(count);
    if (dtype == TensorDtype::kF64) {
        for (uint64_t i = 0; i < count; ++i) {
            tensor.values[i] = std::bit_cast<double>(parse_u64_le(p + header + 8 * i));
        }
    } else {
        for (uint64_t i = 0; i < count; ++i) {
            tensor.values[i] = std::bit_cast<float>(parse_u32_le(p + header + 4 * i));
        }
    }
    return tensor;
}

void write_matrix(const std::filesystem::path& path, const DenseMatrix& m, TensorDtype dtype) {
    TensorData tensor;
    tensor.dtype = dtype;
    tensor.dims = {static_cast<uint64_t>(m.rows()), static_cast<uint64_t>(m.cols())};
    tensor.values = m.data();
    write_tensor(path, tensor);
}

DenseMatrix read_matrix(const std::filesystem::path& path) {
    TensorData tensor = read_tensor(path);
    if (tensor.dims.size() != 2) {
        throw DimMismatch("read_matrix: expected rank 2, got rank " +
                          std::to_string(tensor.dims.size()));
    }
    return DenseMatrix(static_cast<int>(tensor.dims[0]), static_cast<int>(tensor.dims[1]),
                       std::move(tensor.values));
}

// ---------------------------------------------------------------------------
// Manifest.

namespace {

nlohmann::json parse_json_file(const std::filesystem::path& path, const char* what) {
    std::ifstream in(path);
    if (!in) {
        throw IoFailure(std::string(what) + ": cannot open " + path.string());
    }
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) {
        throw ManifestError(std::string(what) + ": invalid JSON in " + path.string());
    }
    return j;
}

template <typename T>
T require_field(const nlohmann::json& j, const char* key, const char* what) {
    if (!j.contains(key)) {
        throw ManifestError(std::string(what) + ": missing field '" + key + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ManifestError(std::string(what) + ": field '" + key + "' has the wrong type");
    }
}

} // namespace

ModelManifest read_manifest(const std::filesystem::path& path) {
    const nlohmann::json j = parse_json_file(path, "read_manifest");
    ModelManifest m;
    m.dim = require_field<int>(j, "dim", "manifest");
    m.num_heads = require_field<int>(j, "num_heads", "manifest");
    m.head_dim = require_field<int>(j, "head_dim", "manifest");
    m.causal = require_field<bool>(j, "causal", "manifest");
    m.rng_name = require_field<std::string>(j, "rng", "manifest");
    m.seed = require_field<uint64_t>(j, "seed", "manifest");
    const nlohmann::json weights = require_field<nlohmann::json>(j, "weights", "manifest");
    m.w_q_path = require_field<std::string>(weights, "w_q", "manifest.weights");
    m.w_k_path = require_field<std::string>(weights, "w_k", "manifest.weights");
    m.w_v_path = require_field<std::string>(weights, "w_v", "manifest.weights");
    m.w_out_path = require_field<std::string>(weights, "w_out", "manifest.weights");
    m.calibration_paths =
        require_field<std::vector<std::string>>(j, "calibration", "manifest");
    if (m.dim <= 0 || m.num_heads <= 0 || m.head_dim <= 0 || m.dim != m.num_heads * m.head_dim) {
        throw ManifestError("manifest: inconsistent dims (dim must equal num_heads * head_dim)");
    }
    return m;
}

void write_manifest(const std::filesystem::path& path, const ModelManifest& manifest) {
    nlohmann::json j;
    j["dim"] = manifest.dim;
    j["num_heads"] = manifest.num_heads;
    j["head_dim"] = manifest.head_dim;
    j["causal"] = manifest.causal;
    j["rng"] = manifest.rng_name;
    j["seed"] = manifest.seed;
    j["weights"] = {{"w_q", manifest.w_q_path},
                    {"w_k", manifest.w_k_path},
                    {"w_v", manifest.w_v_path},
                    {"w_out", manifest.w_out_path}};
    j["calibration"] = manifest.calibration_paths;

    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoFailure("write_manifest: cannot open " + path.string());
    }
    out << j.dump(2) << "\n";
    if (!out) {
        throw IoFailure("write_manifest: short write to " + path.string());
    }
}

LoadedModel load_model(const ModelManifest& manifest, const std::filesystem::path& base_dir) {
    auto load_weight = [&](const std::string& rel, const char* name) {
        const std::filesystem::path full = base_dir / rel;
        if (!std::filesystem::exists(full)) {
            throw ManifestError(std::string("load_model: ") + name + " file missing: " +
                                full.string());
        }
        DenseMatrix m = read_matrix(full);
        if (m.rows() != manifest.dim || m.cols() != manifest.dim) {
            throw DimMismatch(std::string("load_model: ") + name + " must be dim x dim");
        }
        return m;
    };

    LoadedModel model;
    model.block.dim = manifest.dim;
    model.block.num_heads = manifest.num_heads;
    model.block.head_dim = manifest.head_dim;
    model.block.causal = manifest.causal;
    model.block.w_q = load_weight(manifest.w_q_path, "w_q");
    model.block.w_k = load_weight(manifest.w_k_path, "w_k");
    model.block.w_v = load_weight(manifest.w_v_path, "w_v");
    model.block.w_out = load_weight(manifest.w_out_path, "w_out");
    model.block.validate();

    if (manifest.calibration_paths.empty()) {
        throw EmptyCalibration("load_model: manifest lists no calibration tensors");
    }
    for (const std::string& rel : manifest.calibration_paths) {
        const std::filesystem::path full = base_dir / rel;
        if (!std::filesystem::exists(full)) {
            throw ManifestError("load_model: calibration file missing: " + full.string());
        }
        DenseMatrix x = read_matrix(full);
        if (x.rows() != manifest.dim) {
            throw DimMismatch("load_model: calibration sample must have dim rows");
        }
        model.calib.samples.push_back(std::move(x));
    }
    return model;
}

// ---------------------------------------------------------------------------
// Toy model generation.

ModelManifest gen_toy_model(const ToyModelSpec& spec, const std::filesystem::path& out_dir) {
    const int head_dim = spec.num_heads > 0 ? spec.dim / spec.num_heads : 0;
    if (spec.dim <= 0 || spec.num_heads <= 0 || spec.dim % spec.num_heads != 0 || head_dim < 2) {
        throw InvalidDims("gen_toy_model: need dim = num_heads * head_dim with head_dim >= 2");
    }
    if (spec.seq_len <= 0 || spec.num_samples <= 0) {
        throw InvalidDims("gen_toy_model: seq_len and num_samples must be positive");
    }

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
        throw IoFailure("gen_toy_model: cannot create " + out_dir.string());
    }

    const SplitMix64 root(spec.seed);
    const double weight_stddev = 1.0 / std::sqrt(static_cast<double>(spec.dim));

    ModelManifest manifest;
    manifest.dim = spec.dim;
    manifest.num_heads = spec.num_heads;
    manifest.head_dim = head_dim;
    manifest.causal = spec.causal;
    manifest.rng_name = "splitmix64";
    manifest.seed = spec.seed;
    manifest.w_q_path = "w_q.btsr";
    manifest.w_k_path = "w_k.btsr";
    manifest.w_v_path = "w_v.btsr";
    manifest.w_out_path = "w_out.btsr";

    const std::pair<const char*, uint64_t> weights[] = {
        {"w_q.btsr", 0}, {"w_k.btsr", 1}, {"w_v.btsr", 2}, {"w_out.btsr", 3}};
    for (const auto& [name, stream] : weights) {
        SplitMix64 rng = root.split(stream);
        write_matrix(out_dir / name, random_gaussian(rng, spec.dim, spec.dim, weight_stddev));
    }
    for (int i = 0; i < spec.num_samples; ++i) {
        SplitMix64 rng = root.split(16 + static_cast<uint64_t>(i));
        std::ostringstream name;
        name << "calib_" << i << ".btsr";
        write_matrix(out_dir / name.str(), random_gaussian(rng, spec.dim, spec.seq_len));
        manifest.calibration_paths.push_back(name.str());
    }
    write_manifest(out_dir / "manifest.json", manifest);
    return manifest;
}

// ---------------------------------------------------------------------------
// Report.

nlohmann::json Report::to_json() const {
    nlohmann::json j;
    j["schema_version"] = schema_version;
    j["config"] = config;
    j["seed"] = seed;
    j["layers"] = layer_metrics;
    j["metrics"] = metrics;
    j["timings"] = timings;
    return j;
}

Report Report::from_json(const nlohmann::json& j) {
    Report r;
    r.schema_version = require_field<int>(j, "schema_version", "report");
    r.config = j.value("config", nlohmann::json::object());
    r.seed = j.value("seed", uint64_t(0));
    if (j.contains("layers")) {
        r.layer_metrics =
            j.at("layers").get<std::map<std::string, std::map<std::string, double>>>();
    }
    if (j.contains("metrics")) {
        r.metrics = j.at("metrics").get<std::map<std::string, double>>();
    }
    if (j.contains("timings")) {
        r.timings = j.at("timings").get<std::map<std::string, double>>();
    }
    return r;
}

void write_report(const std::filesystem::path& path, const Report& report) {
    for (const auto& [layer, metrics] : report.layer_metrics) {
        for (const auto& [name, value] : metrics) {
            if (!std::isfinite(value)) {
                throw InvalidArgument("write_report: non-finite metric " + layer + "." + name);
            }
        }
    }
    for (const auto& [name, value] : report.metrics) {
        if (!std::isfinite(value)) {
            throw InvalidArgument("write_report: non-finite metric " + name);
        }
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoFailure("write_report: cannot open " + path.string());
    }
    out << report.to_json().dump(2) << "\n";
    if (!out) {
        throw IoFailure("write_report: short write to " + path.string());
    }
}

Report read_report(const std::filesystem::path& path) {
    return Report::from_json(parse_json_file(path, "read_report"));
}

} // namespace attnq
