#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "attnq/cli.hpp"
#include "attnq/io.hpp"

using namespace attnq;

namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("attnq_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

struct CaptureStreams {
    std::ostringstream out, err;
    std::streambuf* old_out = std::cout.rdbuf();
    std::streambuf* old_err = std::cerr.rdbuf();
    CaptureStreams() {
        std::cout.rdbuf(out.rdbuf());
        std::cerr.rdbuf(err.rdbuf());
    }
    ~CaptureStreams() {
        std::cout.rdbuf(old_out);
        std::cerr.rdbuf(old_err);
    }
};

int run_quiet(const std::vector<std::string>& args, std::string* out = nullptr,
              std::string* err = nullptr) {
    CaptureStreams capture;
    const int code = cli::run(args);
    if (out != nullptr) {
        *out = capture.out.str();
    }
    if (err != nullptr) {
        *err = capture.err.str();
    }
    return code;
}

std::string read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

bool dirs_equal(const fs::path& a, const fs::path& b) {
    for (const auto& entry : fs::directory_iterator(a)) {
        const fs::path other = b / entry.path().filename();
        if (!fs::exists(other) || read_bytes(entry.path()) != read_bytes(other)) {
            return false;
        }
    }
    size_t count_a = std::distance(fs::directory_iterator(a), fs::directory_iterator{});
    size_t count_b = std::distance(fs::directory_iterator(b), fs::directory_iterator{});
    return count_a == count_b;
}

fs::path make_toy(const std::string& name, uint64_t seed = 1) {
    const fs::path dir = scratch_dir(name);
    const int code = run_quiet({"attnq", "gen-toy", "--d", "8", "--heads", "2", "--seqlen", "8",
                                "--samples", "2", "--seed", std::to_string(seed), "--out",
                                dir.string()});
    REQUIRE(code == 0);
    return dir;
}

} // namespace

TEST_CASE("validate exits zero and prints one line per check") {
    std::string out;
    const int code = run_quiet({"attnq", "validate"}, &out);
    CHECK(code == 0);
    CHECK(out.find("resolved config") != std::string::npos);
    CHECK(out.find("[PASS] quadratic-hessian-identity") != std::string::npos);
    CHECK(out.find("[FAIL]") == std::string::npos);
}

TEST_CASE("validate accepts the tiny-dims override and rejects bad ones") {
    std::string out;
    CHECK(run_quiet({"attnq", "validate", "--tiny-dims", "d=4,H=2,L=2"}, &out) == 0);
    CHECK(run_quiet({"attnq", "validate", "--tiny-dims", "d=4;H=2"}) == 1);
    CHECK(run_quiet({"attnq", "validate", "--tiny-dims", "q=4"}) == 1);
}

TEST_CASE("unsupported bit-widths are a usage error naming the supported set") {
    const fs::path toy = make_toy("bits");
    std::string err;
    const int code = run_quiet({"attnq", "quantize", "--manifest",
                                (toy / "manifest.json").string(), "--method", "boa", "--bits",
                                "16", "--out", (toy / "q").string()},
                               nullptr, &err);
    CHECK(code == 1);
    CHECK(err.find("2") != std::string::npos);
    CHECK(err.find("8") != std::string::npos);
}

TEST_CASE("unknown flags are errors") {
    CHECK(run_quiet({"attnq", "validate", "--frobnicate"}) == 1);
    CHECK(run_quiet({"attnq", "no-such-command"}) == 1);
}

TEST_CASE("missing inputs are data errors") {
    const fs::path dir = scratch_dir("missing");
    CHECK(run_quiet({"attnq", "quantize", "--manifest", (dir / "absent.json").string(), "--bits",
                     "3", "--out", (dir / "q").string()}) == 2);
    CHECK(run_quiet({"attnq", "eval", "--manifest", (dir / "absent.json").string(), "--quantized",
                     dir.string()}) == 2);
}

TEST_CASE("gen-toy validates dimensions as a data error") {
    const fs::path dir = scratch_dir("baddims");
    CHECK(run_quiet({"attnq", "gen-toy", "--d", "5", "--heads", "2", "--seqlen", "4", "--samples",
                     "1", "--seed", "1", "--out", dir.string()}) == 2);
}

TEST_CASE("quantize then eval reproduces the attention error bit for bit") {
    const fs::path toy = make_toy("pipeline");
    const fs::path qdir = toy / "q";
    REQUIRE(run_quiet({"attnq", "quantize", "--manifest", (toy / "manifest.json").string(),
                       "--method", "boa", "--bits", "3", "--out", qdir.string()}) == 0);
    REQUIRE(run_quiet({"attnq", "eval", "--manifest", (toy / "manifest.json").string(),
                       "--quantized", qdir.string()}) == 0);

    const Report quant_report = read_report(qdir / "report.json");
    const Report eval_report = read_report(qdir / "eval_report.json");
    const double a = quant_report.metrics.at("attention_recon_error");
    const double b = eval_report.metrics.at("attention_recon_error");
    CHECK(a == b); // bit-for-bit
    CHECK(quant_report.metrics.at("attention_recon_error_nearest") ==
          eval_report.metrics.at("attention_recon_error_nearest"));
    for (const char* layer : {"w_q", "w_k", "w_v", "w_out"}) {
        CHECK(quant_report.layer_metrics.at(layer).at("layer_recon_error") ==
              eval_report.layer_metrics.at(layer).at("layer_recon_error"));
    }
}

TEST_CASE("identical invocations produce byte-identical output directories") {
    const fs::path toy = make_toy("determinism");
    const fs::path qdir = toy / "q";
    const std::vector<std::string> argv = {"attnq",   "quantize", "--manifest",
                                           (toy / "manifest.json").string(),
                                           "--method", "boa",     "--bits",
                                           "3",       "--out",    qdir.string()};
    REQUIRE(run_quiet(argv) == 0);
    const fs::path snapshot = toy / "snapshot";
    fs::copy(qdir, snapshot, fs::copy_options::recursive);
    fs::remove_all(qdir);
    REQUIRE(run_quiet(argv) == 0);
    CHECK(dirs_equal(qdir, snapshot));
}

TEST_CASE("the identity-row-factor hook reproduces the gptq method exactly") {
    const fs::path toy = make_toy("hook");
    const fs::path hook_dir = toy / "hook";
    const fs::path gptq_dir = toy / "gptq";
    REQUIRE(run_quiet({"attnq", "quantize", "--manifest", (toy / "manifest.json").string(),
                       "--method", "boa", "--bits", "3", "--force-identity-hrow", "--out",
                       hook_dir.string()}) == 0);
    REQUIRE(run_quiet({"attnq", "quantize", "--manifest", (toy / "manifest.json").string(),
                       "--method", "gptq", "--bits", "3", "--out", gptq_dir.string()}) == 0);
    for (const char* layer : {"w_q", "w_k", "w_v", "w_out"}) {
        CHECK(read_bytes(hook_dir / (std::string(layer) + ".codes.btsr")) ==
              read_bytes(gptq_dir / (std::string(layer) + ".codes.btsr")));
        CHECK(read_bytes(hook_dir / (std::string(layer) + ".quant.btsr")) ==
              read_bytes(gptq_dir / (std::string(layer) + ".quant.btsr")));
    }
    const Report hook_report = read_report(hook_dir / "report.json");
    const Report gptq_report = read_report(gptq_dir / "report.json");
    CHECK(hook_report.metrics.at("attention_recon_error") ==
          gptq_report.metrics.at("attention_recon_error"));
}

TEST_CASE("every run echoes its resolved configuration") {
    const fs::path toy = make_toy("echo");
    std::string out;
    run_quiet({"attnq", "quantize", "--manifest", (toy / "manifest.json").string(), "--method",
               "rtn", "--bits", "4", "--out", (toy / "q").string()},
              &out);
    CHECK(out.find("resolved config") != std::string::npos);
    CHECK(out.find("\"method\":\"rtn\"") != std::string::npos);
    CHECK(out.find("\"bits\":4") != std::string::npos);
}

TEST_CASE("print mode writes the report to stdout") {
    const fs::path toy = make_toy("print");
    std::string out;
    REQUIRE(run_quiet({"attnq", "quantize", "--manifest", (toy / "manifest.json").string(),
                       "--method", "boa", "--bits", "3", "--out", (toy / "q").string(),
                       "--print"},
                      &out) == 0);
    CHECK(out.find("attention_recon_error") != std::string::npos);
    CHECK(out.find("timings") != std::string::npos);
    // The on-disk report stays clean of wall-clock values.
    const Report report = read_report(toy / "q" / "report.json");
    CHECK(report.timings.empty());
}

TEST_CASE("all three methods run through the cli") {
    const fs::path toy = make_toy("methods", 3);
    for (const char* method : {"rtn", "gptq", "boa"}) {
        const int code = run_quiet({"attnq", "quantize", "--manifest",
                                    (toy / "manifest.json").string(), "--method", method,
                                    "--bits", "2", "--out", (toy / method).string()});
        CHECK(code == 0);
        const Report report = read_report(toy / method / "report.json");
        CHECK(report.metrics.at("attention_recon_error") >= 0.0);
    }
    // The per-head out policy is accepted too.
    CHECK(run_quiet({"attnq", "quantize", "--manifest", (toy / "manifest.json").string(),
                     "--method", "boa", "--bits", "2", "--out-policy", "per_head", "--out",
                     (toy / "ph").string()}) == 0);
}
