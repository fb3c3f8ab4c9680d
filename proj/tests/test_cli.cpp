#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "segdesic/grid_encoding.hpp"
#include "segdesic/run_config.hpp"
#include "support/temp_dir.hpp"

using namespace segdesic;

namespace {

struct CliResult {
    int exit_code;
    std::string out;
};

CliResult run_cli(const std::string& args, const std::filesystem::path& dir) {
    auto out_file = dir / "stdout.txt";
    std::string cmd = std::string(SEGDESIC_CLI_PATH) + " " + args + " > " +
                      out_file.string() + " 2>&1";
    int rc = std::system(cmd.c_str());
    CliResult r;
    r.exit_code = WEXITSTATUS(rc);
    std::ifstream in(out_file);
    std::ostringstream ss;
    ss << in.rdbuf();
    r.out = ss.str();
    return r;
}

std::string file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// 20-patch smoke configuration
const char* kSmokeConfig = R"({
  "world": {"patch_size": 64, "num_source": 8, "num_source_val": 4,
             "num_target": 5, "num_target_test": 3, "shift_strength": 0.7},
  "grid": {"num_scales": 4},
  "train": {"batch_size": 4, "max_epochs": 2, "patience": 2, "crop_size": 32}
})";

} // namespace

TEST_SUITE("cli") {

TEST_CASE("help and usage errors") {
    testing::TempDir tmp("cli");
    CHECK(run_cli("--help", tmp.path()).exit_code == 0);
    CHECK(run_cli("encode --lon pi --lat 1 ", tmp.path()).exit_code == 2);
    CHECK(run_cli("frobnicate", tmp.path()).exit_code == 2);
    CHECK(run_cli("", tmp.path()).exit_code == 2);
}

TEST_CASE("encode prints the pipeline output as json") {
    testing::TempDir tmp("cli");
    CliResult r = run_cli("encode --lon 489353.59 --lat 6587552.20", tmp.path());
    REQUIRE(r.exit_code == 0);
    auto j = nlohmann::json::parse(r.out.substr(0, r.out.find('\n')));
    REQUIRE(j.is_array());

    RunConfig defaults = RunConfig::parse("{}");
    GridEncoding expected = encode_pipeline(defaults.encode_config(),
                                            Epsg2154Coord{489353.59, 6587552.20});
    REQUIRE(j.size() == expected.values.size());
    for (std::size_t i = 0; i < expected.values.size(); ++i)
        CHECK(j[i].get<double>() == doctest::Approx(expected.values[i]).epsilon(1e-12));
}

TEST_CASE("gen, train, eval round trip under five minutes") {
    auto start = std::chrono::steady_clock::now();
    testing::TempDir tmp("cli");
    auto cfg_path = tmp.path() / "config.json";
    std::ofstream(cfg_path) << kSmokeConfig;

    auto corpus = tmp.path() / "corpus";
    CliResult gen = run_cli("gen --config " + cfg_path.string() + " --out " + corpus.string(),
                            tmp.path());
    REQUIRE(gen.exit_code == 0);
    CHECK(std::filesystem::exists(corpus / "manifest.json"));
    CHECK(std::filesystem::exists(corpus / "resolved_config.json"));

    auto run_dir = tmp.path() / "run";
    CliResult train = run_cli("train --config " + cfg_path.string() + " --data " +
                                  corpus.string() + " --out " + run_dir.string(),
                              tmp.path());
    REQUIRE(train.exit_code == 0);
    CHECK(std::filesystem::exists(run_dir / "checkpoint.sdnckpt"));
    CHECK(std::filesystem::exists(run_dir / "training_log.csv"));
    CHECK(std::filesystem::exists(run_dir / "model_manifest.json"));
    CHECK(std::filesystem::exists(run_dir / "resolved_config.json"));

    auto eval_dir = tmp.path() / "eval";
    CliResult eval = run_cli("eval --checkpoint " + (run_dir / "checkpoint.sdnckpt").string() +
                                 " --data " + corpus.string() + " --split target --out " +
                                 eval_dir.string(),
                             tmp.path());
    REQUIRE(eval.exit_code == 0);
    CHECK(std::filesystem::exists(eval_dir / "results.json"));
    CHECK(std::filesystem::exists(eval_dir / "results.csv"));

    auto results = nlohmann::json::parse(file_bytes(eval_dir / "results.json"));
    CHECK(results.contains("per_class_iou"));
    CHECK(results.contains("miou"));
    CHECK(results.contains("num_pixels"));

    double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(elapsed < 300.0);
}

TEST_CASE("contract violations exit 4, config errors exit 2") {
    testing::TempDir tmp("cli");
    auto cfg_path = tmp.path() / "config.json";
    std::ofstream(cfg_path) << R"({
      "world": {"patch_size": 64, "num_source": 4, "num_source_val": 2,
                 "num_target": 2, "num_target_test": 0},
      "grid": {"num_scales": 2},
      "train": {"batch_size": 2, "max_epochs": 1, "patience": 1, "crop_size": 32}
    })";
    auto corpus = tmp.path() / "corpus";
    REQUIRE(run_cli("gen --config " + cfg_path.string() + " --out " + corpus.string(),
                    tmp.path())
                .exit_code == 0);
    auto run_dir = tmp.path() / "run";
    REQUIRE(run_cli("train --config " + cfg_path.string() + " --data " + corpus.string() +
                        " --out " + run_dir.string(),
                    tmp.path())
                .exit_code == 0);
    // no target-test patches in the corpus: contract error
    CliResult r = run_cli("eval --checkpoint " + (run_dir / "checkpoint.sdnckpt").string() +
                              " --data " + corpus.string() + " --split target --out " +
                              (tmp.path() / "ev").string(),
                          tmp.path());
    CHECK(r.exit_code == 4);

    // bad config value: usage/config error
    auto bad_cfg = tmp.path() / "bad.json";
    std::ofstream(bad_cfg) << R"({"world": {"shift_strength": 9}})";
    CHECK(run_cli("gen --config " + bad_cfg.string() + " --out " +
                      (tmp.path() / "x").string(),
                  tmp.path())
              .exit_code == 2);
}

TEST_CASE("eval on a missing checkpoint exits 3 with no partial output") {
    testing::TempDir tmp("cli");
    auto out_dir = tmp.path() / "eval_missing";
    CliResult r = run_cli("eval --checkpoint " + (tmp.path() / "nope.sdnckpt").string() +
                              " --data " + tmp.path().string() + " --split target --out " +
                              out_dir.string(),
                          tmp.path());
    CHECK(r.exit_code == 3);
    CHECK_FALSE(std::filesystem::exists(out_dir));
}

TEST_CASE("single-alpha ablation reproduces train + eval byte for byte") {
    testing::TempDir tmp("cli");
    auto cfg_path = tmp.path() / "config.json";
    std::ofstream(cfg_path) << kSmokeConfig;
    auto corpus = tmp.path() / "corpus";
    REQUIRE(run_cli("gen --config " + cfg_path.string() + " --out " + corpus.string(),
                    tmp.path())
                .exit_code == 0);

    // standalone train with alpha fixed to 0.25
    RunConfig cfg = RunConfig::load(cfg_path);
    cfg.train.alpha = 0.25;
    auto cfg25 = tmp.path() / "config_alpha.json";
    cfg.save(cfg25);
    auto run_dir = tmp.path() / "standalone";
    REQUIRE(run_cli("train --config " + cfg25.string() + " --data " + corpus.string() +
                        " --out " + run_dir.string(),
                    tmp.path())
                .exit_code == 0);
    auto eval_dir = tmp.path() / "standalone_eval";
    REQUIRE(run_cli("eval --checkpoint " + (run_dir / "checkpoint.sdnckpt").string() +
                        " --data " + corpus.string() + " --split target --out " +
                        eval_dir.string(),
                    tmp.path())
                .exit_code == 0);

    auto ablate_dir = tmp.path() / "ablate";
    CliResult ab = run_cli("ablate --config " + cfg_path.string() + " --data " +
                               corpus.string() + " --out " + ablate_dir.string() +
                               " --alphas 0.25",
                           tmp.path());
    REQUIRE(ab.exit_code == 0);
    CHECK(std::filesystem::exists(ablate_dir / "ablation.csv"));

    std::filesystem::path run_sub;
    for (const auto& entry : std::filesystem::directory_iterator(ablate_dir))
        if (entry.is_directory()) run_sub = entry.path();
    REQUIRE(!run_sub.empty());

    CHECK(file_bytes(run_sub / "checkpoint.sdnckpt") ==
          file_bytes(run_dir / "checkpoint.sdnckpt"));
    CHECK(file_bytes(run_sub / "training_log.csv") == file_bytes(run_dir / "training_log.csv"));
    CHECK(file_bytes(run_sub / "results.json") == file_bytes(eval_dir / "results.json"));
}

} // TEST_SUITE
