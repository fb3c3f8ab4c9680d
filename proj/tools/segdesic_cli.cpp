// Command-line front end: encode / gen / train / eval / ablate subcommands
// wiring the library into reproducible file-based runs.

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "segdesic/errors.hpp"
#include "segdesic/parallel.hpp"
#include "segdesic/pipeline.hpp"

namespace fs = std::filesystem;
using namespace segdesic;

namespace {

RunConfig load_config_opt(const std::string& path) {
    if (path.empty()) {
        RunConfig cfg;
        cfg.validate();
        return cfg;
    }
    return RunConfig::load(path);
}

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos < csv.size()) {
        std::size_t comma = csv.find(',', pos);
        std::string item = csv.substr(pos, comma == std::string::npos ? comma : comma - pos);
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ConfigError("ablate: bad numeric list entry '" + item + "'");
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    for (double v : parse_double_list(csv)) out.push_back(static_cast<int>(v));
    return out;
}

int cmd_encode(const std::string& config_path, double lon_m, double lat_m,
               const std::string& out_dir) {
    RunConfig cfg = load_config_opt(config_path);
    GridEncoding enc = encode_pipeline(cfg.encode_config(), Epsg2154Coord{lon_m, lat_m});
    nlohmann::json j = enc.values;
    std::cout << j.dump() << "\n";
    if (!out_dir.empty()) {
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        if (ec) throw IoError("encode: cannot create '" + out_dir + "'");
        cfg.save(fs::path(out_dir) / "resolved_config.json");
    }
    return 0;
}

int cmd_gen(const std::string& config_path, const std::string& out_dir) {
    RunConfig cfg = load_config_opt(config_path);
    std::size_t n = run_generate(cfg, out_dir);
    std::cout << "wrote " << n << " patches to " << out_dir << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_dir) {
    RunConfig cfg = load_config_opt(config_path);
    TrainArtifacts a = run_training(cfg, data_dir, out_dir);
    std::printf("trained %d epochs, best source-val mIoU %.4f at epoch %d\n", a.epochs_run,
                100.0 * a.best_val_miou, a.best_epoch);
    std::cout << "checkpoint: " << a.checkpoint.string() << "\n";
    return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data_dir,
             const std::string& split, const std::string& out_dir) {
    EvalArtifacts a = run_evaluation(checkpoint, data_dir, split, out_dir);
    for (std::size_t k = 0; k < a.result.per_class_iou.size(); ++k) {
        if (a.result.per_class_iou[k].has_value())
            std::printf("class_%zu  %.2f\n", k, 100.0 * *a.result.per_class_iou[k]);
        else
            std::printf("class_%zu  absent\n", k);
    }
    std::printf("mIoU  %.2f\n", 100.0 * a.result.miou);
    std::cout << "results: " << a.results_json.string() << "\n";
    return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& data_dir,
               const std::string& out_dir, const std::string& alphas,
               const std::string& scales, const std::string& lmins, const std::string& lmaxes) {
    RunConfig cfg = load_config_opt(config_path);
    auto rows = run_ablation(cfg, data_dir, out_dir, parse_double_list(alphas),
                             scales.empty() ? std::vector<int>{} : parse_int_list(scales),
                             lmins.empty() ? std::vector<double>{} : parse_double_list(lmins),
                             lmaxes.empty() ? std::vector<double>{} : parse_double_list(lmaxes));
    std::printf("%-12s %-12s %-6s %-6s %s\n", "lambda_min", "lambda_max", "S", "alpha",
                "target mIoU");
    for (const auto& r : rows)
        std::printf("%-12g %-12g %-6d %-6g %.2f\n", r.lambda_min, r.lambda_max, r.num_scales,
                    r.alpha, 100.0 * r.target_miou);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"SegDesicNet: geo-coordinate domain adaptation for semantic segmentation"};
    app.require_subcommand(1);

    std::string config_path, data_dir, out_dir, checkpoint, split = "target";
    std::string alphas, scales, lmins, lmaxes;
    double lon_m = 0.0, lat_m = 0.0;

    auto* enc = app.add_subcommand("encode", "Print the normalized geo-encoding of a coordinate");
    enc->add_option("--lon", lon_m, "EPSG:2154 easting in meters")->required();
    enc->add_option("--lat", lat_m, "EPSG:2154 northing in meters")->required();
    enc->add_option("--config", config_path, "Run config JSON (defaults when omitted)");
    enc->add_option("--out", out_dir, "Directory for the resolved-config echo");

    auto* gen = app.add_subcommand("gen", "Generate a synthetic two-domain corpus");
    gen->add_option("--config", config_path, "Run config JSON");
    gen->add_option("--out", out_dir, "Output corpus directory")->required();

    auto* train = app.add_subcommand("train", "Train on a generated corpus");
    train->add_option("--config", config_path, "Run config JSON");
    train->add_option("--data", data_dir, "Corpus directory")->required();
    train->add_option("--out", out_dir, "Run output directory")->required();

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a corpus split");
    eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    eval->add_option("--data", data_dir, "Corpus directory")->required();
    eval->add_option("--split", split, "target | source-val");
    eval->add_option("--out", out_dir, "Output directory (default: eval_out)");

    auto* ablate = app.add_subcommand("ablate", "Sweep alpha (and grid axes), train + eval each");
    ablate->add_option("--config", config_path, "Run config JSON");
    ablate->add_option("--data", data_dir, "Corpus directory")->required();
    ablate->add_option("--out", out_dir, "Output directory")->required();
    ablate->add_option("--alphas", alphas, "Comma-separated alpha values")->required();
    ablate->add_option("--scales", scales, "Comma-separated scale counts S");
    ablate->add_option("--lambda-mins", lmins, "Comma-separated lambda_min values");
    ablate->add_option("--lambda-maxes", lmaxes, "Comma-separated lambda_max values");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e); // prints usage, exit 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    // Worker count: SEGDESIC_THREADS is read lazily by worker_count(); a
    // value of 0 or an unset variable means auto.
    (void)worker_count();

    try {
        if (enc->parsed()) return cmd_encode(config_path, lon_m, lat_m, out_dir);
        if (gen->parsed()) return cmd_gen(config_path, out_dir);
        if (train->parsed()) return cmd_train(config_path, data_dir, out_dir);
        if (eval->parsed())
            return cmd_eval(checkpoint, data_dir, split,
                            out_dir.empty() ? "eval_out" : out_dir);
        if (ablate->parsed())
            return cmd_ablate(config_path, data_dir, out_dir, alphas, scales, lmins, lmaxes);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 2;
}
