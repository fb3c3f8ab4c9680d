#include "segdesic/pipeline.hpp"

#include <cstdio>
#include <fstream>

#include "config_json.hpp"

namespace segdesic {

using nlohmann::json;

namespace {

void make_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir.string() + "'");
}

json load_json_file(const std::filesystem::path& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw IoError(std::string(what) + ": cannot open '" + path.string() + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoError(std::string(what) + ": bad JSON in '" + path.string() + "': " + e.what());
    }
    return j;
}

} // namespace

std::size_t run_generate(const RunConfig& cfg, const std::filesystem::path& out_dir) {
    cfg.validate();
    auto samples = generate_world(cfg.world);
    make_dir(out_dir);
    write_corpus(out_dir, cfg.world, samples);
    cfg.save(out_dir / "resolved_config.json");
    return samples.size();
}

TrainArtifacts run_training(const RunConfig& cfg, const std::filesystem::path& data_dir,
                            const std::filesystem::path& out_dir) {
    cfg.validate();
    Corpus corpus = load_corpus(data_dir);
    if (cfg.train.crop_size > corpus.config.patch_size)
        throw ConfigError("train: crop_size " + std::to_string(cfg.train.crop_size) +
                          " exceeds corpus patch size " +
                          std::to_string(corpus.config.patch_size));
    int div = 1 << cfg.train.model.num_stages();
    if (cfg.train.crop_size % div != 0)
        throw ConfigError("train: crop_size must be divisible by 2^num_stages = " +
                          std::to_string(div));

    TrainingData data = prepare_training_data(corpus, cfg.encode_config());
    FitResult fitres = fit(cfg.train, data);

    make_dir(out_dir);
    cfg.save(out_dir / "resolved_config.json");

    TrainArtifacts artifacts;
    artifacts.checkpoint = out_dir / "checkpoint.sdnckpt";
    artifacts.log_csv = out_dir / "training_log.csv";
    artifacts.model_manifest = out_dir / "model_manifest.json";
    artifacts.best_val_miou = fitres.best_val_miou;
    artifacts.best_epoch = fitres.best_epoch;
    artifacts.epochs_run = static_cast<int>(fitres.log.size());

    fitres.best_params.save(artifacts.checkpoint);
    write_training_log_csv(artifacts.log_csv, fitres.log);

    json manifest;
    manifest["model"] = cfgjson::model_to_json(cfg.train.model);
    manifest["grid"] = cfgjson::grid_to_json(cfg.train.grid);
    manifest["encoding"] = cfgjson::encoding_to_json(cfg.encoding);
    manifest["crop_size"] = cfg.train.crop_size;
    manifest["seed"] = cfg.train.seed;
    manifest["alpha"] = cfg.train.alpha;
    manifest["best_epoch"] = fitres.best_epoch;
    std::ofstream mf(artifacts.model_manifest);
    if (!mf) throw IoError("train: cannot write model manifest");
    mf << manifest.dump(2) << "\n";
    return artifacts;
}

EvalArtifacts run_evaluation(const std::filesystem::path& checkpoint_path,
                             const std::filesystem::path& data_dir, const std::string& split,
                             const std::filesystem::path& out_dir) {
    SplitTag tag;
    if (split == "target")
        tag = SplitTag::TargetTest;
    else if (split == "source-val")
        tag = SplitTag::SourceVal;
    else
        throw ConfigError("eval: split must be 'target' or 'source-val', got '" + split + "'");

    // Validate every input before any output is created.
    if (!std::filesystem::exists(checkpoint_path))
        throw IoError("eval: checkpoint '" + checkpoint_path.string() + "' does not exist");
    auto manifest_path = checkpoint_path.parent_path() / "model_manifest.json";
    json manifest = load_json_file(manifest_path, "eval");
    ParameterStore params = ParameterStore::load(checkpoint_path);

    GridConfig grid = cfgjson::grid_from_json(manifest.at("grid"));
    ModelConfig model = cfgjson::model_from_json(manifest.at("model"), grid,
                                                 ModelConfig{}.num_classes);
    EncodingSettings enc = cfgjson::encoding_from_json(manifest.at("encoding"));
    model.norm_kind = enc.norm_kind;
    int tile = manifest.at("crop_size").get<int>();

    Corpus corpus = load_corpus(data_dir);
    auto samples = corpus.split(tag);
    if (samples.empty())
        throw ValueError("eval: corpus has no '" + split + "' patches");

    EvalArtifacts artifacts;
    artifacts.result = evaluate_model(params, model, samples, tile);

    make_dir(out_dir);
    artifacts.results_json = out_dir / "results.json";
    artifacts.results_csv = out_dir / "results.csv";
    write_results_json(artifacts.results_json, artifacts.result);
    write_results_csv(artifacts.results_csv, artifacts.result);

    json resolved;
    resolved["checkpoint"] = checkpoint_path.string();
    resolved["data"] = data_dir.string();
    resolved["split"] = split;
    resolved["model_manifest"] = manifest;
    std::ofstream rf(out_dir / "resolved_config.json");
    if (!rf) throw IoError("eval: cannot write resolved config");
    rf << resolved.dump(2) << "\n";
    return artifacts;
}

std::vector<AblationRow> run_ablation(const RunConfig& cfg,
                                      const std::filesystem::path& data_dir,
                                      const std::filesystem::path& out_dir,
                                      std::vector<double> alphas,
                                      std::vector<int> scale_counts,
                                      std::vector<double> lambda_mins,
                                      std::vector<double> lambda_maxes) {
    if (alphas.empty()) alphas.push_back(cfg.train.alpha);
    if (scale_counts.empty()) scale_counts.push_back(cfg.train.grid.num_scales);
    if (lambda_mins.empty()) lambda_mins.push_back(cfg.train.grid.lambda_min);
    if (lambda_maxes.empty()) lambda_maxes.push_back(cfg.train.grid.lambda_max);

    make_dir(out_dir);
    cfg.save(out_dir / "resolved_config.json");

    std::vector<AblationRow> rows;
    int run_index = 0;
    for (double lmin : lambda_mins) {
        for (double lmax : lambda_maxes) {
            for (int s : scale_counts) {
                for (double alpha : alphas) {
                    RunConfig run_cfg = cfg;
                    run_cfg.train.grid.lambda_min = lmin;
                    run_cfg.train.grid.lambda_max = lmax;
                    run_cfg.train.grid.num_scales = s;
                    run_cfg.train.model.encoding_dim = 4 * s;
                    run_cfg.train.alpha = alpha;

                    char name[128];
                    std::snprintf(name, sizeof(name), "run_%03d_lmin%g_lmax%g_S%d_a%g",
                                  run_index, lmin, lmax, s, alpha);
                    ++run_index;
                    auto run_dir = out_dir / name;

                    run_training(run_cfg, data_dir, run_dir);
                    auto eval = run_evaluation(run_dir / "checkpoint.sdnckpt", data_dir,
                                               "target", run_dir);
                    rows.push_back(AblationRow{lmin, lmax, s, alpha, eval.result.miou});
                }
            }
        }
    }

    std::ofstream out(out_dir / "ablation.csv");
    if (!out) throw IoError("ablate: cannot write ablation.csv");
    out << "lambda_min,lambda_max,num_scales,alpha,target_miou_percent\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%d,%.17g,%.4f\n", r.lambda_min,
                      r.lambda_max, r.num_scales, r.alpha, 100.0 * r.target_miou);
        out << buf;
    }
    return rows;
}

} // namespace segdesic
