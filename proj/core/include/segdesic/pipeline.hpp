#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "segdesic/metrics.hpp"
#include "segdesic/run_config.hpp"

namespace segdesic {

/// Generates the corpus into out_dir (images, masks, metadata, manifest)
/// and echoes the resolved config. Returns the number of patches written.
std::size_t run_generate(const RunConfig& cfg, const std::filesystem::path& out_dir);

struct TrainArtifacts {
    std::filesystem::path checkpoint;
    std::filesystem::path log_csv;
    std::filesystem::path model_manifest;
    double best_val_miou = 0.0;
    int best_epoch = 0;
    int epochs_run = 0;
};

/// Loads the corpus, trains with early stopping, writes checkpoint +
/// training_log.csv + model_manifest.json + resolved_config.json.
TrainArtifacts run_training(const RunConfig& cfg, const std::filesystem::path& data_dir,
                            const std::filesystem::path& out_dir);

struct EvalArtifacts {
    EvalResult result;
    std::filesystem::path results_json;
    std::filesystem::path results_csv;
};

/// split is "target" (held-out target test patches) or "source-val".
/// Validates checkpoint and manifest before creating any output.
EvalArtifacts run_evaluation(const std::filesystem::path& checkpoint_path,
                             const std::filesystem::path& data_dir, const std::string& split,
                             const std::filesystem::path& out_dir);

struct AblationRow {
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    int num_scales = 0;
    double alpha = 0.0;
    double target_miou = 0.0;
};

/// Cartesian sweep over the provided axes (empty axis = config value);
/// each combination trains and evaluates on the target split in its own
/// subdirectory, mirroring a standalone train + eval run byte for byte.
std::vector<AblationRow> run_ablation(const RunConfig& cfg,
                                      const std::filesystem::path& data_dir,
                                      const std::filesystem::path& out_dir,
                                      std::vector<double> alphas,
                                      std::vector<int> scale_counts,
                                      std::vector<double> lambda_mins,
                                      std::vector<double> lambda_maxes);

} // namespace segdesic
