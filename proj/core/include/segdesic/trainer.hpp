#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "segdesic/grid_encoding.hpp"
#include "segdesic/model.hpp"
#include "segdesic/synthetic.hpp"

namespace segdesic {

struct TrainConfig {
    int batch_size = 16;
    double lr0 = 0.001;
    int max_epochs = 200;
    int patience = 30;
    std::uint64_t seed = 18;
    double alpha = 0.5;
    double poly_power = 0.9;
    int crop_size = 256;
    bool tile_aligned_crops = false; // restrict crop offsets to the tile grid
    GridConfig grid;
    ModelConfig model;

    void validate() const; // throws ConfigError
};

/// lr0 * (1 - t / T)^power. Throws ValueError when t is outside [0, T].
double poly_lr(double lr0, std::int64_t step, std::int64_t total_steps, double power);

/// Best-metric tracker: stop once the monitored value has failed to improve
/// for more than `patience` consecutive epochs (patience 0 stops after the
/// first non-improving epoch).
class EarlyStopping {
public:
    explicit EarlyStopping(int patience) : patience_(patience) {}

    /// Feeds one epoch's metric; returns true when training should stop.
    bool update(double metric) {
        ++epoch_;
        if (metric > best_) {
            best_ = metric;
            best_epoch_ = epoch_;
            since_best_ = 0;
            return false;
        }
        ++since_best_;
        return since_best_ > patience_;
    }

    double best() const noexcept { return best_; }
    int best_epoch() const noexcept { return best_epoch_; }

private:
    int patience_;
    int epoch_ = 0;
    int best_epoch_ = 0;
    int since_best_ = 0;
    double best_ = -1.0;
};

/// Bias-corrected Adam over the store's trainable entries.
class AdamState {
public:
    explicit AdamState(const ParameterStore& params, double beta1 = 0.9,
                       double beta2 = 0.999, double eps = 1e-8);

    /// Reads accumulated gradients and updates parameter values in place.
    void step(ParameterStore& params, double lr);
    std::int64_t step_count() const noexcept { return t_; }

private:
    std::map<std::string, Tensor> m_;
    std::map<std::string, Tensor> v_;
    std::int64_t t_ = 0;
    double beta1_, beta2_, eps_;
};

/// Labeled source sample with its precomputed normalized geo-encoding.
struct SourceSample {
    RgbImage image;
    GrayImage labels;
    std::vector<double> encoding;
    std::string patch_id;
};

/// Target training sample: image and geo-encoding only. No label field, so
/// no training code path can touch target annotations.
struct TargetSample {
    RgbImage image;
    std::vector<double> encoding;
    std::string patch_id;
};

struct TrainingData {
    std::vector<SourceSample> source_train;
    std::vector<TargetSample> target_train;
    std::vector<GeoSample> source_val; // full labeled patches for the early-stopping monitor
};

/// Computes one encoding per patch (coordinates are patch-level metadata)
/// and drops target labels by construction.
TrainingData prepare_training_data(const Corpus& corpus, const EncodePipelineConfig& enc_cfg);

struct EpochMetrics {
    double loss_seg = 0.0;
    double loss_uda_s = 0.0;
    double loss_uda_t = 0.0;
    double lr_first_step = 0.0;
    int steps = 0;
};

/// One pass over the source set: joint source/target batches, composed
/// loss, backward, Adam with the polynomial schedule.
EpochMetrics train_epoch(ParameterStore& params, const TrainConfig& cfg,
                         const TrainingData& data, AdamState& adam,
                         std::int64_t& global_step, std::int64_t total_steps, int epoch);

struct EpochLogRow {
    int epoch;
    double lr;
    double loss_seg;
    double loss_uda_s;
    double loss_uda_t;
    double val_miou;
};

struct FitResult {
    ParameterStore best_params;
    std::vector<EpochLogRow> log;
    int best_epoch = 0;
    double best_val_miou = 0.0;
};

/// Trains until source-val mIoU stops improving for more than `patience`
/// epochs (or max_epochs), returning the best-epoch snapshot and the full
/// per-epoch log.
FitResult fit(const TrainConfig& cfg, const TrainingData& data);

/// CSV with header epoch,lr,loss_seg,loss_uda_s,loss_uda_t,val_miou.
void write_training_log_csv(const std::filesystem::path& path,
                            const std::vector<EpochLogRow>& rows);

} // namespace segdesic
