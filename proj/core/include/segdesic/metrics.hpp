#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "segdesic/image_io.hpp"
#include "segdesic/model.hpp"
#include "segdesic/synthetic.hpp"

namespace segdesic {

/// K x K pixel counts; rows are ground truth, columns predictions.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(int num_classes);

    int num_classes() const noexcept { return k_; }
    std::uint64_t at(int gt, int pred) const;
    std::uint64_t total() const;

    /// Adds one (pred, gt) pixel pair per index; values equal to
    /// ignore_value are skipped. Throws ValueError on out-of-range ids.
    void accumulate(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt,
                    int ignore_value = 255);
    void accumulate(const GrayImage& pred, const GrayImage& gt, int ignore_value = 255);

    void merge(const ConfusionMatrix& other);

private:
    int k_;
    std::vector<std::uint64_t> counts_;
};

/// TP / (TP + FP + FN); nullopt when the class is absent from both
/// ground truth and prediction.
std::optional<double> class_iou(const ConfusionMatrix& cm, int k);

/// Mean over classes with support; throws ValueError when every class is
/// absent.
double miou(const ConfusionMatrix& cm);

struct EvalResult {
    std::vector<std::optional<double>> per_class_iou;
    double miou = 0.0;
    std::uint64_t num_pixels = 0;
};

/// Tiles each labeled patch, predicts per tile in eval mode, merges the
/// tiles back and scores the merged map against the ground truth.
EvalResult evaluate_model(ParameterStore& params, const ModelConfig& cfg,
                          std::span<const GeoSample> samples, int tile_size);
EvalResult evaluate_model(ParameterStore& params, const ModelConfig& cfg,
                          const std::vector<const GeoSample*>& samples, int tile_size);

/// Argmax class map of one image batch entry (ties resolve to the lowest id).
GrayImage predict_labels(const Tensor& seg_probs, int batch_index);

void write_results_json(const std::filesystem::path& path, const EvalResult& result);
void write_results_csv(const std::filesystem::path& path, const EvalResult& result);

} // namespace segdesic
