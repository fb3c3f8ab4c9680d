#include "segdesic/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "segdesic/errors.hpp"

namespace segdesic {

ConfusionMatrix::ConfusionMatrix(int num_classes) : k_(num_classes) {
    if (num_classes < 1) throw ConfigError("confusion matrix: need at least one class");
    counts_.assign(static_cast<std::size_t>(k_) * k_, 0);
}

std::uint64_t ConfusionMatrix::at(int gt, int pred) const {
    if (gt < 0 || gt >= k_ || pred < 0 || pred >= k_)
        throw ValueError("confusion matrix: index out of range");
    return counts_[static_cast<std::size_t>(gt) * k_ + pred];
}

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t t = 0;
    for (auto v : counts_) t += v;
    return t;
}

void ConfusionMatrix::accumulate(std::span<const std::uint8_t> pred,
                                 std::span<const std::uint8_t> gt, int ignore_value) {
    if (pred.size() != gt.size())
        throw ShapeError("confusion matrix: prediction and ground truth differ in size");
    for (std::size_t i = 0; i < pred.size(); ++i) {
        int g = gt[i];
        if (g == ignore_value) continue;
        int p = pred[i];
        if (g >= k_) throw ValueError("confusion matrix: ground-truth id " + std::to_string(g) +
                                      " out of range");
        if (p >= k_) throw ValueError("confusion matrix: predicted id " + std::to_string(p) +
                                      " out of range");
        ++counts_[static_cast<std::size_t>(g) * k_ + p];
    }
}

void ConfusionMatrix::accumulate(const GrayImage& pred, const GrayImage& gt, int ignore_value) {
    if (pred.width != gt.width || pred.height != gt.height)
        throw ShapeError("confusion matrix: raster size mismatch");
    accumulate(std::span<const std::uint8_t>(pred.pixels),
               std::span<const std::uint8_t>(gt.pixels), ignore_value);
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (other.k_ != k_) throw ShapeError("confusion matrix: class count mismatch");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::optional<double> class_iou(const ConfusionMatrix& cm, int k) {
    if (k < 0 || k >= cm.num_classes())
        throw ValueError("class_iou: class index out of range");
    std::uint64_t tp = cm.at(k, k);
    std::uint64_t fp = 0, fn = 0;
    for (int j = 0; j < cm.num_classes(); ++j) {
        if (j == k) continue;
        fp += cm.at(j, k);
        fn += cm.at(k, j);
    }
    std::uint64_t denom = tp + fp + fn;
    if (denom == 0) return std::nullopt; // absent from both gt and prediction
    return static_cast<double>(tp) / static_cast<double>(denom);
}

double miou(const ConfusionMatrix& cm) {
    double sum = 0.0;
    int counted = 0;
    for (int k = 0; k < cm.num_classes(); ++k) {
        auto iou = class_iou(cm, k);
        if (iou.has_value()) {
            sum += *iou;
            ++counted;
        }
    }
    if (counted == 0) throw ValueError("miou: every class absent, metric undefined");
    return sum / counted;
}

GrayImage predict_labels(const Tensor& seg_probs, int batch_index) {
    require_ndim(seg_probs, 4, "predict_labels");
    int k = seg_probs.dim(1), h = seg_probs.dim(2), w = seg_probs.dim(3);
    GrayImage out = make_gray(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            int best = 0;
            double bv = seg_probs.at4(batch_index, 0, y, x);
            for (int c = 1; c < k; ++c) {
                double v = seg_probs.at4(batch_index, c, y, x);
                if (v > bv) {
                    bv = v;
                    best = c;
                }
            }
            out.at(y, x) = static_cast<std::uint8_t>(best);
        }
    }
    return out;
}

EvalResult evaluate_model(ParameterStore& params, const ModelConfig& cfg,
                          std::span<const GeoSample> samples, int tile_size) {
    std::vector<const GeoSample*> ptrs;
    ptrs.reserve(samples.size());
    for (const auto& s : samples) ptrs.push_back(&s);
    return evaluate_model(params, cfg, ptrs, tile_size);
}

EvalResult evaluate_model(ParameterStore& params, const ModelConfig& cfg,
                          const std::vector<const GeoSample*>& samples, int tile_size) {
    if (samples.empty()) throw ValueError("evaluate_model: no evaluation patches");
    NoGradGuard no_grad;
    ConfusionMatrix cm(cfg.num_classes);

    for (const GeoSample* patch_ptr : samples) {
        const GeoSample& patch = *patch_ptr;
        if (!patch.labels.has_value())
            throw ValueError("evaluate_model: patch '" + patch.patch_id + "' has no mask");
        auto tiles = tile_rgb(patch.image, tile_size);
        int n = static_cast<int>(tiles.size());

        Tensor batch({n, 3, tile_size, tile_size});
        for (int i = 0; i < n; ++i)
            for (int y = 0; y < tile_size; ++y)
                for (int x = 0; x < tile_size; ++x)
                    for (int c = 0; c < 3; ++c)
                        batch.at4(i, c, y, x) = static_cast<double>(tiles[i].at(y, x, c)) / 255.0;

        EncoderOutput enc = forward_encoder(params, cfg, batch, Mode::Eval);
        Variable probs = forward_decoder(params, cfg, enc, Mode::Eval);

        std::vector<GrayImage> pred_tiles;
        pred_tiles.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) pred_tiles.push_back(predict_labels(probs.value(), i));
        GrayImage merged = merge_gray(pred_tiles, patch.image.height, patch.image.width);
        cm.accumulate(merged, *patch.labels);
    }

    EvalResult result;
    result.per_class_iou.reserve(static_cast<std::size_t>(cfg.num_classes));
    for (int k = 0; k < cfg.num_classes; ++k) result.per_class_iou.push_back(class_iou(cm, k));
    result.miou = miou(cm);
    result.num_pixels = cm.total();
    return result;
}

void write_results_json(const std::filesystem::path& path, const EvalResult& result) {
    nlohmann::json per_class;
    for (std::size_t k = 0; k < result.per_class_iou.size(); ++k) {
        std::string name = "class_" + std::to_string(k);
        if (result.per_class_iou[k].has_value())
            per_class[name] = *result.per_class_iou[k];
        else
            per_class[name] = nullptr;
    }
    nlohmann::json j;
    j["per_class_iou"] = per_class;
    j["miou"] = result.miou;
    j["num_pixels"] = result.num_pixels;
    std::ofstream out(path);
    if (!out) throw IoError("results: cannot open '" + path.string() + "'");
    out << j.dump(2) << "\n";
    if (!out) throw IoError("results: write failed for '" + path.string() + "'");
}

void write_results_csv(const std::filesystem::path& path, const EvalResult& result) {
    std::ofstream out(path);
    if (!out) throw IoError("results: cannot open '" + path.string() + "'");
    out << "class,iou_percent\n";
    char buf[128];
    for (std::size_t k = 0; k < result.per_class_iou.size(); ++k) {
        if (result.per_class_iou[k].has_value()) {
            std::snprintf(buf, sizeof(buf), "class_%zu,%.4f\n", k,
                          100.0 * *result.per_class_iou[k]);
            out << buf;
        } else {
            out << "class_" << k << ",\n";
        }
    }
    std::snprintf(buf, sizeof(buf), "miou,%.4f\n", 100.0 * result.miou);
    out << buf;
    if (!out) throw IoError("results: write failed for '" + path.string() + "'");
}

} // namespace segdesic
