#include "segdesic/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "segdesic/errors.hpp"
#include "segdesic/metrics.hpp"

namespace segdesic {

void TrainConfig::validate() const {
    if (batch_size < 2) throw ConfigError("train: batch_size must be at least 2");
    if (!(lr0 > 0.0)) throw ConfigError("train: lr0 must be positive");
    if (max_epochs < 1) throw ConfigError("train: max_epochs must be positive");
    if (patience < 0) throw ConfigError("train: patience must be non-negative");
    if (patience > max_epochs) throw ConfigError("train: patience exceeds max_epochs");
    if (alpha < 0.0) throw ConfigError("train: alpha must be non-negative");
    if (!(poly_power >= 0.0)) throw ConfigError("train: poly_power must be non-negative");
    if (crop_size < 1) throw ConfigError("train: crop_size must be positive");
    grid.validate();
    model.validate();
    if (model.encoding_dim != 4 * grid.num_scales)
        throw ConfigError("train: encoding_dim " + std::to_string(model.encoding_dim) +
                          " != 4 * num_scales (" + std::to_string(4 * grid.num_scales) + ")");
}

double poly_lr(double lr0, std::int64_t step, std::int64_t total_steps, double power) {
    if (total_steps < 1) throw ValueError("poly_lr: total_steps must be positive");
    if (step < 0 || step > total_steps)
        throw ValueError("poly_lr: step " + std::to_string(step) + " outside [0, " +
                         std::to_string(total_steps) + "]");
    double frac = 1.0 - static_cast<double>(step) / static_cast<double>(total_steps);
    return lr0 * std::pow(frac, power);
}

AdamState::AdamState(const ParameterStore& params, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& name : params.trainable_names()) {
        const Tensor& v = params.at(name).value();
        m_.emplace(name, Tensor(v.shape()));
        v_.emplace(name, Tensor(v.shape()));
    }
}

void AdamState::step(ParameterStore& params, double lr) {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (auto& [name, m] : m_) {
        Variable& p = params.at(name);
        if (!p.has_grad())
            throw ValueError("adam: parameter '" + name + "' has no gradient");
        const Tensor& g = p.grad();
        Tensor& v = v_.at(name);
        Tensor& val = p.value();
        if (!g.same_shape(val))
            throw ShapeError("adam: gradient shape mismatch for '" + name + "'");
        for (std::size_t i = 0; i < val.numel(); ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            val[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

TrainingData prepare_training_data(const Corpus& corpus, const EncodePipelineConfig& enc_cfg) {
    TrainingData data;
    for (const auto& s : corpus.samples) {
        switch (s.split) {
            case SplitTag::SourceTrain: {
                if (!s.labels.has_value())
                    throw ValueError("prepare_training_data: source patch '" + s.patch_id +
                                     "' has no mask");
                SourceSample out;
                out.image = s.image;
                out.labels = *s.labels;
                out.encoding = encode_pipeline(enc_cfg, s.coord).values;
                out.patch_id = s.patch_id;
                data.source_train.push_back(std::move(out));
                break;
            }
            case SplitTag::TargetTrain: {
                TargetSample out;
                out.image = s.image;
                out.encoding = encode_pipeline(enc_cfg, s.coord).values;
                out.patch_id = s.patch_id;
                data.target_train.push_back(std::move(out));
                break;
            }
            case SplitTag::SourceVal:
                data.source_val.push_back(s);
                break;
            case SplitTag::TargetTest:
                break; // evaluation-only split, not part of training data
        }
    }
    return data;
}

namespace {

// Crop offsets drawn in a fixed order per sample; tile-aligned mode snaps
// offsets to multiples of the crop size.
void crop_into(const RgbImage& img, const GrayImage* labels, int size, bool tile_aligned,
               Rng& rng, int batch_index, Tensor& images, Tensor* label_tensor) {
    int oy, ox;
    if (img.height == size && img.width == size) {
        oy = 0;
        ox = 0;
    } else if (tile_aligned) {
        oy = size * rng.uniform_int(0, (img.height - size) / size);
        ox = size * rng.uniform_int(0, (img.width - size) / size);
    } else {
        oy = img.height == size ? 0 : rng.uniform_int(0, img.height - size);
        ox = img.width == size ? 0 : rng.uniform_int(0, img.width - size);
    }
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            for (int c = 0; c < 3; ++c)
                images.at4(batch_index, c, y, x) =
                    static_cast<double>(img.at(oy + y, ox + x, c)) / 255.0;
            if (labels != nullptr && label_tensor != nullptr)
                label_tensor->vec()[(static_cast<std::size_t>(batch_index) * size + y) * size +
                                    x] = static_cast<double>(labels->at(oy + y, ox + x));
        }
    }
}

} // namespace

EpochMetrics train_epoch(ParameterStore& params, const TrainConfig& cfg,
                         const TrainingData& data, AdamState& adam,
                         std::int64_t& global_step, std::int64_t total_steps, int epoch) {
    if (data.source_train.empty())
        throw ValueError("train_epoch: empty source iterator");
    bool use_uda = cfg.alpha > 0.0;
    if (use_uda && data.target_train.empty())
        throw ValueError("train_epoch: empty target iterator with alpha > 0");

    int n_src = static_cast<int>(data.source_train.size());
    int batch = std::min(cfg.batch_size, n_src);
    if (batch < 2) throw ConfigError("train_epoch: need at least 2 source samples");
    int steps = std::max(1, n_src / batch);
    int crop = cfg.crop_size;
    int d = cfg.model.encoding_dim;

    std::vector<int> src_order(static_cast<std::size_t>(n_src));
    std::iota(src_order.begin(), src_order.end(), 0);
    Rng rng_src_order(hash_combine(hash_combine(cfg.seed, hash_str("source_order")),
                                   static_cast<std::uint64_t>(epoch)));
    rng_src_order.shuffle(src_order);
    Rng rng_src_crop(hash_combine(hash_combine(cfg.seed, hash_str("source_crop")),
                                  static_cast<std::uint64_t>(epoch)));

    std::vector<int> tgt_order;
    Rng rng_tgt_crop(hash_combine(hash_combine(cfg.seed, hash_str("target_crop")),
                                  static_cast<std::uint64_t>(epoch)));
    if (use_uda) {
        tgt_order.resize(data.target_train.size());
        std::iota(tgt_order.begin(), tgt_order.end(), 0);
        Rng rng_tgt_order(hash_combine(hash_combine(cfg.seed, hash_str("target_order")),
                                       static_cast<std::uint64_t>(epoch)));
        rng_tgt_order.shuffle(tgt_order);
    }

    EpochMetrics metrics;
    metrics.steps = steps;
    std::size_t tgt_cursor = 0;

    for (int s = 0; s < steps; ++s) {
        Tensor src_images({batch, 3, crop, crop});
        Tensor src_labels({batch, crop, crop});
        Tensor c_source({batch, d});
        for (int b = 0; b < batch; ++b) {
            const SourceSample& sample =
                data.source_train[static_cast<std::size_t>(src_order[s * batch + b])];
            if (sample.image.height < crop || sample.image.width < crop)
                throw ConfigError("train_epoch: crop_size exceeds patch size");
            if (static_cast<int>(sample.encoding.size()) != d)
                throw ShapeError("train_epoch: encoding length mismatch");
            crop_into(sample.image, &sample.labels, crop, cfg.tile_aligned_crops,
                      rng_src_crop, b, src_images, &src_labels);
            for (int j = 0; j < d; ++j)
                c_source.at2(b, j) = sample.encoding[static_cast<std::size_t>(j)];
        }

        Tensor tgt_images;
        Tensor c_target;
        if (use_uda) {
            tgt_images = Tensor({batch, 3, crop, crop});
            c_target = Tensor({batch, d});
            for (int b = 0; b < batch; ++b) {
                const TargetSample& sample =
                    data.target_train[static_cast<std::size_t>(
                        tgt_order[tgt_cursor % tgt_order.size()])];
                ++tgt_cursor;
                crop_into(sample.image, nullptr, crop, cfg.tile_aligned_crops, rng_tgt_crop,
                          b, tgt_images, nullptr);
                for (int j = 0; j < d; ++j)
                    c_target.at2(b, j) = sample.encoding[static_cast<std::size_t>(j)];
            }
        }

        params.zero_grad();
        ForwardOutput fwd = run_forward(params, cfg.model, src_images,
                                        use_uda ? &tgt_images : nullptr, Mode::Train);
        Variable seg_loss = cross_entropy(fwd.seg_probs, src_labels);
        Variable loss = seg_loss;
        double uda_s_value = 0.0, uda_t_value = 0.0;
        if (use_uda) {
            Variable uda_s = cosine_dissimilarity_mean(fwd.c_hat_source, c_source);
            Variable uda_t = cosine_dissimilarity_mean(fwd.c_hat_target, c_target);
            uda_s_value = uda_s.value()[0];
            uda_t_value = uda_t.value()[0];
            loss = add(seg_loss, scale(add(uda_s, uda_t), cfg.alpha));
        }
        backward(loss);

        double lr = poly_lr(cfg.lr0, global_step, total_steps, cfg.poly_power);
        if (s == 0) metrics.lr_first_step = lr;
        adam.step(params, lr);
        ++global_step;

        metrics.loss_seg += seg_loss.value()[0];
        metrics.loss_uda_s += uda_s_value;
        metrics.loss_uda_t += uda_t_value;
    }

    metrics.loss_seg /= steps;
    metrics.loss_uda_s /= steps;
    metrics.loss_uda_t /= steps;
    return metrics;
}

FitResult fit(const TrainConfig& cfg, const TrainingData& data) {
    cfg.validate();
    if (data.source_val.empty())
        throw ValueError("fit: no source validation patches");

    ParameterStore params = build_model(cfg.model, cfg.seed);
    AdamState adam(params);

    int n_src = static_cast<int>(data.source_train.size());
    if (n_src < 2) throw ValueError("fit: need at least 2 source training patches");
    int batch = std::min(cfg.batch_size, n_src);
    std::int64_t steps_per_epoch = std::max(1, n_src / batch);
    std::int64_t total_steps = steps_per_epoch * cfg.max_epochs;
    std::int64_t global_step = 0;

    FitResult result;
    EarlyStopping stopper(cfg.patience);

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        EpochMetrics m = train_epoch(params, cfg, data, adam, global_step, total_steps, epoch);

        EvalResult val = evaluate_model(params, cfg.model,
                                        std::span<const GeoSample>(data.source_val.data(),
                                                                   data.source_val.size()),
                                        cfg.crop_size);
        result.log.push_back(EpochLogRow{epoch, m.lr_first_step, m.loss_seg, m.loss_uda_s,
                                         m.loss_uda_t, val.miou});

        bool improved = val.miou > stopper.best();
        bool stop = stopper.update(val.miou);
        if (improved) {
            result.best_epoch = epoch;
            result.best_params = params.clone();
        }
        if (stop) break;
    }
    result.best_val_miou = stopper.best();
    return result;
}

void write_training_log_csv(const std::filesystem::path& path,
                            const std::vector<EpochLogRow>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("training log: cannot open '" + path.string() + "'");
    out << "epoch,lr,loss_seg,loss_uda_s,loss_uda_t,val_miou\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.epoch, r.lr,
                      r.loss_seg, r.loss_uda_s, r.loss_uda_t, r.val_miou);
        out << buf;
    }
    if (!out) throw IoError("training log: write failed for '" + path.string() + "'");
}

} // namespace segdesic
