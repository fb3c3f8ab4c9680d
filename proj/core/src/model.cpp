#include "segdesic/model.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include "segdesic/errors.hpp"
#include "segdesic/rng.hpp"

namespace segdesic {

namespace {

std::string stage_name(const char* prefix, int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%02d", prefix, i);
    return buf;
}

Tensor he_uniform(Rng& rng, std::vector<int> shape, int fan_in) {
    Tensor t(std::move(shape));
    double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-bound, bound);
    return t;
}

void add_conv(ParameterStore& store, Rng& rng, const std::string& name, int co, int ci,
              int k) {
    store.add(name + ".weight", he_uniform(rng, {co, ci, k, k}, ci * k * k), true);
    store.add(name + ".bias", Tensor({co}), true);
}

void add_upconv(ParameterStore& store, Rng& rng, const std::string& name, int ci, int co,
                int k) {
    // IOHW layout; fan_in follows the gather view of the operator.
    store.add(name + ".weight", he_uniform(rng, {ci, co, k, k}, ci * k * k), true);
    store.add(name + ".bias", Tensor({co}), true);
}

void add_bn(ParameterStore& store, const std::string& name, int c) {
    store.add(name + ".gamma", Tensor::full({c}, 1.0), true);
    store.add(name + ".beta", Tensor({c}), true);
    store.add(name + ".running_mean", Tensor({c}), false);
    store.add(name + ".running_var", Tensor::full({c}, 1.0), false);
}

void add_linear(ParameterStore& store, Rng& rng, const std::string& name, int out, int in) {
    store.add(name + ".weight", he_uniform(rng, {out, in}, in), true);
    store.add(name + ".bias", Tensor({out}), true);
}

Variable bn_relu(ParameterStore& params, const std::string& bn, const Variable& x, Mode mode,
                 bool update_stats) {
    Variable normed = batch_norm(x, params.at(bn + ".gamma"), params.at(bn + ".beta"),
                                 params.at(bn + ".running_mean"),
                                 params.at(bn + ".running_var"),
                                 mode == Mode::Train, update_stats);
    return relu(normed);
}

} // namespace

void ModelConfig::validate() const {
    if (in_channels < 1) throw ConfigError("model: in_channels must be positive");
    if (num_classes < 2) throw ConfigError("model: need at least 2 classes");
    if (encoder_channels.empty()) throw ConfigError("model: encoder_channels empty");
    for (int c : encoder_channels)
        if (c < 1) throw ConfigError("model: encoder channel counts must be positive");
    if (segdesic_hidden.size() != 5)
        throw ConfigError("model: segdesic_hidden must list 5 widths (six linear layers)");
    for (int c : segdesic_hidden)
        if (c < 1) throw ConfigError("model: segdesic widths must be positive");
    if (encoding_dim < 4 || encoding_dim % 4 != 0)
        throw ConfigError("model: encoding_dim must be a positive multiple of 4");
}

ParameterStore build_model(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    ParameterStore store;
    Rng rng(mix64(seed));
    const auto& ch = cfg.encoder_channels;
    int stages = cfg.num_stages();

    // Draw order is fixed by construction order, not by storage order.
    int prev = cfg.in_channels;
    for (int i = 0; i < stages; ++i) {
        std::string name = stage_name("enc", i);
        add_conv(store, rng, name + ".conv", ch[static_cast<std::size_t>(i)], prev, 3);
        add_bn(store, name + ".bn", ch[static_cast<std::size_t>(i)]);
        prev = ch[static_cast<std::size_t>(i)];
    }

    int cur = ch[static_cast<std::size_t>(stages - 1)];
    for (int i = stages - 2; i >= 0; --i) {
        std::string name = stage_name("dec", i);
        int skip_ch = ch[static_cast<std::size_t>(i)];
        add_upconv(store, rng, name + ".upconv", cur, skip_ch, 2);
        add_conv(store, rng, name + ".fuse", skip_ch, 2 * skip_ch, 3);
        add_bn(store, name + ".bn", skip_ch);
        cur = skip_ch;
    }
    add_upconv(store, rng, "dectop.upconv", cur, cur, 2);
    add_conv(store, rng, "dectop.conv", cur, cur, 3);
    add_bn(store, "dectop.bn", cur);
    add_conv(store, rng, "final", cfg.num_classes, cur, 1);

    int head_in = ch[static_cast<std::size_t>(stages - 1)];
    for (std::size_t i = 0; i < cfg.segdesic_hidden.size(); ++i) {
        std::string name = stage_name("head", static_cast<int>(i));
        add_linear(store, rng, name + ".linear", cfg.segdesic_hidden[i], head_in);
        add_bn(store, name + ".bn", cfg.segdesic_hidden[i]);
        head_in = cfg.segdesic_hidden[i];
    }
    add_linear(store, rng, stage_name("head", 5) + ".linear", cfg.encoding_dim, head_in);
    // Small nonzero bias keeps the output row normalizable even when every
    // hidden unit is dead (all-zero input image).
    store.at(stage_name("head", 5) + ".linear.bias").value().fill(0.01);

    return store;
}

EncoderOutput forward_encoder(ParameterStore& params, const ModelConfig& cfg,
                              const Tensor& images, Mode mode, bool update_running_stats) {
    require_ndim(images, 4, "forward_encoder");
    if (images.dim(1) != cfg.in_channels)
        throw ShapeError("forward_encoder: expected " + std::to_string(cfg.in_channels) +
                         " channels, got " + std::to_string(images.dim(1)));
    int stages = cfg.num_stages();
    int div = 1 << stages;
    if (images.dim(2) % div != 0 || images.dim(3) % div != 0)
        throw ShapeError("forward_encoder: spatial dims " + images.shape_str() +
                         " not divisible by 2^" + std::to_string(stages));

    bool update = update_running_stats && mode == Mode::Train;
    EncoderOutput out;
    Variable cur(images, false);
    for (int i = 0; i < stages; ++i) {
        std::string name = stage_name("enc", i);
        Variable conv = conv2d(cur, params.at(name + ".conv.weight"),
                               params.at(name + ".conv.bias"), 2, 1);
        cur = bn_relu(params, name + ".bn", conv, mode, update);
        if (i < stages - 1) out.skips.push_back(cur);
    }
    out.bottleneck = cur;
    return out;
}

Variable forward_decoder(ParameterStore& params, const ModelConfig& cfg,
                         const EncoderOutput& enc, Mode mode, bool update_running_stats) {
    if (!enc.bottleneck.defined())
        throw ShapeError("forward_decoder: undefined bottleneck");
    bool update = update_running_stats && mode == Mode::Train;
    int stages = cfg.num_stages();
    if (static_cast<int>(enc.skips.size()) != stages - 1)
        throw ShapeError("forward_decoder: expected " + std::to_string(stages - 1) +
                         " skip tensors");

    Variable cur = enc.bottleneck;
    for (int i = stages - 2; i >= 0; --i) {
        std::string name = stage_name("dec", i);
        Variable up = conv2d_transpose(cur, params.at(name + ".upconv.weight"),
                                       params.at(name + ".upconv.bias"), 2, 0);
        Variable cat = concat_channels(up, enc.skips[static_cast<std::size_t>(i)]);
        Variable fused = conv2d(cat, params.at(name + ".fuse.weight"),
                                params.at(name + ".fuse.bias"), 1, 1);
        cur = bn_relu(params, name + ".bn", fused, mode, update);
    }
    Variable up = conv2d_transpose(cur, params.at("dectop.upconv.weight"),
                                   params.at("dectop.upconv.bias"), 2, 0);
    Variable conv = conv2d(up, params.at("dectop.conv.weight"),
                           params.at("dectop.conv.bias"), 1, 1);
    Variable feat = bn_relu(params, "dectop.bn", conv, mode, update);
    Variable logits = conv2d(feat, params.at("final.weight"), params.at("final.bias"), 1, 0);
    return softmax_over_classes(logits);
}

Variable forward_segdesic(ParameterStore& params, const ModelConfig& cfg,
                          const Variable& bottleneck, Mode mode, bool update_running_stats) {
    if (!bottleneck.defined())
        throw ShapeError("forward_segdesic: undefined bottleneck");
    bool update = update_running_stats && mode == Mode::Train;

    Variable cur = global_max_pool(bottleneck);
    for (std::size_t i = 0; i < cfg.segdesic_hidden.size(); ++i) {
        std::string name = stage_name("head", static_cast<int>(i));
        Variable lin = linear(cur, params.at(name + ".linear.weight"),
                              params.at(name + ".linear.bias"));
        cur = bn_relu(params, name + ".bn", lin, mode, update);
    }
    std::string last = stage_name("head", 5);
    Variable out = linear(cur, params.at(last + ".linear.weight"),
                          params.at(last + ".linear.bias"));
    return normalize_rows(out, cfg.norm_kind);
}

ForwardOutput run_forward(ParameterStore& params, const ModelConfig& cfg,
                          const Tensor& source_images, const Tensor* target_images,
                          Mode mode, bool update_running_stats) {
    ForwardOutput out;
    EncoderOutput enc_s = forward_encoder(params, cfg, source_images, mode, update_running_stats);
    out.seg_probs = forward_decoder(params, cfg, enc_s, mode, update_running_stats);
    out.c_hat_source = forward_segdesic(params, cfg, enc_s.bottleneck, mode, update_running_stats);
    if (target_images != nullptr) {
        EncoderOutput enc_t =
            forward_encoder(params, cfg, *target_images, mode, update_running_stats);
        out.c_hat_target =
            forward_segdesic(params, cfg, enc_t.bottleneck, mode, update_running_stats);
    }
    return out;
}

Variable total_loss(const Variable& seg_probs, const Tensor& labels,
                    const Variable& c_hat_source, const Tensor& c_source,
                    const Variable& c_hat_target, const Tensor& c_target,
                    double alpha) {
    if (alpha < 0.0) throw ConfigError("total_loss: alpha must be non-negative");
    Variable seg = cross_entropy(seg_probs, labels);
    if (alpha == 0.0) return seg;
    Variable uda_s = cosine_dissimilarity_mean(c_hat_source, c_source);
    Variable uda_t = cosine_dissimilarity_mean(c_hat_target, c_target);
    return add(seg, scale(add(uda_s, uda_t), alpha));
}

} // namespace segdesic
