#pragma once

#include <cstdint>
#include <vector>

#include "segdesic/autodiff.hpp"
#include "segdesic/param_store.hpp"

namespace segdesic {

/// Toy-scale U-Net-style segmentation network plus the coordinate-regression
/// head. encoding_dim must equal 4 * num_scales of the grid configuration.
struct ModelConfig {
    int in_channels = 3;
    int num_classes = 6;
    std::vector<int> encoder_channels = {16, 32, 64, 64};
    std::vector<int> segdesic_hidden = {256, 128, 128, 64, 64};
    int encoding_dim = 64;
    NormKind norm_kind = NormKind::L1;

    int num_stages() const { return static_cast<int>(encoder_channels.size()); }
    void validate() const; // throws ConfigError
};

enum class Mode { Train, Eval };

/// Builds all trainable arrays plus batch-norm buffers, He-uniform
/// initialized from the seed. Same seed, same bits.
ParameterStore build_model(const ModelConfig& cfg, std::uint64_t seed);

struct EncoderOutput {
    Variable bottleneck;
    std::vector<Variable> skips; // stage outputs, shallow to deep
};

/// Strided conv -> batch-norm -> relu per stage, halving the spatial dims.
/// H and W must be divisible by 2^num_stages.
EncoderOutput forward_encoder(ParameterStore& params, const ModelConfig& cfg,
                              const Tensor& images, Mode mode,
                              bool update_running_stats = true);

/// Transposed-conv upsampling with skip concatenation, final 1x1 conv and
/// softmax. Output: N x num_classes x H x W probabilities.
Variable forward_decoder(ParameterStore& params, const ModelConfig& cfg,
                         const EncoderOutput& enc, Mode mode,
                         bool update_running_stats = true);

/// Global max pool, six linear layers (batch-norm + relu between them),
/// then row normalization by norm_kind. Output: N x encoding_dim.
Variable forward_segdesic(ParameterStore& params, const ModelConfig& cfg,
                          const Variable& bottleneck, Mode mode,
                          bool update_running_stats = true);

struct ForwardOutput {
    Variable seg_probs;    // source only
    Variable c_hat_source; // N x D
    Variable c_hat_target; // N x D; undefined when no target batch given
};

/// Source images run encoder + decoder + head; target images (optional)
/// run encoder + head only. The decoder never sees target features.
ForwardOutput run_forward(ParameterStore& params, const ModelConfig& cfg,
                          const Tensor& source_images, const Tensor* target_images,
                          Mode mode, bool update_running_stats = true);

/// cross_entropy + alpha * (mean source dissimilarity + mean target
/// dissimilarity). With alpha == 0 the UDA branch is not built and the
/// result is exactly the cross-entropy graph.
Variable total_loss(const Variable& seg_probs, const Tensor& labels,
                    const Variable& c_hat_source, const Tensor& c_source,
                    const Variable& c_hat_target, const Tensor& c_target,
                    double alpha);

} // namespace segdesic
