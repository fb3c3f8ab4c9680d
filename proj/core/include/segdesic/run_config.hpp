#pragma once

#include <filesystem>
#include <string>

#include "segdesic/grid_encoding.hpp"
#include "segdesic/synthetic.hpp"
#include "segdesic/trainer.hpp"

namespace segdesic {

/// Non-grid knobs of the coordinate-encoding pipeline.
struct EncodingSettings {
    CenteringOffsets centering;
    bool center_before_transform = true;
    AngleUnit angle_unit = AngleUnit::Degrees;
    NormKind norm_kind = NormKind::L1;
};

/// One JSON document driving every command: world generation, grid encoding,
/// model, training. Loading fills defaults for missing keys, rejects unknown
/// ones and enforces encoding_dim = 4 * num_scales.
struct RunConfig {
    WorldConfig world;
    TrainConfig train; // embeds GridConfig and ModelConfig
    EncodingSettings encoding;

    EncodePipelineConfig encode_config() const;
    void validate() const;

    static RunConfig load(const std::filesystem::path& path);
    static RunConfig parse(const std::string& json_text);
    std::string to_json_text() const;
    void save(const std::filesystem::path& path) const;
};

} // namespace segdesic
