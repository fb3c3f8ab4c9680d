#pragma once

// Internal JSON conversions for config structs. Not installed.

#include <string>
#include <vector>

#include "json.hpp"
#include "segdesic/errors.hpp"
#include "segdesic/run_config.hpp"

namespace segdesic::cfgjson {

using nlohmann::json;

inline void check_keys(const json& j, const std::vector<std::string>& allowed,
                       const std::string& section) {
    if (!j.is_object()) throw ConfigError("config: section '" + section + "' must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const auto& k : allowed) known = known || k == it.key();
        if (!known)
            throw ConfigError("config: unknown key '" + it.key() + "' in section '" + section +
                              "'");
    }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config: bad value for '") + key + "'");
    }
}

inline json box_to_json(const Box2154& b) {
    return json::array({b.min_easting, b.min_northing, b.max_easting, b.max_northing});
}

inline Box2154 box_from_json(const json& j, const char* key) {
    if (!j.is_array() || j.size() != 4)
        throw ConfigError(std::string("config: '") + key +
                          "' must be [min_e, min_n, max_e, max_n]");
    try {
        return Box2154{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
                       j[3].get<double>()};
    } catch (const json::exception&) {
        throw ConfigError(std::string("config: bad box value for '") + key + "'");
    }
}

inline json world_to_json(const WorldConfig& cfg) {
    json j;
    j["num_classes"] = cfg.num_classes;
    j["patch_size"] = cfg.patch_size;
    j["source_box"] = box_to_json(cfg.source_box);
    j["target_box"] = box_to_json(cfg.target_box);
    j["shift_strength"] = cfg.shift_strength;
    j["texture_seed"] = cfg.texture_seed;
    j["voronoi_sites"] = cfg.voronoi_sites;
    j["num_source"] = cfg.num_source;
    j["num_source_val"] = cfg.num_source_val;
    j["num_target"] = cfg.num_target;
    j["num_target_test"] = cfg.num_target_test;
    return j;
}

inline WorldConfig world_from_json(const json& j) {
    check_keys(j, {"num_classes", "patch_size", "source_box", "target_box", "shift_strength",
                   "texture_seed", "voronoi_sites", "num_source", "num_source_val",
                   "num_target", "num_target_test"},
               "world");
    WorldConfig cfg;
    cfg.num_classes = get_or(j, "num_classes", cfg.num_classes);
    cfg.patch_size = get_or(j, "patch_size", cfg.patch_size);
    if (j.contains("source_box")) cfg.source_box = box_from_json(j.at("source_box"), "source_box");
    if (j.contains("target_box")) cfg.target_box = box_from_json(j.at("target_box"), "target_box");
    cfg.shift_strength = get_or(j, "shift_strength", cfg.shift_strength);
    cfg.texture_seed = get_or(j, "texture_seed", cfg.texture_seed);
    cfg.voronoi_sites = get_or(j, "voronoi_sites", cfg.voronoi_sites);
    cfg.num_source = get_or(j, "num_source", cfg.num_source);
    cfg.num_source_val = get_or(j, "num_source_val", cfg.num_source_val);
    cfg.num_target = get_or(j, "num_target", cfg.num_target);
    cfg.num_target_test = get_or(j, "num_target_test", cfg.num_target_test);
    return cfg;
}

inline json grid_to_json(const GridConfig& cfg) {
    json j;
    j["lambda_min"] = cfg.lambda_min;
    j["lambda_max"] = cfg.lambda_max;
    j["num_scales"] = cfg.num_scales;
    return j;
}

inline GridConfig grid_from_json(const json& j) {
    check_keys(j, {"lambda_min", "lambda_max", "num_scales"}, "grid");
    GridConfig cfg;
    cfg.lambda_min = get_or(j, "lambda_min", cfg.lambda_min);
    cfg.lambda_max = get_or(j, "lambda_max", cfg.lambda_max);
    cfg.num_scales = get_or(j, "num_scales", cfg.num_scales);
    return cfg;
}

inline json model_to_json(const ModelConfig& cfg) {
    json j;
    j["in_channels"] = cfg.in_channels;
    j["num_classes"] = cfg.num_classes;
    j["encoder_channels"] = cfg.encoder_channels;
    j["segdesic_hidden"] = cfg.segdesic_hidden;
    j["encoding_dim"] = cfg.encoding_dim;
    return j;
}

/// encoding_dim falls back to 4 * num_scales when absent.
inline ModelConfig model_from_json(const json& j, const GridConfig& grid, int world_classes) {
    check_keys(j, {"in_channels", "num_classes", "encoder_channels", "segdesic_hidden",
                   "encoding_dim"},
               "model");
    ModelConfig cfg;
    cfg.in_channels = get_or(j, "in_channels", cfg.in_channels);
    cfg.num_classes = get_or(j, "num_classes", world_classes);
    cfg.encoder_channels = get_or(j, "encoder_channels", cfg.encoder_channels);
    cfg.segdesic_hidden = get_or(j, "segdesic_hidden", cfg.segdesic_hidden);
    cfg.encoding_dim = get_or(j, "encoding_dim", 4 * grid.num_scales);
    if (cfg.encoding_dim != 4 * grid.num_scales)
        throw ConfigError("config: model.encoding_dim " + std::to_string(cfg.encoding_dim) +
                          " != 4 * grid.num_scales (" + std::to_string(4 * grid.num_scales) +
                          ")");
    return cfg;
}

inline json encoding_to_json(const EncodingSettings& s) {
    json j;
    j["centering"] = json::array({s.centering.easting, s.centering.northing});
    j["center_before_transform"] = s.center_before_transform;
    j["angle_unit"] = s.angle_unit == AngleUnit::Degrees ? "degrees" : "radians";
    j["norm_kind"] = s.norm_kind == NormKind::L1 ? "l1" : "l2";
    return j;
}

inline EncodingSettings encoding_from_json(const json& j) {
    check_keys(j, {"centering", "center_before_transform", "angle_unit", "norm_kind"},
               "encoding");
    EncodingSettings s;
    if (j.contains("centering")) {
        const json& c = j.at("centering");
        if (!c.is_array() || c.size() != 2)
            throw ConfigError("config: 'centering' must be [easting, northing]");
        s.centering.easting = c[0].get<double>();
        s.centering.northing = c[1].get<double>();
    }
    s.center_before_transform = get_or(j, "center_before_transform", true);
    std::string unit = get_or<std::string>(j, "angle_unit", "degrees");
    if (unit == "degrees")
        s.angle_unit = AngleUnit::Degrees;
    else if (unit == "radians")
        s.angle_unit = AngleUnit::Radians;
    else
        throw ConfigError("config: angle_unit must be 'degrees' or 'radians'");
    std::string norm = get_or<std::string>(j, "norm_kind", "l1");
    if (norm == "l1")
        s.norm_kind = NormKind::L1;
    else if (norm == "l2")
        s.norm_kind = NormKind::L2;
    else
        throw ConfigError("config: norm_kind must be 'l1' or 'l2'");
    return s;
}

inline json train_to_json(const TrainConfig& cfg) {
    json j;
    j["batch_size"] = cfg.batch_size;
    j["lr0"] = cfg.lr0;
    j["max_epochs"] = cfg.max_epochs;
    j["patience"] = cfg.patience;
    j["seed"] = cfg.seed;
    j["alpha"] = cfg.alpha;
    j["poly_power"] = cfg.poly_power;
    j["crop_size"] = cfg.crop_size;
    j["tile_aligned_crops"] = cfg.tile_aligned_crops;
    return j;
}

inline void train_from_json(const json& j, TrainConfig& cfg) {
    check_keys(j, {"batch_size", "lr0", "max_epochs", "patience", "seed", "alpha",
                   "poly_power", "crop_size", "tile_aligned_crops"},
               "train");
    cfg.batch_size = get_or(j, "batch_size", cfg.batch_size);
    cfg.lr0 = get_or(j, "lr0", cfg.lr0);
    cfg.max_epochs = get_or(j, "max_epochs", cfg.max_epochs);
    cfg.patience = get_or(j, "patience", cfg.patience);
    cfg.seed = get_or(j, "seed", cfg.seed);
    cfg.alpha = get_or(j, "alpha", cfg.alpha);
    cfg.poly_power = get_or(j, "poly_power", cfg.poly_power);
    cfg.crop_size = get_or(j, "crop_size", cfg.crop_size);
    cfg.tile_aligned_crops = get_or(j, "tile_aligned_crops", cfg.tile_aligned_crops);
}

} // namespace segdesic::cfgjson
