#include "segdesic/run_config.hpp"

#include <fstream>
#include <sstream>

#include "config_json.hpp"

namespace segdesic {

using nlohmann::json;

EncodePipelineConfig RunConfig::encode_config() const {
    EncodePipelineConfig cfg;
    cfg.grid = train.grid;
    cfg.centering = encoding.centering;
    cfg.center_before_transform = encoding.center_before_transform;
    cfg.angle_unit = encoding.angle_unit;
    cfg.norm_kind = encoding.norm_kind;
    return cfg;
}

void RunConfig::validate() const {
    world.validate();
    train.validate();
    if (!std::isfinite(encoding.centering.easting) ||
        !std::isfinite(encoding.centering.northing))
        throw ConfigError("config: centering offsets must be finite");
}

RunConfig RunConfig::parse(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: not valid JSON: ") + e.what());
    }
    cfgjson::check_keys(j, {"world", "grid", "model", "train", "encoding"}, "<root>");

    RunConfig cfg;
    if (j.contains("world")) cfg.world = cfgjson::world_from_json(j.at("world"));
    if (j.contains("grid")) cfg.train.grid = cfgjson::grid_from_json(j.at("grid"));
    if (j.contains("encoding")) cfg.encoding = cfgjson::encoding_from_json(j.at("encoding"));
    cfg.train.model = cfgjson::model_from_json(j.contains("model") ? j.at("model") : json::object(),
                                               cfg.train.grid, cfg.world.num_classes);
    cfg.train.model.norm_kind = cfg.encoding.norm_kind;
    if (j.contains("train")) cfgjson::train_from_json(j.at("train"), cfg.train);
    cfg.validate();
    return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

std::string RunConfig::to_json_text() const {
    json j;
    j["world"] = cfgjson::world_to_json(world);
    j["grid"] = cfgjson::grid_to_json(train.grid);
    j["model"] = cfgjson::model_to_json(train.model);
    j["train"] = cfgjson::train_to_json(train);
    j["encoding"] = cfgjson::encoding_to_json(encoding);
    return j.dump(2) + "\n";
}

void RunConfig::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("config: cannot open '" + path.string() + "' for writing");
    out << to_json_text();
    if (!out) throw IoError("config: write failed for '" + path.string() + "'");
}

} // namespace segdesic
