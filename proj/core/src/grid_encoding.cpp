#include "segdesic/grid_encoding.hpp"

#include <cmath>
#include <cstddef>
#include <string>

#include "segdesic/errors.hpp"

namespace segdesic {

namespace {
constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
}

void GridConfig::validate() const {
    if (!(lambda_min > 0.0) || !(lambda_max > 0.0))
        throw ConfigError("grid: scales must be positive");
    if (lambda_min == lambda_max)
        throw ConfigError("grid: lambda_min and lambda_max must differ");
    if (num_scales < 2)
        throw ConfigError("grid: num_scales must be at least 2");
}

double scale_factor(const GridConfig& cfg, int s) {
    cfg.validate();
    if (s < 0 || s >= cfg.num_scales)
        throw ValueError("scale_factor: scale index " + std::to_string(s) +
                         " outside [0, " + std::to_string(cfg.num_scales - 1) + "]");
    double g = cfg.lambda_max / cfg.lambda_min;
    double expo = static_cast<double>(s) / static_cast<double>(cfg.num_scales - 1);
    return cfg.lambda_min * std::pow(g, expo);
}

GridEncoding grid_encode(const GridConfig& cfg, double lon, double lat, AngleUnit unit) {
    cfg.validate();
    if (!std::isfinite(lon) || !std::isfinite(lat))
        throw ValueError("grid_encode: non-finite coordinate");
    if (unit == AngleUnit::Radians) {
        lon *= kDegToRad;
        lat *= kDegToRad;
    }
    GridEncoding out;
    out.values.reserve(static_cast<std::size_t>(4 * cfg.num_scales));
    for (int s = 0; s < cfg.num_scales; ++s) {
        double alpha = scale_factor(cfg, s);
        out.values.push_back(std::sin(lon / alpha));
        out.values.push_back(std::cos(lon / alpha));
        out.values.push_back(std::sin(lat / alpha));
        out.values.push_back(std::cos(lat / alpha));
    }
    return out;
}

GridEncoding normalize_encoding(const GridEncoding& e, NormKind kind) {
    double norm = 0.0;
    if (kind == NormKind::L1) {
        for (double v : e.values) norm += std::fabs(v);
    } else {
        for (double v : e.values) norm += v * v;
        norm = std::sqrt(norm);
    }
    if (!(norm > 0.0))
        throw ValueError("normalize_encoding: degenerate all-zero encoding");
    GridEncoding out;
    out.values.reserve(e.values.size());
    for (double v : e.values) out.values.push_back(v / norm);
    out.normalized = true;
    return out;
}

double cosine_dissimilarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw ShapeError("cosine_dissimilarity: length mismatch " +
                         std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (!(na > 0.0) || !(nb > 0.0))
        throw ValueError("cosine_dissimilarity: zero-norm vector");
    double d = 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
    if (d < 0.0) d = 0.0;
    if (d > 2.0) d = 2.0;
    return d;
}

GridEncoding encode_pipeline(const EncodePipelineConfig& cfg, const Epsg2154Coord& raw) {
    Wgs84Coord geo;
    if (cfg.center_before_transform) {
        CenteredCoord centered = center_coordinate(raw, cfg.centering);
        geo = transform_2154_to_4326(centered, cfg.lcc);
    } else {
        geo = lcc_inverse(cfg.lcc, raw.easting, raw.northing);
    }
    GridEncoding enc = grid_encode(cfg.grid, geo.lon_deg, geo.lat_deg, cfg.angle_unit);
    return normalize_encoding(enc, cfg.norm_kind);
}

} // namespace segdesic
