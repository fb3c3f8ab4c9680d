#pragma once

#include <span>
#include <vector>

#include "segdesic/geodesy.hpp"

namespace segdesic {

/// Geometric progression of encoding scales between lambda_min and
/// lambda_max. The defaults are the best-performing configuration.
struct GridConfig {
    double lambda_min = 0.01;
    double lambda_max = 0.00001;
    int num_scales = 16;

    void validate() const; // throws ConfigError
};

enum class NormKind { L1, L2 };
enum class AngleUnit { Degrees, Radians };

/// Multi-scale sin/cos embedding of a 2-D location; length 4 * num_scales.
struct GridEncoding {
    std::vector<double> values;
    bool normalized = false;
};

/// alpha_s = lambda_min * (lambda_max / lambda_min)^(s / (S - 1)).
/// Throws ValueError when s is outside [0, S-1].
double scale_factor(const GridConfig& cfg, int s);

/// Concatenates [sin(lon/alpha_s), cos(lon/alpha_s), sin(lat/alpha_s),
/// cos(lat/alpha_s)] over all scales. The trig arguments are the raw
/// dimensionless ratios; lon/lat are taken in the configured unit
/// (degrees by default, as produced by the EPSG:4326 transform).
GridEncoding grid_encode(const GridConfig& cfg, double lon, double lat,
                         AngleUnit unit = AngleUnit::Degrees);

/// Divides by the L1 (or L2) norm and sets the normalized flag.
/// Throws ValueError on an all-zero vector.
GridEncoding normalize_encoding(const GridEncoding& e, NormKind kind = NormKind::L1);

/// 1 - a.b / (|a||b|), in [0, 2]. Throws ShapeError on length mismatch,
/// ValueError when either norm is zero.
double cosine_dissimilarity(std::span<const double> a, std::span<const double> b);

/// Settings for the full raw-coordinate -> normalized-encoding chain.
struct EncodePipelineConfig {
    GridConfig grid;
    CenteringOffsets centering;
    LccParams lcc = LccParams::epsg2154();
    bool center_before_transform = true;
    AngleUnit angle_unit = AngleUnit::Degrees;
    NormKind norm_kind = NormKind::L1;
};

/// center -> planar-to-geodetic transform -> grid_encode -> normalize.
/// When center_before_transform is false the raw planar coordinate is
/// projected without centering.
GridEncoding encode_pipeline(const EncodePipelineConfig& cfg, const Epsg2154Coord& raw);

} // namespace segdesic
