#pragma once

namespace segdesic {

/// Planar Lambert-93 coordinate, meters.
struct Epsg2154Coord {
    double easting = 0.0;
    double northing = 0.0;
};

/// Median-centered planar coordinate, meters.
struct CenteredCoord {
    double easting_c = 0.0;
    double northing_c = 0.0;
};

/// Geodetic coordinate, degrees. Longitude in [-180, 180], latitude in [-90, 90].
struct Wgs84Coord {
    double lon_deg = 0.0;
    double lat_deg = 0.0;
};

/// Two-standard-parallel Lambert Conformal Conic definition on an ellipsoid.
struct LccParams {
    double semi_major_axis = 0.0;      // meters
    double inverse_flattening = 0.0;   // dimensionless
    double lat_false_origin_deg = 0.0;
    double lon_false_origin_deg = 0.0;
    double std_parallel1_deg = 0.0;
    double std_parallel2_deg = 0.0;
    double false_easting = 0.0;  // meters
    double false_northing = 0.0; // meters

    /// Published EPSG:2154 definition: GRS80, false origin 3E / 46.5N,
    /// standard parallels 44N / 49N, false easting 700000 m, false
    /// northing 6600000 m.
    static LccParams epsg2154();

    /// Throws ConfigError if the cone constant is undefined or the
    /// ellipsoid is degenerate.
    void validate() const;
};

/// Offsets subtracted from raw planar coordinates; defaults are the
/// dataset medians used throughout.
struct CenteringOffsets {
    double easting = 489353.59;
    double northing = 6587552.20;
};

/// Subtracts the configured medians. Throws ValueError on non-finite input.
CenteredCoord center_coordinate(const Epsg2154Coord& c,
                                const CenteringOffsets& offsets = {});

/// Inverse LCC-2SP projection: planar (easting, northing) to geodetic
/// (lon, lat) in degrees. Latitude is recovered iteratively to 1e-12 rad;
/// throws ConvergenceError after 50 iterations, ValueError when the radius
/// term leaves the positive domain or inputs are non-finite.
Wgs84Coord lcc_inverse(const LccParams& p, double easting, double northing);

/// Applies lcc_inverse with EPSG:2154 parameters to a centered pair,
/// feeding the centered values directly to the projection.
Wgs84Coord transform_2154_to_4326(const CenteredCoord& c);
Wgs84Coord transform_2154_to_4326(const CenteredCoord& c, const LccParams& p);

} // namespace segdesic
