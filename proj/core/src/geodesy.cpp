#include "segdesic/geodesy.hpp"

#include <cmath>
#include <string>

#include "segdesic/errors.hpp"

namespace segdesic {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kDegToRad = kPi / 180.0;
constexpr double kRadToDeg = 180.0 / kPi;
constexpr double kLatTolRad = 1e-12;
constexpr int kMaxIterations = 50;

double isometric_m(double phi, double e2) {
    double s = std::sin(phi);
    return std::cos(phi) / std::sqrt(1.0 - e2 * s * s);
}

double isometric_t(double phi, double e) {
    double s = std::sin(phi);
    return std::tan(kPi / 4.0 - phi / 2.0) /
           std::pow((1.0 - e * s) / (1.0 + e * s), e / 2.0);
}

struct ConeConstants {
    double e;      // first eccentricity
    double n;      // cone constant
    double af;     // a * F
    double rho0;   // mapping radius at the false origin latitude
    double lam0;   // false origin longitude, radians
};

ConeConstants derive(const LccParams& p) {
    double f = 1.0 / p.inverse_flattening;
    double e2 = f * (2.0 - f);
    double e = std::sqrt(e2);
    double phi1 = p.std_parallel1_deg * kDegToRad;
    double phi2 = p.std_parallel2_deg * kDegToRad;
    double phi0 = p.lat_false_origin_deg * kDegToRad;

    double m1 = isometric_m(phi1, e2);
    double m2 = isometric_m(phi2, e2);
    double t1 = isometric_t(phi1, e);
    double t2 = isometric_t(phi2, e);

    ConeConstants c;
    c.e = e;
    c.n = (std::log(m1) - std::log(m2)) / (std::log(t1) - std::log(t2));
    double big_f = m1 / (c.n * std::pow(t1, c.n));
    c.af = p.semi_major_axis * big_f;
    c.rho0 = c.af * std::pow(isometric_t(phi0, e), c.n);
    c.lam0 = p.lon_false_origin_deg * kDegToRad;
    return c;
}

} // namespace

LccParams LccParams::epsg2154() {
    LccParams p;
    p.semi_major_axis = 6378137.0;
    p.inverse_flattening = 298.257222101;
    p.lat_false_origin_deg = 46.5;
    p.lon_false_origin_deg = 3.0;
    p.std_parallel1_deg = 44.0;
    p.std_parallel2_deg = 49.0;
    p.false_easting = 700000.0;
    p.false_northing = 6600000.0;
    return p;
}

void LccParams::validate() const {
    if (!(semi_major_axis > 0.0))
        throw ConfigError("LCC: semi-major axis must be positive");
    if (!(inverse_flattening > 1.0))
        throw ConfigError("LCC: inverse flattening must exceed 1");
    if (std_parallel1_deg == -std_parallel2_deg)
        throw ConfigError("LCC: standard parallels may not be opposite (cone constant undefined)");
}

CenteredCoord center_coordinate(const Epsg2154Coord& c, const CenteringOffsets& offsets) {
    if (!std::isfinite(c.easting) || !std::isfinite(c.northing))
        throw ValueError("center_coordinate: non-finite coordinate");
    return CenteredCoord{c.easting - offsets.easting, c.northing - offsets.northing};
}

Wgs84Coord lcc_inverse(const LccParams& p, double easting, double northing) {
    p.validate();
    if (!std::isfinite(easting) || !std::isfinite(northing))
        throw ValueError("lcc_inverse: non-finite coordinate");

    const ConeConstants c = derive(p);

    double de = easting - p.false_easting;
    double dn = c.rho0 - (northing - p.false_northing);
    double rho = std::copysign(std::hypot(de, dn), c.n);
    double base = rho / c.af;
    if (!(base > 0.0))
        throw ValueError("lcc_inverse: radius outside projection domain");

    double t = std::pow(base, 1.0 / c.n);
    double theta = std::atan2(de, dn);
    double lam = theta / c.n + c.lam0;

    double phi = kPi / 2.0 - 2.0 * std::atan(t);
    bool converged = false;
    for (int i = 0; i < kMaxIterations; ++i) {
        double s = std::sin(phi);
        double next = kPi / 2.0 -
                      2.0 * std::atan(t * std::pow((1.0 - c.e * s) / (1.0 + c.e * s), c.e / 2.0));
        double delta = std::fabs(next - phi);
        phi = next;
        if (delta < kLatTolRad) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw ConvergenceError("lcc_inverse: latitude iteration did not converge in " +
                               std::to_string(kMaxIterations) + " steps");

    return Wgs84Coord{lam * kRadToDeg, phi * kRadToDeg};
}

Wgs84Coord transform_2154_to_4326(const CenteredCoord& c) {
    return transform_2154_to_4326(c, LccParams::epsg2154());
}

Wgs84Coord transform_2154_to_4326(const CenteredCoord& c, const LccParams& p) {
    if (!std::isfinite(c.easting_c) || !std::isfinite(c.northing_c))
        throw ValueError("transform_2154_to_4326: non-finite coordinate");
    return lcc_inverse(p, c.easting_c, c.northing_c);
}

} // namespace segdesic
