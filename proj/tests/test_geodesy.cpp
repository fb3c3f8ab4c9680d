#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "segdesic/errors.hpp"
#include "segdesic/geodesy.hpp"
#include "segdesic/rng.hpp"
#include "support/lcc_forward_oracle.hpp"

using namespace segdesic;

namespace {

struct OracleRow {
    std::string tag;
    double easting, northing, lon, lat;
};

std::vector<OracleRow> load_oracle() {
    std::ifstream in(std::string(SEGDESIC_TEST_DATA_DIR) + "/lcc2154_oracle.csv");
    REQUIRE(in.good());
    std::string line;
    std::getline(in, line); // header
    std::vector<OracleRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        OracleRow r;
        std::string field;
        std::getline(ss, r.tag, ',');
        std::getline(ss, field, ',');
        r.easting = std::stod(field);
        std::getline(ss, field, ',');
        r.northing = std::stod(field);
        std::getline(ss, field, ',');
        r.lon = std::stod(field);
        std::getline(ss, field, ',');
        r.lat = std::stod(field);
        rows.push_back(r);
    }
    return rows;
}

const OracleRow& oracle_row(const std::vector<OracleRow>& rows, const std::string& tag) {
    for (const auto& r : rows)
        if (r.tag == tag) return r;
    REQUIRE(false);
    return rows.front();
}

} // namespace

TEST_SUITE("geodesy") {

TEST_CASE("centering at the median point gives the origin") {
    CenteredCoord c = center_coordinate({489353.59, 6587552.20});
    CHECK(c.easting_c == 0.0);
    CHECK(c.northing_c == 0.0);
}

TEST_CASE("centering subtracts the offsets") {
    CenteredCoord c = center_coordinate({489354.59, 6587553.20});
    CHECK(c.easting_c == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(c.northing_c == doctest::Approx(1.0).epsilon(1e-9));

    CenteredCoord z = center_coordinate({0.0, 0.0});
    CHECK(z.easting_c == -489353.59);
    CHECK(z.northing_c == -6587552.20);
}

TEST_CASE("centering rejects non-finite input") {
    CHECK_THROWS_AS(center_coordinate({std::nan(""), 0.0}), ValueError);
    CHECK_THROWS_AS(center_coordinate({0.0, INFINITY}), ValueError);
}

TEST_CASE("centering round trip is within one ulp, exact in the shared binade") {
    // Adding the offsets back recovers the input up to the rounding of the
    // subtraction; when input and offset share a binade the subtraction is
    // exact (Sterbenz) and the round trip is bit-for-bit.
    CenteringOffsets off;
    Rng rng(42);
    for (int i = 0; i < 5000; ++i) {
        Epsg2154Coord raw{rng.uniform(0.0, 1.3e6), rng.uniform(6.0e6, 7.2e6)};
        CenteredCoord c = center_coordinate(raw, off);
        double back_e = c.easting_c + off.easting;
        double back_n = c.northing_c + off.northing;
        CHECK(std::fabs(back_e - raw.easting) <=
              std::ldexp(std::fabs(raw.easting), -50) + 1e-9);
        // northing window shares the offset's binade: exact
        CHECK(back_n == raw.northing);
        if (raw.easting > off.easting / 2.0 && raw.easting < 2.0 * off.easting)
            CHECK(back_e == raw.easting);
    }
}

TEST_CASE("lcc parameter validation") {
    LccParams p = LccParams::epsg2154();
    CHECK_NOTHROW(p.validate());
    p.std_parallel1_deg = -p.std_parallel2_deg;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = LccParams::epsg2154();
    p.inverse_flattening = 0.5;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = LccParams::epsg2154();
    p.semi_major_axis = -1.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("false origin maps to its own longitude/latitude") {
    Wgs84Coord g = lcc_inverse(LccParams::epsg2154(), 700000.0, 6600000.0);
    CHECK(std::fabs(g.lon_deg - 3.0) < 1e-9);
    CHECK(std::fabs(g.lat_deg - 46.5) < 1e-9);
}

TEST_CASE("inverse projection matches the reference oracle fixture") {
    auto rows = load_oracle();
    LccParams p = LccParams::epsg2154();
    int grid_rows = 0;
    for (const auto& r : rows) {
        Wgs84Coord g = lcc_inverse(p, r.easting, r.northing);
        CHECK(std::fabs(g.lon_deg - r.lon) < 1e-7);
        CHECK(std::fabs(g.lat_deg - r.lat) < 1e-7);
        if (r.tag == "grid") ++grid_rows;
    }
    CHECK(grid_rows == 25);

    const OracleRow& probe = oracle_row(rows, "probe");
    Wgs84Coord g = lcc_inverse(p, probe.easting, probe.northing);
    CHECK(std::fabs(g.lon_deg - probe.lon) < 1e-7);
    CHECK(std::fabs(g.lat_deg - probe.lat) < 1e-7);
}

TEST_CASE("forward o inverse is the identity on the validity window") {
    LccParams p = LccParams::epsg2154();
    Rng rng(7);
    for (int i = 0; i < 500; ++i) {
        double e = rng.uniform(0.0, 1.3e6);
        double n = rng.uniform(6.0e6, 7.2e6);
        Wgs84Coord g = lcc_inverse(p, e, n);
        auto [e2, n2] = testing::lcc_forward(p, g.lon_deg, g.lat_deg);
        CHECK(std::fabs(e2 - e) < 1e-4);
        CHECK(std::fabs(n2 - n) < 1e-4);
    }
}

TEST_CASE("latitude is monotone in northing at fixed easting") {
    LccParams p = LccParams::epsg2154();
    Rng rng(11);
    for (int i = 0; i < 200; ++i) {
        double e = rng.uniform(0.0, 1.3e6);
        double n1 = rng.uniform(6.0e6, 7.2e6);
        double n2 = rng.uniform(6.0e6, 7.2e6);
        if (n1 == n2) continue;
        if (n1 > n2) std::swap(n1, n2);
        CHECK(lcc_inverse(p, e, n1).lat_deg < lcc_inverse(p, e, n2).lat_deg);
    }
}

TEST_CASE("outputs stay inside geodetic bounds on the window") {
    LccParams p = LccParams::epsg2154();
    Rng rng(13);
    for (int i = 0; i < 500; ++i) {
        Wgs84Coord g = lcc_inverse(p, rng.uniform(0.0, 1.3e6), rng.uniform(6.0e6, 7.2e6));
        CHECK(g.lat_deg >= -90.0);
        CHECK(g.lat_deg <= 90.0);
        CHECK(g.lon_deg >= -180.0);
        CHECK(g.lon_deg <= 180.0);
    }
}

TEST_CASE("inverse rejects bad input") {
    LccParams p = LccParams::epsg2154();
    CHECK_THROWS_AS(lcc_inverse(p, std::nan(""), 6.6e6), ValueError);

    // a cone with its false origin at the pole puts the apex at the false
    // origin itself: the mapping radius there is exactly zero
    LccParams polar = p;
    polar.lat_false_origin_deg = 90.0;
    CHECK_THROWS_AS(lcc_inverse(polar, polar.false_easting, polar.false_northing), ValueError);
}

TEST_CASE("centered transform feeds the centered pair straight into the projection") {
    auto rows = load_oracle();
    const OracleRow& cfo = oracle_row(rows, "centered_false_origin");
    Wgs84Coord g = transform_2154_to_4326(CenteredCoord{cfo.easting, cfo.northing});
    CHECK(std::fabs(g.lon_deg - cfo.lon) < 1e-7);
    CHECK(std::fabs(g.lat_deg - cfo.lat) < 1e-7);

    const OracleRow& zero = oracle_row(rows, "centered_zero");
    Wgs84Coord gz = transform_2154_to_4326(CenteredCoord{0.0, 0.0});
    CHECK(std::fabs(gz.lon_deg - zero.lon) < 1e-7);
    CHECK(std::fabs(gz.lat_deg - zero.lat) < 1e-7);

    CHECK_THROWS_AS(transform_2154_to_4326(CenteredCoord{std::nan(""), 0.0}), ValueError);
}

} // TEST_SUITE
