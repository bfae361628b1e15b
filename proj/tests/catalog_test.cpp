#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "nnwave/catalog.hpp"
#include "nnwave/csv.hpp"

using namespace nnwave;

namespace {

const std::string kHeader = "storm_id,heading_deg,vf_kt,rmax_nmi,landfall_lon_deg,cp_mbar\n";

}  // namespace

TEST_CASE("storm catalog parses table rows") {
    std::string text = kHeader +
                       "1, 35.8, 9.5, 10.9, -102.376, 865.25\n"
                       "645, -62.029, 9.6, 16.8, -88.7653, 995.25\n";
    Catalog cat = parse_storm_catalog(text, {645});
    REQUIRE(cat.storms.size() == 2);
    const StormRecord& s1 = cat.storms[0];
    CHECK(s1.storm_id == 1);
    CHECK(s1.heading == 35.8);
    CHECK(s1.v_f == 9.5);
    CHECK(s1.r_max == 10.9);
    CHECK(s1.landfall_lon == -102.376);
    CHECK(s1.c_p == 865.25);
    CHECK_FALSE(s1.is_core);
    const StormRecord& s645 = cat.storms[1];
    CHECK(s645.storm_id == 645);
    CHECK(s645.c_p == 995.25);
    CHECK(s645.is_core);
    CHECK(cat.core_count() == 1);
}

TEST_CASE("storm catalog accepts tab separation, autodetected") {
    std::string text = "storm_id\theading_deg\tvf_kt\trmax_nmi\tlandfall_lon_deg\tcp_mbar\n"
                       "7\t35.8\t10.2\t59\t-102.377\t985.25\n";
    Catalog cat = parse_storm_catalog(text, {});
    REQUIRE(cat.storms.size() == 1);
    CHECK(cat.storms[0].r_max == 59.0);
}

TEST_CASE("header-only input yields an empty catalog") {
    Catalog cat = parse_storm_catalog(kHeader, {});
    CHECK(cat.storms.empty());
    CHECK(cat.core_count() == 0);
}

TEST_CASE("storm catalog rejects bad input") {
    CHECK_THROWS_AS(parse_storm_catalog(kHeader + "1, 35.8, 9.5, 10.9, -102.376, 1500\n", {}),
                    ValidationError);
    CHECK_THROWS_AS(parse_storm_catalog(kHeader + "1, 35.8, 9.5, 10.9, oops, 865.25\n", {}),
                    ParseError);
    CHECK_THROWS_AS(parse_storm_catalog(kHeader + "1,1,1,1,-90,900\n1,2,2,2,-91,901\n", {}),
                    ValidationError);
    CHECK_THROWS_AS(parse_storm_catalog("storm_id,heading_deg\n", {}), ParseError);
    // core id not present in the table
    CHECK_THROWS_AS(parse_storm_catalog(kHeader + "1,1,1,1,-90,900\n", {2}), ValidationError);
    // malformed error names the row and column
    try {
        parse_storm_catalog(kHeader + "1, 35.8, x, 10.9, -102.376, 865.25\n", {});
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        std::string msg = e.what();
        CHECK(msg.find("row 2") != std::string::npos);
        CHECK(msg.find("vf_kt") != std::string::npos);
    }
}

TEST_CASE("bundled storm table parses to 645 storms with exact endpoints") {
    std::string text = csv::read_file(std::string(NNWAVE_DATA_DIR) + "/storms.csv");
    Catalog cat = parse_storm_catalog(text, {});
    REQUIRE(cat.storms.size() == 645);
    CHECK(cat.storms.front().storm_id == 1);
    CHECK(cat.storms.front().heading == 35.8);
    CHECK(cat.storms.back().storm_id == 645);
    CHECK(cat.storms.back().landfall_lon == -88.7653);
}

TEST_CASE("catalog round-trips bit-for-bit through format/parse") {
    std::string text = csv::read_file(std::string(NNWAVE_DATA_DIR) + "/storms.csv");
    Catalog cat = parse_storm_catalog(text, {1, 9, 645});
    Catalog again = parse_storm_catalog(format_storm_catalog(cat), {1, 9, 645});
    REQUIRE(again.storms.size() == cat.storms.size());
    for (size_t i = 0; i < cat.storms.size(); ++i) {
        CHECK(again.storms[i].storm_id == cat.storms[i].storm_id);
        CHECK(again.storms[i].heading == cat.storms[i].heading);
        CHECK(again.storms[i].v_f == cat.storms[i].v_f);
        CHECK(again.storms[i].r_max == cat.storms[i].r_max);
        CHECK(again.storms[i].landfall_lon == cat.storms[i].landfall_lon);
        CHECK(again.storms[i].c_p == cat.storms[i].c_p);
        CHECK(again.storms[i].is_core == cat.storms[i].is_core);
    }
}

namespace {

const std::string kLsHeader = "point_id,lon_deg,lat_deg,elev_m,avg_slope,manning_n,z0_m,canopy\n";

}

TEST_CASE("landscape parsing") {
    Landscape ls = parse_landscape(kLsHeader + "1,-90.5,29.4,-2.5,0.001,0.03,0.002,0.4\n",
                                   "Lower", 2030, 0.08);
    REQUIRE(ls.points.size() == 1);
    CHECK(ls.points[0].elevation == -2.5);
    CHECK(ls.scenario == "Lower");
    CHECK(ls.msl == 0.08);

    CHECK_THROWS_AS(parse_landscape(kLsHeader + "1,-90,29,0,0,0.03,0.002,1.3\n", "L", 2030, 0.0),
                    ValidationError);
    CHECK_THROWS_AS(
        parse_landscape(kLsHeader + "1,-90,29,0,0,0.03,0.002,0.4\n1,-90,29,0,0,0.03,0.002,0.4\n",
                        "L", 2030, 0.0),
        ValidationError);

    // points come back sorted by point_id
    Landscape unsorted = parse_landscape(
        kLsHeader + "5,-90,29,0,0,0.03,0.002,0\n2,-90,29,0,0,0.03,0.002,0\n", "L", 2030, 0.0);
    CHECK(unsorted.points[0].point_id == 2);
    CHECK(unsorted.points[1].point_id == 5);

    // round-trip
    std::string again = format_landscape_points(unsorted);
    Landscape ls2 = parse_landscape(again, "L", 2030, 0.0);
    CHECK(ls2.points.size() == 2);
    CHECK(ls2.points[0].point_id == 2);
}

TEST_CASE("avg slope of a flat raster is zero") {
    Eigen::MatrixXd flat = Eigen::MatrixXd::Zero(4, 5);
    Eigen::MatrixXd s = compute_avg_slope(flat, 10.0);
    CHECK(s.isZero(0.0));
}

TEST_CASE("avg slope matches the hand-evaluated 2x2 corner") {
    Eigen::MatrixXd elev(2, 2);
    elev << 0, 1, 0, 1;
    Eigen::MatrixXd s = compute_avg_slope(elev, 1.0);
    // corner (0,0): right |1-0|/1, down |0-0|/1, diagonal |1-0|/sqrt(2)
    const double expected = (1.0 + 0.0 + 1.0 / std::sqrt(2.0)) / 3.0;
    CHECK(s(0, 0) == doctest::Approx(expected).epsilon(1e-15));
    CHECK(s(0, 0) == doctest::Approx(0.5690355937288492).epsilon(1e-12));
    // all four cells are symmetric in this raster
    CHECK(s(1, 1) == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("avg slope rejects degenerate rasters") {
    CHECK_THROWS_AS(compute_avg_slope(Eigen::MatrixXd::Zero(1, 1), 1.0), ValidationError);
    CHECK_THROWS_AS(compute_avg_slope(Eigen::MatrixXd::Zero(1, 5), 1.0), ValidationError);
    CHECK_THROWS_AS(compute_avg_slope(Eigen::MatrixXd::Zero(3, 3), 0.0), ValidationError);
}

TEST_CASE("avg slope: shift invariance and positive scaling") {
    std::mt19937_64 rng(42);
    auto uniform = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    for (int trial = 0; trial < 20; ++trial) {
        const int r = 2 + static_cast<int>(rng() % 5), c = 2 + static_cast<int>(rng() % 5);
        Eigen::MatrixXd elev(r, c);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) elev(i, j) = 20.0 * uniform() - 10.0;
        const double cell = 0.5 + 10.0 * uniform();
        const double shift = 40.0 * uniform() - 20.0;
        const double k = 0.1 + 5.0 * uniform();

        Eigen::MatrixXd base = compute_avg_slope(elev, cell);
        Eigen::MatrixXd shifted = compute_avg_slope(
            (elev.array() + shift).matrix(), cell);
        Eigen::MatrixXd scaled = compute_avg_slope((k * elev.array()).matrix(), cell);
        CHECK((base - shifted).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((scaled - k * base).cwiseAbs().maxCoeff() < 1e-10);
    }
}
