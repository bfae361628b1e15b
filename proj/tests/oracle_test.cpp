#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "nnwave/oracle.hpp"

using namespace nnwave;

namespace {

StormRecord storm_at(double landfall_lon, double c_p, double v_f = 10.0, double r_max = 20.0,
                     double heading = 10.0) {
    StormRecord s;
    s.storm_id = 1;
    s.heading = heading;
    s.v_f = v_f;
    s.r_max = r_max;
    s.landfall_lon = landfall_lon;
    s.c_p = c_p;
    return s;
}

Landscape single_point_landscape(const GridPoint& pt, double msl) {
    Landscape ls;
    ls.scenario = "Test";
    ls.year = 2020;
    ls.msl = msl;
    ls.points = {pt};
    return ls;
}

GridPoint point_at(double lon, double lat, double elevation) {
    GridPoint p;
    p.point_id = 1;
    p.lon = lon;
    p.lat = lat;
    p.elevation = elevation;
    p.avg_slope = 0.004;
    p.manning_n = 0.03;
    p.z0 = 0.01;
    p.canopy = 0.4;
    return p;
}

std::mt19937_64 g_rng(20240717);
double uniform(double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(g_rng() >> 11) * 0x1.0p-53);
}

}  // namespace

TEST_CASE("zero pressure deficit forces eta = msl exactly") {
    OracleParams params;
    StormRecord s = storm_at(-90.5, 1013.25);
    GridPoint p = point_at(-90.5, 29.5, -5.0);
    Landscape ls = single_point_landscape(p, 0.35);
    CHECK(oracle_surge(s, ls, p, params) == 0.35);
}

TEST_CASE("surge at landfall matches the hand evaluation of the closed form") {
    OracleParams params;
    // dp = 148, v_f = 10, point at the landfall coordinate (d = 0, asym = 1),
    // D = 20 so the friction clamp vanishes and the shoaling term is e^-2.5.
    StormRecord s = storm_at(-91.0, 865.25, 10.0);
    const double msl = 0.2;
    GridPoint p = point_at(-91.0, params.landfall_lat, msl - 20.0);
    p.manning_n = 0.77;  // arbitrary: must not matter at D = 20
    Landscape ls = single_point_landscape(p, msl);
    const double expected_setup = 2.1429902407136705;  // 0.012*148*1.15*(1+0.6*e^-2.5)
    CHECK(oracle_surge(s, ls, p, params) == doctest::Approx(msl + expected_setup).epsilon(1e-12));
}

TEST_CASE("doubling manning_n on land strictly decreases the setup") {
    OracleParams params;
    StormRecord s = storm_at(-90.6, 920.0);
    GridPoint p = point_at(-90.5, 29.45, 0.8);  // D = msl - 0.8 < 0
    Landscape ls = single_point_landscape(p, 0.1);
    const double eta1 = oracle_surge(s, ls, p, params);
    GridPoint p2 = p;
    p2.manning_n *= 2.0;
    const double eta2 = oracle_surge(s, ls, p2, params);
    CHECK(eta2 < eta1);
    CHECK(eta1 > ls.msl);
}

TEST_CASE("dry points have zero wave height") {
    OracleParams params;
    StormRecord s = storm_at(-90.5, 900.0);
    GridPoint p = point_at(-90.5, 29.5, 10.0);  // far above any surge
    Landscape ls = single_point_landscape(p, 0.0);
    const double eta = oracle_surge(s, ls, p, params);
    REQUIRE(eta < p.elevation);
    CHECK(oracle_wave(s, ls, p, params, eta) == 0.0);
}

TEST_CASE("deep wind-limited wave matches the hand evaluation") {
    OracleParams params;
    StormRecord s = storm_at(-91.0, 865.25, 10.0);
    const double msl = 0.2;
    GridPoint p = point_at(-91.0, params.landfall_lat, msl - 20.0);
    Landscape ls = single_point_landscape(p, msl);
    const double eta = oracle_surge(s, ls, p, params);
    const double h = eta - p.elevation;
    // 0.0025 * 9*148 * e^-0.02 * 0.8 * 1.06, wind-limited because gamma*h ~ 17 m
    const double expected_hs0 = 2.767924221630548;
    REQUIRE(params.gamma * h > expected_hs0);
    CHECK(oracle_wave(s, ls, p, params, eta) == doctest::Approx(expected_hs0).epsilon(1e-12));
}

TEST_CASE("full canopy halves the non-breaking wave height exactly") {
    OracleParams params;
    StormRecord s = storm_at(-90.8, 905.0);
    GridPoint p0 = point_at(-90.5, 29.4, -30.0);
    p0.canopy = 0.0;
    GridPoint p1 = p0;
    p1.canopy = 1.0;
    Landscape ls = single_point_landscape(p0, 0.0);
    const double eta = 0.5;
    const double hs0 = oracle_wave(s, ls, p0, params, eta);
    const double hs1 = oracle_wave(s, ls, p1, params, eta);
    REQUIRE(hs0 > 0);
    CHECK(hs1 == doctest::Approx(0.5 * hs0).epsilon(1e-15));
}

TEST_CASE("property: hs <= gamma * inundation depth, equality on the breaking branch") {
    OracleParams params;
    for (int i = 0; i < 300; ++i) {
        StormRecord s = storm_at(uniform(-94, -87), uniform(855, 1010), uniform(4, 25),
                                 uniform(5, 70), uniform(-179, 180));
        GridPoint p = point_at(uniform(-93, -88), uniform(28.8, 30.2), uniform(-12, 4));
        p.avg_slope = uniform(0, 0.05);
        p.manning_n = uniform(0, 0.1);
        p.z0 = uniform(0, 0.05);
        p.canopy = uniform(0, 1);
        Landscape ls = single_point_landscape(p, uniform(-0.5, 2.0));
        const double eta = oracle_surge(s, ls, p, params);
        const double hs = oracle_wave(s, ls, p, params, eta);
        const double h = std::max(0.0, eta - p.elevation);
        CHECK(eta >= ls.msl);
        CHECK(hs >= 0.0);
        CHECK(hs <= params.gamma * h + 1e-12);
        if (h == 0.0) CHECK(hs == 0.0);
    }
}

TEST_CASE("property: setup is nonincreasing in distance to landfall") {
    OracleParams params;
    for (int i = 0; i < 100; ++i) {
        StormRecord s = storm_at(uniform(-92, -89), uniform(855, 1000), uniform(4, 25),
                                 uniform(5, 70), 0.0);  // heading 0: asym constant in lat
        const double msl = uniform(-0.2, 1.5);
        GridPoint near = point_at(s.landfall_lon, params.landfall_lat + uniform(0, 0.2),
                                  uniform(-10, 1));
        GridPoint far = near;
        far.lat = near.lat + uniform(0.05, 2.0);  // same lon: asym unchanged, d grows
        Landscape ls = single_point_landscape(near, msl);
        CHECK(oracle_surge(s, ls, near, params) >= oracle_surge(s, ls, far, params) - 1e-12);
    }
}

TEST_CASE("property: mirror symmetry of the asymmetry factor") {
    OracleParams params;
    for (int i = 0; i < 100; ++i) {
        StormRecord s = storm_at(uniform(-93, -88), uniform(855, 1000), uniform(4, 25),
                                 uniform(5, 70), uniform(-179, 180));
        GridPoint p = point_at(uniform(-92, -89), uniform(29.0, 30.0), uniform(-8, 2));
        Landscape ls = single_point_landscape(p, uniform(0, 1));

        StormRecord mirrored = s;
        mirrored.heading = 180.0 - s.heading;  // flips cos(heading)
        GridPoint reflected = p;
        reflected.lon = 2.0 * s.landfall_lon - p.lon;  // flips rel, keeps d

        const double eta = oracle_surge(s, ls, p, params);
        const double eta_m = oracle_surge(mirrored, ls, reflected, params);
        CHECK(eta == doctest::Approx(eta_m).epsilon(1e-12));
        CHECK(oracle_wave(s, ls, p, params, eta) ==
              doctest::Approx(oracle_wave(mirrored, ls, reflected, params, eta_m)).epsilon(1e-12));
    }
}

TEST_CASE("generate_simulations: sizes, determinism, and errors") {
    OracleParams params;
    Catalog cat;
    for (int i = 1; i <= 5; ++i) {
        StormRecord s = storm_at(-91.0 - 0.2 * i, 880.0 + 20 * i);
        s.storm_id = i;
        s.is_core = i <= 2;
        cat.storms.push_back(s);
    }
    std::vector<Landscape> landscapes;
    for (int k = 0; k < 3; ++k) {
        Landscape ls;
        ls.scenario = k == 0 ? "Baseline" : "Lower";
        ls.year = 2020 + 10 * k;
        ls.msl = 0.1 * k;
        for (int pid = 1; pid <= 4; ++pid) {
            GridPoint p = point_at(-91.0 - 0.1 * pid, 29.3 + 0.05 * pid, -2.0 + pid);
            p.point_id = pid;
            ls.points.push_back(p);
        }
        landscapes.push_back(ls);
    }
    auto rule = default_subset_rule(cat, "Baseline");
    SimulationTable table = generate_simulations(cat, landscapes, params, rule);
    // 5 storms x 4 points on the baseline, 2 core storms x 4 points on each future
    CHECK(table.size() == 5 * 4 + 2 * 2 * 4);
    CHECK(table.records({"Baseline", 2020}).size() == 20);
    CHECK(table.records({"Lower", 2030}).size() == 8);

    SimulationTable again = generate_simulations(cat, landscapes, params, rule);
    for (const auto& lk : table.landscape_keys()) {
        const auto& a = table.records(lk);
        const auto& b = again.records(lk);
        REQUIRE(a.size() == b.size());
        for (size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].storm_id == b[i].storm_id);
            CHECK(a[i].point_id == b[i].point_id);
            CHECK(a[i].surge == b[i].surge);  // bit-identical
            CHECK(a[i].hs == b[i].hs);
        }
    }

    SUBCASE("single storm, single landscape, single point") {
        Catalog one;
        one.storms = {cat.storms[0]};
        Landscape ls = landscapes[0];
        ls.points.resize(1);
        SimulationTable t = generate_simulations(one, {ls}, params,
                                                 [&](const Landscape&) { return std::set<int>{1}; });
        CHECK(t.size() == 1);
    }
    SUBCASE("empty subset is a configuration error") {
        CHECK_THROWS_AS(generate_simulations(cat, landscapes, params,
                                             [](const Landscape&) { return std::set<int>{}; }),
                        ConfigError);
    }
}
