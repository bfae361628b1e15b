#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "nnwave/hazard.hpp"
#include "nnwave/reports.hpp"

using namespace nnwave;

namespace {

std::mt19937_64 g_rng(55001);
double uniform(double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(g_rng() >> 11) * 0x1.0p-53);
}

// Independent oracle: evaluates AEP(h) by direct rate summation on a dense
// threshold sweep (every peak, zero, and a fine filler grid) and inverts by
// scanning from the largest threshold down. The filler thresholds would
// expose any implementation that returns values that are not peaks.
double brute_force_invert(const std::map<int, double>& peaks, const StormRates& rates,
                          double aep) {
    std::vector<double> candidates = {0.0};
    double hi = 0.0;
    for (const auto& [id, p] : peaks) {
        candidates.push_back(p);
        hi = std::max(hi, p);
    }
    for (int i = 0; i <= 1000; ++i) candidates.push_back(hi * i / 1000.0 + 1e-9 * i);
    std::sort(candidates.begin(), candidates.end(), std::greater<>());
    for (double h : candidates) {
        if (h < 0) continue;
        double lambda = 0;
        for (const auto& [id, p] : peaks)
            if (p >= h) lambda += rates.rate.at(id);
        if (1.0 - std::exp(-lambda) >= aep) return h;
    }
    return 0.0;
}

}  // namespace

TEST_CASE("standard AEP grid: 23 log-spaced values with exact endpoints") {
    AepGrid g = AepGrid::standard();
    REQUIRE(g.aep.size() == 23);
    CHECK(g.aep.front() == 0.5);
    CHECK(g.aep.back() == 0.0005);
    for (size_t i = 1; i < g.aep.size(); ++i) CHECK(g.aep[i] < g.aep[i - 1]);
}

TEST_CASE("exceedance curve: all-zero peaks give the zero curve") {
    StormRates rates;
    rates.rate = {{1, 0.1}, {2, 0.2}};
    std::map<int, double> peaks = {{1, 0.0}, {2, 0.0}};
    HazardCurve c = exceedance_curve(peaks, rates, AepGrid::standard());
    for (double h : c.hs) CHECK(h == 0.0);
}

TEST_CASE("exceedance curve matches the hand-enumerated 3-storm step function") {
    StormRates rates;
    rates.rate = {{1, 0.01}, {2, 0.005}, {3, 0.002}};
    std::map<int, double> peaks = {{1, 1.0}, {2, 2.0}, {3, 3.0}};
    // lambda(h<=1) = 0.017, lambda(1<h<=2) = 0.007, lambda(2<h<=3) = 0.002
    AepGrid g;
    g.aep = {1 - std::exp(-0.017) - 1e-12, 1 - std::exp(-0.007) - 1e-12,
             1 - std::exp(-0.002) - 1e-12, 0.0001};
    HazardCurve c = exceedance_curve(peaks, rates, g);
    CHECK(c.hs[0] == 1.0);
    CHECK(c.hs[1] == 2.0);
    CHECK(c.hs[2] == 3.0);
    CHECK(c.hs[3] == 3.0);

    // just above each plateau the curve steps down
    AepGrid above;
    above.aep = {1 - std::exp(-0.017) + 1e-9, 1 - std::exp(-0.007) + 1e-9,
                 1 - std::exp(-0.002) + 1e-9};
    HazardCurve c2 = exceedance_curve(peaks, rates, above);
    CHECK(c2.hs[0] == 0.0);  // needs more than the total rate 0.017
    CHECK(c2.hs[1] == 1.0);
    CHECK(c2.hs[2] == 2.0);
}

TEST_CASE("exceedance curve equals the brute-force oracle on random instances") {
    AepGrid grid = AepGrid::standard();
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + static_cast<int>(g_rng() % 6);
        StormRates rates;
        std::map<int, double> peaks;
        for (int i = 1; i <= n; ++i) {
            rates.rate[i] = uniform(1e-4, 0.4);
            peaks[i] = uniform(0.0, 4.0);
        }
        HazardCurve c = exceedance_curve(peaks, rates, grid);
        for (size_t gi = 0; gi < grid.aep.size(); ++gi) {
            const double expect = brute_force_invert(peaks, rates, grid.aep[gi]);
            REQUIRE(c.hs[gi] == expect);  // exact, not approximate
        }
        // monotone: hs nonincreasing as aep increases (grid is decreasing)
        for (size_t gi = 1; gi < c.hs.size(); ++gi) CHECK(c.hs[gi] >= c.hs[gi - 1]);
    }
}

TEST_CASE("exceedance curve: scaling all rates up weakly raises the curve") {
    AepGrid grid = AepGrid::standard();
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 2 + static_cast<int>(g_rng() % 5);
        StormRates rates, scaled;
        std::map<int, double> peaks;
        for (int i = 1; i <= n; ++i) {
            rates.rate[i] = uniform(1e-4, 0.2);
            scaled.rate[i] = rates.rate[i] * 10.0;
            peaks[i] = uniform(0.0, 4.0);
        }
        HazardCurve lo = exceedance_curve(peaks, rates, grid);
        HazardCurve hi = exceedance_curve(peaks, scaled, grid);
        for (size_t gi = 0; gi < grid.aep.size(); ++gi) CHECK(hi.hs[gi] >= lo.hs[gi]);
    }
}

TEST_CASE("exceedance curve: missing rate is a key error") {
    StormRates rates;
    rates.rate = {{1, 0.1}};
    std::map<int, double> peaks = {{1, 1.0}, {2, 2.0}};
    CHECK_THROWS_AS(exceedance_curve(peaks, rates, AepGrid::standard()), ValidationError);
}

TEST_CASE("ks statistic: identical, separated, and the n=3 illustration") {
    auto curve = [](std::vector<double> hs) {
        HazardCurve c;
        c.hs = std::move(hs);
        c.aep.resize(c.hs.size());
        for (size_t i = 0; i < c.aep.size(); ++i) c.aep[i] = 0.5 / (i + 1);
        return c;
    };
    HazardCurve a = curve({1, 2, 3});
    CHECK(ks_statistic(a, a) == 0.0);

    HazardCurve b = curve({2, 3, 4});
    CHECK(ks_statistic(a, b) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(ks_statistic(b, a) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    HazardCurve lo = curve({1, 2, 3}), hi = curve({10, 11, 12});
    CHECK(ks_statistic(lo, hi) == 1.0);

    HazardCurve other = curve({1, 2});
    CHECK_THROWS_AS(ks_statistic(a, other), ValidationError);
}

TEST_CASE("ks statistic: symmetry and zero-iff-identical on random samples") {
    for (int trial = 0; trial < 100; ++trial) {
        const size_t n = 23;
        HazardCurve a, b;
        a.aep = b.aep = AepGrid::standard().aep;
        for (size_t i = 0; i < n; ++i) {
            a.hs.push_back(uniform(0, 3));
            b.hs.push_back(uniform(0, 3));
        }
        const double dab = ks_statistic(a, b), dba = ks_statistic(b, a);
        CHECK(dab == dba);
        CHECK(dab >= 0.0);
        CHECK(dab <= 1.0);
        // D = 0 iff the sorted samples coincide
        std::vector<double> sa = a.hs, sb = b.hs;
        std::sort(sa.begin(), sa.end());
        std::sort(sb.begin(), sb.end());
        CHECK((dab == 0.0) == (sa == sb));

        HazardCurve shuffled = a;
        std::shuffle(shuffled.hs.begin(), shuffled.hs.end(), g_rng);
        CHECK(ks_statistic(a, shuffled) == 0.0);
    }
}

TEST_CASE("ks threshold reproduces Eq.-1 value at alpha=0.05, n=23") {
    CHECK(std::abs(ks_threshold(0.05, 23) - 0.400482) < 1e-6);
    CHECK(std::abs(ks_threshold(0.05, 23) - 0.4004822882754555) < 1e-12);
    CHECK_FALSE(ks_reject(0.40, 0.05, 23));
    CHECK(ks_reject(0.41, 0.05, 23));
    CHECK_FALSE(ks_reject(0.0, 0.05, 23));
    CHECK_FALSE(ks_reject(0.0, 0.5, 23));
    // smaller alpha -> strictly larger threshold
    CHECK(ks_threshold(0.01, 23) > ks_threshold(0.05, 23));
    CHECK(ks_threshold(0.001, 23) > ks_threshold(0.01, 23));
}

TEST_CASE("rmse / nrmse / pearson basics") {
    Eigen::VectorXd a(3), b(3);
    a << 1, 2, 3;
    b << 1, 2, 4;
    CHECK(rmse(a, a) == 0.0);
    CHECK(rmse(a, b) == doctest::Approx(0.5773502691896257).epsilon(1e-15));
    CHECK(nrmse(a, a) == 0.0);
    CHECK(pearson(a, a) == doctest::Approx(1.0).epsilon(1e-15));

    Eigen::VectorXd c = Eigen::VectorXd::Constant(3, 2.0);
    CHECK_THROWS_AS(pearson(a, c), NumericError);
    CHECK_THROWS_AS(pearson(c, a), NumericError);

    // permutation invariance of rmse under joint reordering
    Eigen::VectorXd ap(3), bp(3);
    ap << 3, 1, 2;
    bp << 4, 1, 2;
    CHECK(rmse(ap, bp) == doctest::Approx(rmse(a, b)).epsilon(1e-15));

    // pearson invariant under positive affine maps
    Eigen::VectorXd scaled = 3.0 * a.array() + 5.0;
    CHECK(pearson(scaled, b) == doctest::Approx(pearson(a, b)).epsilon(1e-12));

    // zero-mean reference: zero error reports 0, nonzero error refuses
    Eigen::VectorXd z = Eigen::VectorXd::Zero(3);
    CHECK(nrmse(z, z) == 0.0);
    CHECK_THROWS_AS(nrmse(a, z), NumericError);
}

TEST_CASE("synthetic rates: normalized total, intense storms rarer") {
    Catalog cat;
    for (int i = 1; i <= 4; ++i) {
        StormRecord s;
        s.storm_id = i;
        s.heading = 0;
        s.v_f = 10;
        s.r_max = 20;
        s.landfall_lon = -90;
        s.c_p = 860.0 + i * 30.0;  // storm 1 most intense
        cat.storms.push_back(s);
    }
    StormRates r = synthetic_rates(cat, {1, 2, 3, 4}, 0.35);
    CHECK(r.total() == doctest::Approx(0.35).epsilon(1e-12));
    CHECK(r.rate[1] < r.rate[2]);
    CHECK(r.rate[2] < r.rate[3]);
    CHECK(r.rate[3] < r.rate[4]);
}

TEST_CASE("hazard csv round-trips curves exactly") {
    AepGrid grid = AepGrid::standard();
    std::vector<HazardCurve> curves;
    for (int p = 1; p <= 3; ++p) {
        HazardCurve c;
        c.point_id = p;
        c.aep = grid.aep;
        for (size_t i = 0; i < grid.aep.size(); ++i) c.hs.push_back(uniform(0, 3));
        curves.push_back(c);
    }
    const std::string text = format_hazard_csv(curves);
    const auto back = parse_hazard_csv(text, grid);
    REQUIRE(back.size() == curves.size());
    for (size_t i = 0; i < curves.size(); ++i) {
        CHECK(back[i].point_id == curves[i].point_id);
        CHECK(back[i].hs == curves[i].hs);  // bit-exact via shortest round-trip
        CHECK(back[i].aep == curves[i].aep);
    }
}
