#include "nnwave/hazard.hpp"

#include <algorithm>
#include <cmath>

namespace nnwave {

double StormRates::total() const {
    double sum = 0;
    for (const auto& [id, r] : rate) sum += r;
    return sum;
}

void StormRates::validate() const {
    if (rate.empty()) throw ValidationError("storm rates are empty");
    for (const auto& [id, r] : rate)
        if (!(r > 0) || !std::isfinite(r))
            throw ValidationError("rate for storm " + std::to_string(id) +
                                  " must be positive and finite");
}

StormRates synthetic_rates(const Catalog& catalog, const std::set<int>& storm_ids,
                           double total_rate) {
    if (!(total_rate > 0)) throw ValidationError("total_rate must be positive");
    StormRates rates;
    double sum = 0;
    for (int id : storm_ids) {
        const StormRecord& s = catalog.by_id(id);
        const double dp = 1013.25 - s.c_p;
        const double w = 1.0 / (1.0 + dp / 50.0);
        rates.rate[id] = w;
        sum += w;
    }
    if (rates.rate.empty()) throw ValidationError("no storms given for rate synthesis");
    for (auto& [id, r] : rates.rate) r *= total_rate / sum;
    return rates;
}

AepGrid AepGrid::standard() {
    AepGrid g;
    const int n = 23;
    const double hi = 0.5, lo = 0.0005;
    g.aep.resize(n);
    for (int i = 0; i < n; ++i)
        g.aep[i] = hi * std::pow(lo / hi, static_cast<double>(i) / (n - 1));
    g.aep.front() = hi;  // exact endpoints
    g.aep.back() = lo;
    g.validate();
    return g;
}

void AepGrid::validate() const {
    if (aep.empty()) throw ValidationError("AEP grid is empty");
    for (size_t i = 0; i < aep.size(); ++i) {
        if (!(aep[i] > 0 && aep[i] < 1))
            throw ValidationError("AEP values must lie in (0, 1)");
        if (i > 0 && !(aep[i] < aep[i - 1]))
            throw ValidationError("AEP grid must be strictly decreasing");
    }
}

HazardCurve exceedance_curve(const std::map<int, double>& peaks, const StormRates& rates,
                             const AepGrid& grid, int point_id) {
    grid.validate();
    rates.validate();
    // peaks and rates must be keyed by the same storms
    std::vector<std::pair<double, double>> sorted;  // (peak, rate), peak descending
    sorted.reserve(peaks.size());
    for (const auto& [id, peak] : peaks) {
        auto it = rates.rate.find(id);
        if (it == rates.rate.end())
            throw ValidationError("storm " + std::to_string(id) + " has no recurrence rate");
        sorted.emplace_back(peak, it->second);
    }
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });

    // cumulative rate of the k largest peaks
    std::vector<double> cum(sorted.size());
    double run = 0;
    for (size_t k = 0; k < sorted.size(); ++k) {
        run += sorted[k].second;
        cum[k] = run;
    }

    HazardCurve curve;
    curve.point_id = point_id;
    curve.aep = grid.aep;
    curve.hs.resize(grid.aep.size(), 0.0);
    for (size_t gi = 0; gi < grid.aep.size(); ++gi) {
        const double lambda_req = -std::log1p(-grid.aep[gi]);  // -ln(1 - aep)
        // smallest k with cum[k] >= lambda_req; its peak is the supremum
        double value = 0.0;
        for (size_t k = 0; k < sorted.size(); ++k) {
            if (cum[k] >= lambda_req) {
                value = std::max(sorted[k].first, 0.0);
                break;
            }
        }
        curve.hs[gi] = value;
    }
    return curve;
}

namespace {

double ecdf(const std::vector<double>& sorted_vals, double x) {
    // right-continuous: proportion of values <= x
    auto it = std::upper_bound(sorted_vals.begin(), sorted_vals.end(), x);
    return static_cast<double>(it - sorted_vals.begin()) / sorted_vals.size();
}

}  // namespace

double ks_statistic(const HazardCurve& a, const HazardCurve& b) {
    if (a.aep != b.aep) throw ValidationError("hazard curves sit on different AEP grids");
    if (a.hs.empty() || a.hs.size() != b.hs.size())
        throw ValidationError("hazard curves have mismatched sample sizes");
    std::vector<double> sa = a.hs, sb = b.hs;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    double d = 0;
    for (const auto& pool : {sa, sb})
        for (double x : pool) d = std::max(d, std::abs(ecdf(sa, x) - ecdf(sb, x)));
    return d;
}

double ks_threshold(double alpha, int n) {
    if (!(alpha > 0 && alpha < 1)) throw ValidationError("alpha must lie in (0, 1)");
    if (n <= 0) throw ValidationError("sample count must be positive");
    return std::sqrt(-std::log(alpha / 2.0) / n);
}

bool ks_reject(double d, double alpha, int n) { return d > ks_threshold(alpha, n); }

double rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& ref) {
    if (pred.size() != ref.size() || pred.size() == 0)
        throw ValidationError("rmse requires equal nonzero lengths");
    return std::sqrt((pred - ref).squaredNorm() / pred.size());
}

double nrmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& ref) {
    const double e = rmse(pred, ref);
    const double scale = ref.mean();
    if (scale == 0.0) {
        if (e == 0.0) return 0.0;  // identical all-zero groups carry zero error
        throw NumericError("nrmse undefined: zero-mean reference with nonzero error");
    }
    return e / scale;
}

double pearson(const Eigen::VectorXd& pred, const Eigen::VectorXd& ref) {
    if (pred.size() != ref.size() || pred.size() < 2)
        throw ValidationError("pearson requires equal lengths of at least 2");
    const double mp = pred.mean(), mr = ref.mean();
    const Eigen::VectorXd cp = pred.array() - mp, cr = ref.array() - mr;
    const double vp = cp.squaredNorm(), vr = cr.squaredNorm();
    if (vp == 0.0 || vr == 0.0)
        throw NumericError("pearson undefined: zero variance in an argument");
    return cp.dot(cr) / std::sqrt(vp * vr);
}

}  // namespace nnwave
