#ifndef NNWAVE_HAZARD_HPP
#define NNWAVE_HAZARD_HPP

#include <Eigen/Dense>
#include <map>
#include <vector>

#include "nnwave/catalog.hpp"

namespace nnwave {

// Annualized recurrence rates per storm (events/year), all positive.
struct StormRates {
    std::map<int, double> rate;  // storm_id -> lambda

    double total() const;
    void validate() const;
};

// The paper's published rates live inside the closed risk model; the desk
// study uses a documented synthetic stand-in: lambda_i proportional to
// 1/(1 + dp_i/50), normalized to total_rate, so intense storms are rarer.
StormRates synthetic_rates(const Catalog& catalog, const std::set<int>& storm_ids,
                           double total_rate = 0.35);

// Strictly decreasing annual exceedance probabilities in (0, 1).
struct AepGrid {
    std::vector<double> aep;

    static AepGrid standard();  // 23 log-spaced values, 0.5 down to 0.0005
    void validate() const;
    bool operator==(const AepGrid&) const = default;
};

// Wave height as a function of AEP at one grid point, aligned to an AepGrid.
struct HazardCurve {
    int point_id = 0;
    std::vector<double> aep;
    std::vector<double> hs;
};

// Rate-weighted exceedance inversion. With lambda(h) = sum of rates of
// storms whose peak meets h and AEP(h) = 1 - exp(-lambda(h)), each grid
// value aep maps to sup{h >= 0 : AEP(h) >= aep}, computed exactly by
// sorting peaks descending and scanning cumulative rates; 0 when even
// AEP(0+) falls short. peaks maps storm_id -> peak hs at this point.
HazardCurve exceedance_curve(const std::map<int, double>& peaks, const StormRates& rates,
                             const AepGrid& grid, int point_id = 0);

// Two-sample Kolmogorov-Smirnov statistic over the two curves' hs values:
// the maximum absolute difference of their empirical CDFs (right-continuous,
// ties pooled). Both curves must sit on the same AEP grid.
double ks_statistic(const HazardCurve& a, const HazardCurve& b);

// Decision rule: reject iff D > sqrt(-ln(alpha/2) / n).
double ks_threshold(double alpha, int n);
bool ks_reject(double d, double alpha = 0.05, int n = 23);

// Plain error metrics over aligned vectors.
double rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& ref);
// rmse normalized by the mean of the reference values. An all-zero
// reference group with zero rmse is reported as 0 (identical curves);
// a nonzero error over a zero reference throws.
double nrmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& ref);
// Sample Pearson correlation; zero variance in either argument throws
// NumericError rather than returning a silent 0.
double pearson(const Eigen::VectorXd& pred, const Eigen::VectorXd& ref);

}  // namespace nnwave

#endif
