#pragma once

// Kriging surrogate and NSGA-II bi-objective search (both objectives maximized).

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sehs::opt {

struct KrigingOptions {
    double nugget = 1e-8;          // relative to the unit process variance
    double max_nugget = 1e-2;      // escalation ceiling
    int n_starts = 20;             // multi-start pattern search
    double log10_theta_lo = -3.0;  // theta_k in exp(-sum theta_k dx_k^2), inputs scaled to [0, 1]
    double log10_theta_hi = 4.0;
    std::uint64_t seed = 0;
};

struct KrigingPrediction {
    double mean = 0.0;
    double variance = 0.0;
    bool extrapolated = false;  // outside the fitted box by more than 10% of its width
};

class KrigingModel {
public:
    /// Ordinary kriging, constant trend, anisotropic squared-exponential kernel,
    /// hyperparameters by concentrated maximum likelihood. Rows of X are points.
    static KrigingModel fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const KrigingOptions& options = {});

    KrigingPrediction predict(const Eigen::VectorXd& x) const;
    double mean(const Eigen::VectorXd& x) const { return predict(x).mean; }

    const Eigen::VectorXd& theta() const { return theta_; }
    double nugget() const { return nugget_; }
    bool nugget_escalated() const { return nugget_escalated_; }
    const std::string& warning() const { return warning_; }
    double log_likelihood() const { return log_likelihood_; }
    int dims() const { return static_cast<int>(lo_.size()); }
    int n_points() const { return static_cast<int>(Xn_.rows()); }

private:
    Eigen::VectorXd normalize(const Eigen::VectorXd& x) const;
    double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;

    Eigen::VectorXd lo_, hi_;
    Eigen::MatrixXd Xn_;
    Eigen::VectorXd theta_;
    double y_mean_ = 0.0, y_scale_ = 1.0;
    bool constant_ = false;
    double mu_ = 0.0, sigma2_ = 0.0;
    double nugget_ = 0.0;
    bool nugget_escalated_ = false;
    std::string warning_;
    double log_likelihood_ = 0.0;
    Eigen::LLT<Eigen::MatrixXd> chol_;
    Eigen::VectorXd alpha_;   // R^{-1} (y - mu 1), standardized units
    Eigen::VectorXd rinv_one_;
    double one_rinv_one_ = 0.0;
};

/// Leave-one-out RMSE with hyperparameters refitted for every fold.
double leave_one_out_rmse(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const KrigingOptions& options = {});

// ---------------------------------------------------------------------------
// Non-dominated sorting (maximization of every objective)

bool dominates(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Fronts as index lists; front 0 is the non-dominated set.
std::vector<std::vector<int>> fast_nondominated_sort(const std::vector<Eigen::VectorXd>& points);

/// Crowding distance of each member of `front` (same order); boundary points get +inf.
std::vector<double> crowding_distance(const std::vector<Eigen::VectorXd>& points, const std::vector<int>& front);

/// Area dominated by a 2-D point set above the reference point (maximization).
double hypervolume_2d(const std::vector<Eigen::VectorXd>& points, const Eigen::Vector2d& reference);

struct Nsga2Options {
    int population = 100;
    int generations = 100;
    double eta_crossover = 15.0;
    double eta_mutation = 20.0;
    double crossover_prob = 0.9;
    double mutation_prob = -1.0;   // < 0: 1 / dimensions
    double dedup_tol = 1e-9;       // relative to the box width when filtering the archive
    std::uint64_t seed = 0;
};

struct ParetoPoint {
    Eigen::VectorXd x;
    Eigen::VectorXd f;
    int generation = 0;
};

struct ParetoSet {
    std::vector<ParetoPoint> points;          // sorted by first objective, descending
    std::vector<double> hypervolume_history;  // archive front-1 HV per generation (2 objectives)
    Eigen::Vector2d hv_reference = Eigen::Vector2d::Zero();
    std::size_t evaluations = 0;
    Nsga2Options options;
};

using Objective = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Elitist (mu + lambda) NSGA-II with SBX and polynomial mutation. The result is
/// front 1 of every design evaluated during the run, deduplicated.
ParetoSet nsga2(const Objective& objective, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                const Nsga2Options& options = {});

}  // namespace sehs::opt
