#include "sehs/opt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "sehs/errors.hpp"

namespace sehs::opt {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

struct LikelihoodEval {
    double nll = kInf;
    Eigen::LLT<MatrixXd> chol;
};

MatrixXd correlation_matrix(const MatrixXd& Xn, const VectorXd& theta, double nugget) {
    const auto n = Xn.rows();
    MatrixXd R(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        R(i, i) = 1.0 + nugget;
        for (Eigen::Index j = 0; j < i; ++j) {
            const double d = ((Xn.row(i) - Xn.row(j)).array().square() * theta.transpose().array()).sum();
            R(i, j) = R(j, i) = std::exp(-d);
        }
    }
    return R;
}

// Concentrated negative log-likelihood of standardized data.
double concentrated_nll(const MatrixXd& Xn, const VectorXd& ys, const VectorXd& theta, double nugget) {
    const MatrixXd R = correlation_matrix(Xn, theta, nugget);
    Eigen::LLT<MatrixXd> llt(R);
    if (llt.info() != Eigen::Success) return kInf;
    const VectorXd d = MatrixXd(llt.matrixL()).diagonal();
    const double ratio = d.minCoeff() / d.maxCoeff();
    if (!(ratio * ratio > 1e-15)) return kInf;
    const auto n = static_cast<double>(ys.size());
    const VectorXd one = VectorXd::Ones(ys.size());
    const VectorXd ri1 = llt.solve(one);
    const double mu = ri1.dot(ys) / ri1.dot(one);
    const VectorXd r = ys - mu * one;
    const double s2 = r.dot(llt.solve(r)) / n;
    if (!(s2 > 0.0)) return kInf;
    return 0.5 * n * std::log(s2) + d.array().log().sum();
}

VectorXd pattern_search(const std::function<double(const VectorXd&)>& f, VectorXd x, double lo, double hi,
                        double& fx) {
    fx = f(x);
    double step = 0.25 * (hi - lo);
    int evals = 0;
    while (step > 1e-3 && evals < 2000) {
        bool improved = false;
        for (Eigen::Index k = 0; k < x.size(); ++k) {
            for (double dir : {1.0, -1.0}) {
                VectorXd t = x;
                t(k) = std::clamp(t(k) + dir * step, lo, hi);
                if (t(k) == x(k)) continue;
                const double ft = f(t);
                ++evals;
                if (ft < fx) {
                    x = t;
                    fx = ft;
                    improved = true;
                    break;
                }
            }
        }
        if (!improved) step *= 0.5;
    }
    return x;
}

}  // namespace

VectorXd KrigingModel::normalize(const VectorXd& x) const {
    return ((x - lo_).array() / (hi_ - lo_).array()).matrix();
}

double KrigingModel::correlation(const VectorXd& a, const VectorXd& b) const {
    return std::exp(-((a - b).array().square() * theta_.array()).sum());
}

KrigingModel KrigingModel::fit(const MatrixXd& X, const VectorXd& y, const KrigingOptions& opt) {
    if (X.rows() != y.size() || X.cols() < 1) throw DomainError("kriging_fit: X rows must match y and have >= 1 column");
    if (!(opt.nugget > 0.0) || opt.max_nugget < opt.nugget || opt.n_starts < 1 ||
        !(opt.log10_theta_hi > opt.log10_theta_lo)) {
        throw ConfigError("kriging_fit: invalid options");
    }
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (!std::isfinite(y(i)) || !X.row(i).allFinite()) throw DomainError("kriging_fit: non-finite data");
    }
    KrigingModel m;
    const int d = static_cast<int>(X.cols());
    m.lo_ = X.colwise().minCoeff().transpose();
    m.hi_ = X.colwise().maxCoeff().transpose();
    for (int k = 0; k < d; ++k) {
        if (m.hi_(k) <= m.lo_(k)) m.hi_(k) = m.lo_(k) + 1.0;
    }

    // Drop exact duplicates; conflicting duplicates are an error.
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        bool dup = false;
        for (Eigen::Index j : keep) {
            if ((m.normalize(X.row(i).transpose()) - m.normalize(X.row(j).transpose())).norm() < 1e-12) {
                if (std::abs(y(i) - y(j)) > 1e-12 * (1.0 + std::abs(y(j)))) {
                    throw DomainError("kriging_fit: duplicate points with conflicting values");
                }
                dup = true;
                break;
            }
        }
        if (!dup) keep.push_back(i);
    }
    if (keep.size() < 4) throw DomainError("kriging_fit: need at least 4 distinct points");
    const auto n = static_cast<Eigen::Index>(keep.size());
    m.Xn_.resize(n, d);
    VectorXd yk(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        m.Xn_.row(i) = m.normalize(X.row(keep[i]).transpose()).transpose();
        yk(i) = y(keep[i]);
    }
    m.y_mean_ = yk.mean();
    const double sd = std::sqrt((yk.array() - m.y_mean_).square().mean());
    m.theta_ = VectorXd::Ones(d);
    if (!(sd > 1e-14 * (1.0 + std::abs(m.y_mean_)))) {
        m.constant_ = true;
        m.y_scale_ = 1.0;
        return m;
    }
    m.y_scale_ = sd;
    const VectorXd ys = (yk.array() - m.y_mean_) / sd;

    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> uni(opt.log10_theta_lo, opt.log10_theta_hi);
    double nugget = opt.nugget;
    VectorXd best_t;
    double best = kInf;
    while (true) {
        auto f = [&](const VectorXd& t) {
            return concentrated_nll(m.Xn_, ys, t.unaryExpr([](double v) { return std::pow(10.0, v); }), nugget);
        };
        for (int s = 0; s < opt.n_starts; ++s) {
            VectorXd t0(d);
            for (int k = 0; k < d; ++k) t0(k) = s == 0 ? 0.5 * (opt.log10_theta_lo + opt.log10_theta_hi) : uni(rng);
            double ft = kInf;
            const VectorXd t = pattern_search(f, t0, opt.log10_theta_lo, opt.log10_theta_hi, ft);
            if (ft < best) {
                best = ft;
                best_t = t;
            }
        }
        if (std::isfinite(best)) break;
        if (nugget * 10.0 > opt.max_nugget) {
            throw NumericalError("kriging_fit: correlation matrix ill-conditioned even with nugget " +
                                 std::to_string(nugget));
        }
        nugget *= 10.0;
        m.nugget_escalated_ = true;
    }
    if (m.nugget_escalated_) {
        m.warning_ = "kriging_fit: nugget escalated to " + std::to_string(nugget) + " for conditioning";
    }
    m.nugget_ = nugget;
    m.theta_ = best_t.unaryExpr([](double v) { return std::pow(10.0, v); });
    m.log_likelihood_ = -best;

    m.chol_.compute(correlation_matrix(m.Xn_, m.theta_, nugget));
    const VectorXd one = VectorXd::Ones(n);
    m.rinv_one_ = m.chol_.solve(one);
    m.one_rinv_one_ = one.dot(m.rinv_one_);
    m.mu_ = m.rinv_one_.dot(ys) / m.one_rinv_one_;
    const VectorXd r = ys - m.mu_ * one;
    m.alpha_ = m.chol_.solve(r);
    m.sigma2_ = r.dot(m.alpha_) / static_cast<double>(n);
    return m;
}

KrigingPrediction KrigingModel::predict(const VectorXd& x) const {
    if (x.size() != lo_.size()) throw DomainError("kriging_predict: dimension mismatch");
    KrigingPrediction p;
    const VectorXd xn = normalize(x);
    p.extrapolated = (xn.array() < -0.1).any() || (xn.array() > 1.1).any();
    if (constant_) {
        p.mean = y_mean_;
        p.variance = 0.0;
        return p;
    }
    const auto n = Xn_.rows();
    VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        r(i) = correlation(xn, Xn_.row(i).transpose());
        // At a support the nugget belongs to the self-correlation, so r is a row
        // of R and the predictor interpolates the observation.
        if ((xn - Xn_.row(i).transpose()).squaredNorm() == 0.0) r(i) += nugget_;
    }
    p.mean = y_mean_ + y_scale_ * (mu_ + r.dot(alpha_));
    const VectorXd rir = chol_.solve(r);
    const double u = 1.0 - rinv_one_.dot(r);
    const double v = sigma2_ * (1.0 - r.dot(rir) + u * u / one_rinv_one_);
    p.variance = std::max(0.0, v) * y_scale_ * y_scale_;
    return p;
}

double leave_one_out_rmse(const MatrixXd& X, const VectorXd& y, const KrigingOptions& options) {
    const auto n = X.rows();
    if (n < 5) throw DomainError("leave_one_out_rmse: need at least 5 points");
    double sse = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        MatrixXd Xi(n - 1, X.cols());
        VectorXd yi(n - 1);
        for (Eigen::Index j = 0, r = 0; j < n; ++j) {
            if (j == i) continue;
            Xi.row(r) = X.row(j);
            yi(r++) = y(j);
        }
        const KrigingModel m = KrigingModel::fit(Xi, yi, options);
        const double e = m.mean(X.row(i).transpose()) - y(i);
        sse += e * e;
    }
    return std::sqrt(sse / static_cast<double>(n));
}

// ---------------------------------------------------------------------------

bool dominates(const VectorXd& a, const VectorXd& b) {
    bool strictly = false;
    for (Eigen::Index k = 0; k < a.size(); ++k) {
        if (a(k) < b(k)) return false;
        if (a(k) > b(k)) strictly = true;
    }
    return strictly;
}

std::vector<std::vector<int>> fast_nondominated_sort(const std::vector<VectorXd>& pts) {
    const int n = static_cast<int>(pts.size());
    std::vector<std::vector<int>> fronts;
    if (n == 0) return fronts;
    std::vector<std::vector<int>> dominated(n);
    std::vector<int> count(n, 0);
    fronts.emplace_back();
    for (int p = 0; p < n; ++p) {
        for (int q = 0; q < n; ++q) {
            if (p == q) continue;
            if (dominates(pts[p], pts[q])) {
                dominated[p].push_back(q);
            } else if (dominates(pts[q], pts[p])) {
                ++count[p];
            }
        }
        if (count[p] == 0) fronts[0].push_back(p);
    }
    for (std::size_t i = 0; !fronts[i].empty(); ++i) {
        std::vector<int> next;
        for (int p : fronts[i]) {
            for (int q : dominated[p]) {
                if (--count[q] == 0) next.push_back(q);
            }
        }
        std::sort(next.begin(), next.end());
        fronts.push_back(std::move(next));
    }
    fronts.pop_back();
    return fronts;
}

std::vector<double> crowding_distance(const std::vector<VectorXd>& pts, const std::vector<int>& front) {
    const std::size_t m = front.size();
    std::vector<double> dist(m, 0.0);
    if (m == 0) return dist;
    if (m <= 2) {
        std::fill(dist.begin(), dist.end(), kInf);
        return dist;
    }
    const auto n_obj = pts[front[0]].size();
    std::vector<std::size_t> order(m);
    for (Eigen::Index k = 0; k < n_obj; ++k) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return pts[front[a]](k) < pts[front[b]](k); });
        const double fmin = pts[front[order.front()]](k);
        const double fmax = pts[front[order.back()]](k);
        dist[order.front()] = kInf;
        dist[order.back()] = kInf;
        if (fmax <= fmin) continue;
        for (std::size_t i = 1; i + 1 < m; ++i) {
            dist[order[i]] += (pts[front[order[i + 1]]](k) - pts[front[order[i - 1]]](k)) / (fmax - fmin);
        }
    }
    return dist;
}

double hypervolume_2d(const std::vector<VectorXd>& points, const Eigen::Vector2d& ref) {
    std::vector<Eigen::Vector2d> p;
    for (const auto& q : points) {
        if (q.size() != 2) throw DomainError("hypervolume_2d: points must be 2-D");
        if (q(0) > ref(0) && q(1) > ref(1)) p.emplace_back(q(0), q(1));
    }
    std::sort(p.begin(), p.end(), [](const auto& a, const auto& b) { return a(0) > b(0); });
    double hv = 0.0;
    double best_y = ref(1);
    for (const auto& q : p) {
        if (q(1) > best_y) {
            hv += (q(0) - ref(0)) * (q(1) - best_y);
            best_y = q(1);
        }
    }
    return hv;
}

// ---------------------------------------------------------------------------

namespace {

struct Individual {
    VectorXd x;
    VectorXd f;
    int rank = 0;
    double crowding = 0.0;
};

void assign_rank_and_crowding(std::vector<Individual>& pop) {
    std::vector<VectorXd> f;
    for (const auto& ind : pop) f.push_back(ind.f);
    const auto fronts = fast_nondominated_sort(f);
    for (std::size_t r = 0; r < fronts.size(); ++r) {
        const auto cd = crowding_distance(f, fronts[r]);
        for (std::size_t i = 0; i < fronts[r].size(); ++i) {
            pop[fronts[r][i]].rank = static_cast<int>(r);
            pop[fronts[r][i]].crowding = cd[i];
        }
    }
}

std::string describe(const VectorXd& x) {
    std::ostringstream os;
    os << "[";
    for (Eigen::Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x(i);
    os << "]";
    return os.str();
}

}  // namespace

ParetoSet nsga2(const Objective& objective, const VectorXd& lo, const VectorXd& hi, const Nsga2Options& opt) {
    if (opt.population < 8 || opt.population % 2 != 0) throw ConfigError("nsga2: population must be even and >= 8");
    if (opt.generations < 1) throw ConfigError("nsga2: generations must be >= 1");
    if (lo.size() != hi.size() || lo.size() == 0 || ((hi - lo).array() <= 0.0).any()) {
        throw ConfigError("nsga2: bounds must be non-empty with lo < hi");
    }
    const auto d = lo.size();
    const double pm = opt.mutation_prob < 0.0 ? 1.0 / static_cast<double>(d) : opt.mutation_prob;
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);

    ParetoSet result;
    result.options = opt;
    std::vector<ParetoPoint> archive;

    auto evaluate = [&](const VectorXd& x, int gen) {
        VectorXd f;
        try {
            f = objective(x);
        } catch (const std::exception& e) {
            throw NumericalError("nsga2: objective failed at generation " + std::to_string(gen) + " for design " +
                                 describe(x) + ": " + e.what());
        }
        if (!f.allFinite()) {
            throw NumericalError("nsga2: non-finite objective at generation " + std::to_string(gen) + " for design " +
                                 describe(x));
        }
        archive.push_back({x, f, gen});
        ++result.evaluations;
        return f;
    };

    std::vector<Individual> pop(opt.population);
    for (auto& ind : pop) {
        ind.x.resize(d);
        for (Eigen::Index k = 0; k < d; ++k) ind.x(k) = lo(k) + U(rng) * (hi(k) - lo(k));
        ind.f = evaluate(ind.x, 0);
    }
    assign_rank_and_crowding(pop);

    const bool two = pop.front().f.size() == 2;
    auto archive_front = [&]() {
        std::vector<VectorXd> f;
        for (const auto& a : archive) f.push_back(a.f);
        return std::make_pair(f, fast_nondominated_sort(f).front());
    };
    if (two) {
        Eigen::Vector2d mn(kInf, kInf), mx(-kInf, -kInf);
        for (const auto& ind : pop) {
            mn = mn.cwiseMin(Eigen::Vector2d(ind.f(0), ind.f(1)));
            mx = mx.cwiseMax(Eigen::Vector2d(ind.f(0), ind.f(1)));
        }
        const Eigen::Vector2d span = (mx - mn).cwiseMax(1e-12);
        result.hv_reference = mn - 0.1 * span;
    }
    auto record_hv = [&]() {
        if (!two) return;
        const auto [f, front] = archive_front();
        std::vector<VectorXd> pts;
        for (int i : front) pts.push_back(f[i]);
        result.hypervolume_history.push_back(hypervolume_2d(pts, result.hv_reference));
    };
    record_hv();

    auto tournament = [&]() -> const Individual& {
        const auto& a = pop[static_cast<std::size_t>(U(rng) * pop.size()) % pop.size()];
        const auto& b = pop[static_cast<std::size_t>(U(rng) * pop.size()) % pop.size()];
        if (a.rank != b.rank) return a.rank < b.rank ? a : b;
        if (a.crowding != b.crowding) return a.crowding > b.crowding ? a : b;
        return U(rng) < 0.5 ? a : b;
    };

    const double ec = opt.eta_crossover;
    const double em = opt.eta_mutation;
    for (int gen = 1; gen <= opt.generations; ++gen) {
        std::vector<Individual> kids;
        while (static_cast<int>(kids.size()) < opt.population) {
            VectorXd c1 = tournament().x;
            VectorXd c2 = tournament().x;
            if (U(rng) <= opt.crossover_prob) {
                for (Eigen::Index k = 0; k < d; ++k) {
                    if (U(rng) > 0.5 || std::abs(c1(k) - c2(k)) <= 1e-14) continue;
                    const double y1 = std::min(c1(k), c2(k));
                    const double y2 = std::max(c1(k), c2(k));
                    const double yl = lo(k);
                    const double yu = hi(k);
                    const double u = U(rng);
                    auto betaq = [&](double beta) {
                        const double alpha = 2.0 - std::pow(beta, -(ec + 1.0));
                        return u <= 1.0 / alpha ? std::pow(u * alpha, 1.0 / (ec + 1.0))
                                                : std::pow(1.0 / (2.0 - u * alpha), 1.0 / (ec + 1.0));
                    };
                    double v1 = 0.5 * ((y1 + y2) - betaq(1.0 + 2.0 * (y1 - yl) / (y2 - y1)) * (y2 - y1));
                    double v2 = 0.5 * ((y1 + y2) + betaq(1.0 + 2.0 * (yu - y2) / (y2 - y1)) * (y2 - y1));
                    v1 = std::clamp(v1, yl, yu);
                    v2 = std::clamp(v2, yl, yu);
                    if (U(rng) <= 0.5) std::swap(v1, v2);
                    c1(k) = v1;
                    c2(k) = v2;
                }
            }
            for (VectorXd* c : {&c1, &c2}) {
                for (Eigen::Index k = 0; k < d; ++k) {
                    if (U(rng) > pm) continue;
                    const double y = (*c)(k);
                    const double w = hi(k) - lo(k);
                    const double d1 = (y - lo(k)) / w;
                    const double d2 = (hi(k) - y) / w;
                    const double u = U(rng);
                    const double mp = 1.0 / (em + 1.0);
                    double dq = 0.0;
                    if (u < 0.5) {
                        const double val = 2.0 * u + (1.0 - 2.0 * u) * std::pow(1.0 - d1, em + 1.0);
                        dq = std::pow(val, mp) - 1.0;
                    } else {
                        const double val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * std::pow(1.0 - d2, em + 1.0);
                        dq = 1.0 - std::pow(val, mp);
                    }
                    (*c)(k) = std::clamp(y + dq * w, lo(k), hi(k));
                }
            }
            kids.push_back({c1, {}, 0, 0.0});
            if (static_cast<int>(kids.size()) < opt.population) kids.push_back({c2, {}, 0, 0.0});
        }
        for (auto& k : kids) k.f = evaluate(k.x, gen);

        std::vector<Individual> merged = pop;
        merged.insert(merged.end(), kids.begin(), kids.end());
        std::vector<VectorXd> f;
        for (const auto& ind : merged) f.push_back(ind.f);
        const auto fronts = fast_nondominated_sort(f);
        std::vector<Individual> next;
        for (std::size_t r = 0; r < fronts.size() && static_cast<int>(next.size()) < opt.population; ++r) {
            const auto cd = crowding_distance(f, fronts[r]);
            std::vector<std::size_t> order(fronts[r].size());
            std::iota(order.begin(), order.end(), 0);
            if (next.size() + fronts[r].size() > static_cast<std::size_t>(opt.population)) {
                std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cd[a] > cd[b]; });
            }
            for (std::size_t i : order) {
                if (static_cast<int>(next.size()) >= opt.population) break;
                Individual ind = merged[fronts[r][i]];
                ind.rank = static_cast<int>(r);
                ind.crowding = cd[i];
                next.push_back(std::move(ind));
            }
        }
        pop = std::move(next);
        record_hv();
    }

    const auto [f, front] = archive_front();
    const VectorXd width = hi - lo;
    for (int i : front) {
        const auto& cand = archive[i];
        bool dup = false;
        for (const auto& p : result.points) {
            if (((p.x - cand.x).array().abs() <= opt.dedup_tol * width.array()).all()) {
                dup = true;
                break;
            }
        }
        if (!dup) result.points.push_back(cand);
    }
    std::sort(result.points.begin(), result.points.end(),
              [](const ParetoPoint& a, const ParetoPoint& b) { return a.f(0) > b.f(0); });
    return result;
}

}  // namespace sehs::opt
