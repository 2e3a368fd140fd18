#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <vector>

#include "doctest.h"
#include "sehs/errors.hpp"
#include "sehs/opt.hpp"

using namespace sehs;
using namespace sehs::opt;

namespace {

constexpr double kPi = 3.14159265358979323846;

Eigen::VectorXd v2(double a, double b) {
    Eigen::VectorXd v(2);
    v << a, b;
    return v;
}

Eigen::VectorXd v1(double a) {
    Eigen::VectorXd v(1);
    v << a;
    return v;
}

std::set<int> brute_force_front(const std::vector<Eigen::VectorXd>& pts) {
    std::set<int> out;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        bool dominated = false;
        for (std::size_t j = 0; j < pts.size() && !dominated; ++j) {
            const bool ge = (pts[j].array() >= pts[i].array()).all();
            const bool gt = (pts[j].array() > pts[i].array()).any();
            dominated = ge && gt;
        }
        if (!dominated) out.insert(static_cast<int>(i));
    }
    return out;
}

}  // namespace

TEST_CASE("non-dominated sorting") {
    SUBCASE("three-point example") {
        const std::vector<Eigen::VectorXd> p{v2(2, 2), v2(1, 1), v2(0, 3)};
        const auto fronts = fast_nondominated_sort(p);
        REQUIRE(fronts.size() == 2);
        CHECK(std::set<int>(fronts[0].begin(), fronts[0].end()) == std::set<int>{0, 2});
        CHECK(fronts[1] == std::vector<int>{1});
    }
    SUBCASE("identical points share one front") {
        const std::vector<Eigen::VectorXd> p(6, v2(1.5, -2.0));
        const auto fronts = fast_nondominated_sort(p);
        REQUIRE(fronts.size() == 1);
        CHECK(fronts[0].size() == 6);
        CHECK_FALSE(dominates(p[0], p[1]));
    }
    SUBCASE("front 1 equals the brute-force oracle on 50 random sets") {
        std::mt19937_64 rng(12);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int set = 0; set < 50; ++set) {
            std::vector<Eigen::VectorXd> p;
            const int n = 5 + set;
            for (int i = 0; i < n; ++i) {
                // Coarse values so ties and duplicates occur.
                p.push_back(v2(std::round(u(rng) * 20) / 20, std::round(u(rng) * 20) / 20));
            }
            const auto fronts = fast_nondominated_sort(p);
            CHECK(std::set<int>(fronts[0].begin(), fronts[0].end()) == brute_force_front(p));
            std::size_t covered = 0;
            for (const auto& f : fronts) covered += f.size();
            CHECK(covered == p.size());
            // No member of front k+1 dominates a member of front k.
            for (std::size_t k = 0; k + 1 < fronts.size(); ++k) {
                for (int a : fronts[k]) {
                    for (int b : fronts[k + 1]) CHECK_FALSE(dominates(p[b], p[a]));
                }
            }
        }
    }
    SUBCASE("crowding distance") {
        const std::vector<Eigen::VectorXd> p{v2(0, 4), v2(1, 3), v2(3, 1), v2(4, 0)};
        const auto d = crowding_distance(p, {0, 1, 2, 3});
        const double inf = std::numeric_limits<double>::infinity();
        CHECK(d[0] == inf);
        CHECK(d[3] == inf);
        // Normalized neighbour gaps: (3 - 0) / 4 in each objective.
        CHECK(d[1] == doctest::Approx(1.5));
        CHECK(d[2] == doctest::Approx(1.5));
    }
    SUBCASE("hypervolume of a staircase") {
        const std::vector<Eigen::VectorXd> p{v2(1, 3), v2(2, 2), v2(3, 1), v2(1.5, 1.5)};
        CHECK(hypervolume_2d(p, Eigen::Vector2d(0, 0)) == doctest::Approx(3 + 2 + 1));
        CHECK(hypervolume_2d({}, Eigen::Vector2d(0, 0)) == 0.0);
    }
}

TEST_CASE("NSGA-II") {
    const Eigen::VectorXd lo = v1(0.0), hi = v1(1.0);

    SUBCASE("objectives (x, 1 - x) recover the analytic front") {
        Nsga2Options o;
        o.population = 40;
        o.generations = 50;
        o.seed = 3;
        const auto ps = nsga2([](const Eigen::VectorXd& x) { return v2(x(0), 1.0 - x(0)); }, lo, hi, o);
        std::vector<Eigen::VectorXd> f;
        for (const auto& p : ps.points) {
            f.push_back(p.f);
            CHECK(p.f.sum() == doctest::Approx(1.0).epsilon(1e-12));
        }
        // Analytic front f1 + f2 = 1 above the origin encloses area 1/2.
        CHECK(hypervolume_2d(f, Eigen::Vector2d(0, 0)) >= 0.99 * 0.5);
        for (std::size_t g = 1; g < ps.hypervolume_history.size(); ++g) {
            CHECK(ps.hypervolume_history[g] >= ps.hypervolume_history[g - 1] - 1e-15);
        }
        CHECK(ps.hypervolume_history.size() == 51);
    }
    SUBCASE("perfectly correlated objectives give the max-x point") {
        Nsga2Options o;
        o.population = 20;
        o.generations = 30;
        const auto ps = nsga2([](const Eigen::VectorXd& x) { return v2(x(0), x(0)); }, lo, hi, o);
        REQUIRE(ps.points.size() == 1);
        CHECK(ps.points[0].x(0) > 0.99);
    }
    SUBCASE("shared maximizer collapses the front") {
        Nsga2Options o;
        o.population = 20;
        o.generations = 40;
        auto f = [](const Eigen::VectorXd& x) {
            const double d = x(0) - 0.34;
            return v2(1.0 - d * d, 0.9 - 3.0 * d * d);
        };
        const auto ps = nsga2(f, v1(0.15), v1(0.5), o);
        REQUIRE(!ps.points.empty());
        for (const auto& p : ps.points) CHECK(std::abs(p.x(0) - 0.34) < 0.01);
    }
    SUBCASE("returned points are not dominated by any evaluated design") {
        Nsga2Options o;
        o.population = 24;
        o.generations = 20;
        o.seed = 9;
        std::vector<Eigen::VectorXd> seen;
        auto f = [&](const Eigen::VectorXd& x) {
            const Eigen::VectorXd y = v2(std::sin(3.0 * x(0)) + x(1), std::cos(2.0 * x(0)) - x(1) * x(1));
            seen.push_back(y);
            return y;
        };
        const auto ps = nsga2(f, v2(0, 0), v2(1, 1), o);
        CHECK(ps.evaluations == seen.size());
        for (const auto& p : ps.points) {
            for (const auto& s : seen) CHECK_FALSE(dominates(s, p.f));
        }
    }
    SUBCASE("affine rescaling of one objective keeps the design set") {
        Nsga2Options o;
        o.population = 16;
        o.generations = 15;
        o.seed = 4;
        auto base = [](const Eigen::VectorXd& x) { return v2(std::sin(kPi * x(0)), x(0) * x(0)); };
        auto scaled = [&](const Eigen::VectorXd& x) {
            Eigen::VectorXd y = base(x);
            y(1) = 250.0 * y(1) + 3.0;
            return y;
        };
        const auto a = nsga2(base, lo, hi, o);
        const auto b = nsga2(scaled, lo, hi, o);
        REQUIRE(a.points.size() == b.points.size());
        for (std::size_t i = 0; i < a.points.size(); ++i) CHECK(a.points[i].x(0) == b.points[i].x(0));
    }
    SUBCASE("deterministic under the seed") {
        Nsga2Options o;
        o.population = 12;
        o.generations = 10;
        o.seed = 5;
        auto f = [](const Eigen::VectorXd& x) { return v2(x(0), 1.0 - std::sqrt(x(0))); };
        const auto a = nsga2(f, lo, hi, o);
        const auto b = nsga2(f, lo, hi, o);
        REQUIRE(a.points.size() == b.points.size());
        for (std::size_t i = 0; i < a.points.size(); ++i) CHECK(a.points[i].x(0) == b.points[i].x(0));
    }
    SUBCASE("invalid settings") {
        Nsga2Options o;
        o.population = 7;
        auto f = [](const Eigen::VectorXd& x) { return v2(x(0), -x(0)); };
        CHECK_THROWS(nsga2(f, lo, hi, o));
        o.population = 8;
        CHECK_THROWS(nsga2(f, hi, lo, o));
    }
}

TEST_CASE("kriging") {
    SUBCASE("sin(2 pi x) from 12 points") {
        Eigen::MatrixXd X(12, 1);
        Eigen::VectorXd y(12);
        for (int i = 0; i < 12; ++i) {
            X(i, 0) = i / 11.0;
            y(i) = std::sin(2.0 * kPi * X(i, 0));
        }
        const auto m = KrigingModel::fit(X, y);
        for (int i = 0; i < 12; ++i) {
            const auto p = m.predict(X.row(i).transpose());
            CHECK(std::abs(p.mean - y(i)) < 1e-6);
            CHECK(p.variance >= 0.0);
        }
        double worst = 0.0;
        for (int k = 0; k < 100; ++k) {
            const double x = (k + 0.5) / 100.0;
            worst = std::max(worst, std::abs(m.mean(v1(x)) - std::sin(2.0 * kPi * x)));
        }
        CHECK(worst < 0.05);
    }
    SUBCASE("support variance is bounded by the nugget") {
        Eigen::MatrixXd X(8, 2);
        Eigen::VectorXd y(8);
        std::mt19937_64 rng(6);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int i = 0; i < 8; ++i) {
            X(i, 0) = u(rng);
            X(i, 1) = u(rng);
            y(i) = X(i, 0) * X(i, 0) + std::sin(3.0 * X(i, 1));
        }
        const auto m = KrigingModel::fit(X, y);
        for (int i = 0; i < 8; ++i) {
            const auto p = m.predict(X.row(i).transpose());
            CHECK(p.variance <= 10.0 * m.nugget());
            CHECK(std::abs(p.mean - y(i)) < 1e-6);
        }
    }
    SUBCASE("constant observations") {
        Eigen::MatrixXd X(5, 1);
        X << 0.1, 0.3, 0.5, 0.7, 0.9;
        const Eigen::VectorXd y = Eigen::VectorXd::Constant(5, 2.5);
        const auto m = KrigingModel::fit(X, y);
        for (double x : {0.0, 0.2, 0.45, 1.0}) CHECK(m.mean(v1(x)) == doctest::Approx(2.5).epsilon(1e-12));
        CHECK(m.predict(v1(0.3)).variance < 1e-12);
    }
    SUBCASE("mirrored data gives mirrored predictions") {
        Eigen::MatrixXd X(7, 1), Xm(7, 1);
        Eigen::VectorXd y(7);
        for (int i = 0; i < 7; ++i) {
            X(i, 0) = 0.1 * i + 0.05 * (i % 2);
            Xm(i, 0) = 1.0 - X(i, 0);
            y(i) = std::exp(-3.0 * X(i, 0)) + 0.3 * X(i, 0);
        }
        const auto a = KrigingModel::fit(X, y);
        const auto b = KrigingModel::fit(Xm, y);
        for (double x : {0.02, 0.17, 0.4, 0.66, 0.81}) CHECK(std::abs(a.mean(v1(x)) - b.mean(v1(1.0 - x))) < 1e-8);
    }
    SUBCASE("error decreases as supports densify") {
        auto f = [](double x) { return std::sin(5.0 * x) + 0.5 * x * x; };
        double prev = std::numeric_limits<double>::infinity();
        for (int n : {5, 9, 17}) {
            Eigen::MatrixXd X(n, 1);
            Eigen::VectorXd y(n);
            for (int i = 0; i < n; ++i) {
                X(i, 0) = i / double(n - 1);
                y(i) = f(X(i, 0));
            }
            const auto m = KrigingModel::fit(X, y);
            double worst = 0.0;
            for (int k = 0; k < 200; ++k) {
                const double x = (k + 0.5) / 200.0;
                worst = std::max(worst, std::abs(m.mean(v1(x)) - f(x)));
            }
            CHECK(worst < prev);
            prev = worst;
        }
    }
    SUBCASE("extrapolation is flagged") {
        Eigen::MatrixXd X(4, 1);
        X << 0.0, 0.3, 0.6, 1.0;
        Eigen::VectorXd y(4);
        y << 0.0, 1.0, 0.5, 0.2;
        const auto m = KrigingModel::fit(X, y);
        CHECK_FALSE(m.predict(v1(1.05)).extrapolated);
        CHECK(m.predict(v1(1.2)).extrapolated);
    }
    SUBCASE("leave-one-out on a smooth curve") {
        Eigen::MatrixXd X(20, 1);
        Eigen::VectorXd y(20);
        for (int i = 0; i < 20; ++i) {
            X(i, 0) = 0.15 + 0.35 * i / 19.0;
            y(i) = std::exp(-std::pow((X(i, 0) - 0.34) / 0.05, 2));
        }
        CHECK(leave_one_out_rmse(X, y) < 0.1 * (y.maxCoeff() - y.minCoeff()));
    }
    SUBCASE("invalid inputs") {
        Eigen::MatrixXd X(2, 1);
        X << 0.0, 1.0;
        Eigen::VectorXd y(3);
        CHECK_THROWS(KrigingModel::fit(X, y));
    }
}
