#include "sehs/bspline.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sehs/errors.hpp"

namespace sehs::peh {

KnotVector::KnotVector(std::vector<double> knots, int degree) : knots_(std::move(knots)), degree_(degree) {
    if (degree_ < 2) {
        throw DomainError("B-spline degree must be >= 2 for C1 plate bending, got " + std::to_string(degree_));
    }
    if (degree_ > 7) {
        throw DomainError("B-spline degree above 7 is not supported");
    }
    const auto n = static_cast<int>(knots_.size());
    if (n < 2 * (degree_ + 1)) {
        throw DomainError("knot vector too short for the requested degree");
    }
    if (!std::is_sorted(knots_.begin(), knots_.end())) {
        throw DomainError("knot vector must be non-decreasing");
    }
    for (int i = 0; i <= degree_; ++i) {
        if (knots_[i] != 0.0 || knots_[n - 1 - i] != 1.0) {
            throw DomainError("knot vector must be open (clamped) on [0, 1]");
        }
    }
}

KnotVector KnotVector::uniform(int n_basis, int degree) {
    const int n_internal = n_basis - degree - 1;
    if (n_internal < 0) {
        throw DomainError("uniform knot vector: need at least degree + 1 basis functions");
    }
    std::vector<double> k(degree + 1, 0.0);
    for (int i = 1; i <= n_internal; ++i) {
        k.push_back(static_cast<double>(i) / (n_internal + 1));
    }
    k.insert(k.end(), degree + 1, 1.0);
    return KnotVector(std::move(k), degree);
}

KnotVector KnotVector::with_breakpoint(int n_basis, int degree, double breakpoint) {
    if (!(breakpoint > 0.0 && breakpoint < 1.0)) {
        return uniform(n_basis, degree);
    }
    const int multiplicity = degree - 1;
    const int singles = n_basis - degree - 1 - multiplicity;
    if (singles < 0) {
        throw DomainError("knot vector: too few basis functions to insert a breakpoint");
    }
    const int total_spans = singles + 2;
    const int root_spans = std::clamp(static_cast<int>(std::lround(total_spans * breakpoint)), 1, total_spans - 1);
    const int tail_spans = total_spans - root_spans;

    std::vector<double> k(degree + 1, 0.0);
    for (int i = 1; i < root_spans; ++i) {
        k.push_back(breakpoint * i / root_spans);
    }
    k.insert(k.end(), multiplicity, breakpoint);
    for (int i = 1; i < tail_spans; ++i) {
        k.push_back(breakpoint + (1.0 - breakpoint) * i / tail_spans);
    }
    k.insert(k.end(), degree + 1, 1.0);
    return KnotVector(std::move(k), degree);
}

std::vector<double> KnotVector::breaks() const {
    std::vector<double> b;
    for (double v : knots_) {
        if (b.empty() || v > b.back()) b.push_back(v);
    }
    return b;
}

int KnotVector::find_span(double xi) const {
    const int n = n_basis();
    if (xi >= knots_[n]) {
        return n - 1;
    }
    if (xi <= knots_[degree_]) {
        return degree_;
    }
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), xi);
    return static_cast<int>(it - knots_.begin()) - 1;
}

void bspline_nonzero(const KnotVector& kv, int span, double xi, double ders[3][8]) {
    // Piegl & Tiller A2.3, truncated at the second derivative.
    const int p = kv.degree();
    const auto& U = kv.knots();
    double ndu[8][8];
    double left[8];
    double right[8];
    ndu[0][0] = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = xi - U[span + 1 - j];
        right[j] = U[span + j] - xi;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            ndu[j][r] = right[r + 1] + left[j - r];
            const double temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }
    for (int j = 0; j <= p; ++j) {
        ders[0][j] = ndu[j][p];
    }
    const int nd = std::min(2, p);
    double a[2][8];
    for (int r = 0; r <= p; ++r) {
        int s1 = 0;
        int s2 = 1;
        a[0][0] = 1.0;
        for (int k = 1; k <= nd; ++k) {
            double d = 0.0;
            const int rk = r - k;
            const int pk = p - k;
            if (r >= k) {
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
                d = a[s2][0] * ndu[rk][pk];
            }
            const int j1 = rk >= -1 ? 1 : -rk;
            const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
            for (int j = j1; j <= j2; ++j) {
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][rk + j];
                d += a[s2][j] * ndu[rk + j][pk];
            }
            if (r <= pk) {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d += a[s2][k] * ndu[r][pk];
            }
            ders[k][r] = d;
            std::swap(s1, s2);
        }
    }
    int factor = p;
    for (int k = 1; k <= nd; ++k) {
        for (int j = 0; j <= p; ++j) {
            ders[k][j] *= factor;
        }
        factor *= (p - k);
    }
}

BasisEvaluation bspline_basis(const KnotVector& knots, double xi) {
    if (!(xi >= 0.0 && xi <= 1.0)) {
        throw DomainError("bspline_basis: parameter must lie in [0, 1]");
    }
    const int n = knots.n_basis();
    const int p = knots.degree();
    BasisEvaluation out;
    out.span = knots.find_span(xi);
    out.values.assign(n, 0.0);
    out.first.assign(n, 0.0);
    out.second.assign(n, 0.0);
    double ders[3][8];
    bspline_nonzero(knots, out.span, xi, ders);
    for (int j = 0; j <= p; ++j) {
        const int idx = out.span - p + j;
        out.values[idx] = ders[0][j];
        out.first[idx] = ders[1][j];
        out.second[idx] = ders[2][j];
    }
    return out;
}

}  // namespace sehs::peh
