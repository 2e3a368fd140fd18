#pragma once

#include <vector>

namespace sehs::peh {

/// Values and parametric derivatives of every basis function at one point.
/// Entries outside the active span are zero; `span` is the knot span index.
struct BasisEvaluation {
    int span = 0;
    std::vector<double> values;
    std::vector<double> first;
    std::vector<double> second;
};

/// Open (clamped) knot vector on [0, 1] with its polynomial degree.
class KnotVector {
public:
    KnotVector(std::vector<double> knots, int degree);

    /// Uniform open knot vector with n_basis functions.
    static KnotVector uniform(int n_basis, int degree);

    /// Open knot vector with n_basis functions and a knot of multiplicity
    /// degree - 1 at `breakpoint`, spans spread as evenly as possible on both sides.
    static KnotVector with_breakpoint(int n_basis, int degree, double breakpoint);

    int degree() const { return degree_; }
    int n_basis() const { return static_cast<int>(knots_.size()) - degree_ - 1; }
    const std::vector<double>& knots() const { return knots_; }

    /// Distinct knot values (element boundaries).
    std::vector<double> breaks() const;

    int find_span(double xi) const;

private:
    std::vector<double> knots_;
    int degree_;
};

/// Cox-de Boor evaluation with first and second derivatives.
/// Requires degree >= 2 (C1 continuity for Kirchhoff-Love plates).
BasisEvaluation bspline_basis(const KnotVector& knots, double xi);

/// Only the degree + 1 non-zero functions, starting at index span - degree.
/// ders[k][j] is the k-th derivative of function span - degree + j.
void bspline_nonzero(const KnotVector& knots, int span, double xi, double ders[3][8]);

}  // namespace sehs::peh
