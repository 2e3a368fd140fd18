#include "sehs/peh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <boost/numeric/odeint.hpp>

#include "sehs/bridge.hpp"
#include "sehs/errors.hpp"

namespace sehs::peh {

namespace {

constexpr double kTwoPi = 2.0 * 3.14159265358979323846;

KnotVector length_knots(const PehDesign& design, const PehMesh& mesh) {
    const double ell = design.pzt_length_ratio;
    if (ell >= 1.0) {
        return KnotVector::uniform(mesh.n_x, mesh.degree);
    }
    return KnotVector::with_breakpoint(mesh.n_x, mesh.degree, ell);
}

}  // namespace

double PehDesign::capacitance() const {
    return piezo.eps33 * width() * pzt_length() / (2.0 * piezo_thickness());
}

std::string PehDesign::id() const {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "L%.4f_R%.3f_tip%.4f", length, aspect_ratio, tip_mass);
    return buf;
}

void PehDesign::validate() const {
    if (!(length > 0.0) || !(aspect_ratio > 0.0) || !(total_thickness > 0.0)) {
        throw DomainError("PEH design: L, R and h must be positive");
    }
    if (!(thickness_ratio > 0.0 && thickness_ratio < 0.5)) {
        throw DomainError("PEH design: thickness ratio H must lie in (0, 0.5); substrate thickness would be <= 0");
    }
    if (!(pzt_length_ratio > 0.0 && pzt_length_ratio <= 1.0)) {
        throw DomainError("PEH design: length ratio ell must lie in (0, 1]");
    }
    if (!(substrate.youngs_modulus > 0.0) || !(substrate.density > 0.0) || !(piezo.density > 0.0) ||
        !(piezo.c11 > 0.0) || !(piezo.c22 > 0.0) || !(piezo.c66 > 0.0) || !(piezo.eps33 > 0.0)) {
        throw DomainError("PEH design: densities, stiffnesses and permittivity must be positive");
    }
    if (!(substrate.poisson > -1.0 && substrate.poisson < 0.5)) {
        throw DomainError("PEH design: substrate Poisson ratio out of range");
    }
    if (!(load_resistance > 0.0)) {
        throw DomainError("PEH design: load resistance must be positive");
    }
    if (!(tip_mass >= 0.0)) {
        throw DomainError("PEH design: tip mass must be non-negative");
    }
    if (!(damping_alpha >= 0.0) || !(damping_beta >= 0.0)) {
        throw DomainError("PEH design: damping coefficients must be non-negative");
    }
}

void PehMesh::validate() const {
    if (degree < 2 || degree > 7) {
        throw DomainError("PEH mesh: degree must be in [2, 7]");
    }
    if (n_x < 8 || n_y < 8) {
        throw DomainError("PEH mesh: control net must be at least 8 x 8");
    }
    if (gauss < 1 || gauss > 12) {
        throw DomainError("PEH mesh: gauss points per span must be in [1, 12]");
    }
}

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
    // Golub-Welsch on the Jacobi matrix of the Legendre recurrence.
    if (n < 1) {
        throw DomainError("gauss_legendre: need at least one point");
    }
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        const double b = k / std::sqrt(4.0 * k * k - 1.0);
        J(k, k - 1) = b;
        J(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    nodes.resize(n);
    weights.resize(n);
    for (int i = 0; i < n; ++i) {
        nodes[i] = es.eigenvalues()(i);
        const double v0 = es.eigenvectors()(0, i);
        weights[i] = 2.0 * v0 * v0;
    }
}

Eigen::Matrix3d laminate_stiffness(const PehDesign& d, bool with_piezo) {
    const double hs = d.substrate_thickness();
    const double h = d.total_thickness;
    const double nu = d.substrate.poisson;
    const double qs = d.substrate.youngs_modulus / (1.0 - nu * nu);
    Eigen::Matrix3d Qs;
    Qs << qs, nu * qs, 0.0, nu * qs, qs, 0.0, 0.0, 0.0, 0.5 * (1.0 - nu) * qs;
    Eigen::Matrix3d D = Qs * (hs * hs * hs / 12.0);
    if (with_piezo) {
        Eigen::Matrix3d Qp;
        Qp << d.piezo.c11, d.piezo.c12, 0.0, d.piezo.c12, d.piezo.c22, 0.0, 0.0, 0.0, d.piezo.c66;
        D += Qp * ((h * h * h - hs * hs * hs) / 12.0);
    }
    return D;
}

double areal_mass(const PehDesign& d, bool with_piezo) {
    double m = d.substrate.density * d.substrate_thickness();
    if (with_piezo) {
        m += 2.0 * d.piezo.density * d.piezo_thickness();
    }
    return m;
}

double PehSystem::deflection(const Eigen::VectorXd& field, double x, double y) const {
    if (field.size() != n_free()) {
        throw DomainError("PehSystem::deflection: field size does not match free DOFs");
    }
    const double xi = std::clamp(x / design.length, 0.0, 1.0);
    const double eta = std::clamp(y / design.width(), 0.0, 1.0);
    const auto bx = bspline_basis(knots_x, xi);
    const auto by = bspline_basis(knots_y, eta);
    const int ny = knots_y.n_basis();
    double w = 0.0;
    for (int f = 0; f < n_free(); ++f) {
        const int i = free_dofs[f] / ny;
        const int j = free_dofs[f] % ny;
        w += field(f) * bx.values[i] * by.values[j];
    }
    return w;
}

PehSystem assemble_peh(const PehDesign& design, const PehMesh& mesh) {
    design.validate();
    mesh.validate();
    const int p = mesh.degree;
    PehSystem sys{design, mesh, length_knots(design, mesh), KnotVector::uniform(mesh.n_y, p), {}, {}, {}, {}, 0.0, {}};

    const int nx = mesh.n_x;
    const int ny = mesh.n_y;
    const int n = nx * ny;
    const double L = design.length;
    const double W = design.width();
    const double lever = 0.5 * (design.piezo_thickness() + design.substrate_thickness());
    const double ell = design.pzt_length_ratio;

    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd Th = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd F = Eigen::VectorXd::Zero(n);

    std::vector<double> gp, gw;
    gauss_legendre(mesh.gauss, gp, gw);
    const auto bx = sys.knots_x.breaks();
    const auto by = sys.knots_y.breaks();
    const int nloc = (p + 1) * (p + 1);

    Eigen::MatrixXd B(3, nloc);
    Eigen::VectorXd Nv(nloc);
    std::vector<int> idx(nloc);
    double dx[3][8];
    double dy[3][8];

    for (std::size_t ex = 0; ex + 1 < bx.size(); ++ex) {
        const double a = bx[ex];
        const double b = bx[ex + 1];
        const bool root = 0.5 * (a + b) < ell;
        const Eigen::Matrix3d D = laminate_stiffness(design, root);
        const double rho = areal_mass(design, root);
        for (std::size_t ey = 0; ey + 1 < by.size(); ++ey) {
            const double c = by[ey];
            const double d = by[ey + 1];
            Eigen::MatrixXd Ke = Eigen::MatrixXd::Zero(nloc, nloc);
            Eigen::MatrixXd Me = Eigen::MatrixXd::Zero(nloc, nloc);
            Eigen::VectorXd Te = Eigen::VectorXd::Zero(nloc);
            Eigen::VectorXd Fe = Eigen::VectorXd::Zero(nloc);
            int sx = 0;
            int sy = 0;
            for (int gi = 0; gi < mesh.gauss; ++gi) {
                const double xi = 0.5 * (a + b) + 0.5 * (b - a) * gp[gi];
                sx = sys.knots_x.find_span(xi);
                bspline_nonzero(sys.knots_x, sx, xi, dx);
                for (int gj = 0; gj < mesh.gauss; ++gj) {
                    const double eta = 0.5 * (c + d) + 0.5 * (d - c) * gp[gj];
                    sy = sys.knots_y.find_span(eta);
                    bspline_nonzero(sys.knots_y, sy, eta, dy);
                    const double dA = L * W * 0.25 * (b - a) * (d - c) * gw[gi] * gw[gj];
                    for (int u = 0; u <= p; ++u) {
                        for (int v = 0; v <= p; ++v) {
                            const int l = u * (p + 1) + v;
                            Nv(l) = dx[0][u] * dy[0][v];
                            B(0, l) = dx[2][u] * dy[0][v] / (L * L);
                            B(1, l) = dx[0][u] * dy[2][v] / (W * W);
                            B(2, l) = 2.0 * dx[1][u] * dy[1][v] / (L * W);
                        }
                    }
                    Ke.noalias() += B.transpose() * D * B * dA;
                    Me.noalias() += rho * dA * Nv * Nv.transpose();
                    Fe.noalias() -= rho * dA * Nv;
                    if (root) {
                        Te.noalias() += lever * dA *
                                        (design.piezo.e31 * B.row(0).transpose() + design.piezo.e32 * B.row(1).transpose());
                    }
                }
            }
            for (int u = 0; u <= p; ++u) {
                for (int v = 0; v <= p; ++v) {
                    idx[u * (p + 1) + v] = (sx - p + u) * ny + (sy - p + v);
                }
            }
            for (int r = 0; r < nloc; ++r) {
                Th(idx[r]) += Te(r);
                F(idx[r]) += Fe(r);
                for (int s = 0; s < nloc; ++s) {
                    K(idx[r], idx[s]) += Ke(r, s);
                    M(idx[r], idx[s]) += Me(r, s);
                }
            }
        }
    }

    if (design.tip_mass > 0.0) {
        // Line mass along the free edge; only the last control row is non-zero at xi = 1.
        const double lambda = design.tip_mass / W;
        const int row = nx - 1;
        for (std::size_t ey = 0; ey + 1 < by.size(); ++ey) {
            const double c = by[ey];
            const double d = by[ey + 1];
            for (int gj = 0; gj < mesh.gauss; ++gj) {
                const double eta = 0.5 * (c + d) + 0.5 * (d - c) * gp[gj];
                const int sy = sys.knots_y.find_span(eta);
                bspline_nonzero(sys.knots_y, sy, eta, dy);
                const double ds = W * 0.5 * (d - c) * gw[gj];
                for (int u = 0; u <= p; ++u) {
                    const int I = row * ny + sy - p + u;
                    F(I) -= lambda * dy[0][u] * ds;
                    for (int v = 0; v <= p; ++v) {
                        const int J = row * ny + sy - p + v;
                        M(I, J) += lambda * dy[0][u] * dy[0][v] * ds;
                    }
                }
            }
        }
    }

    // Clamp: w = dw/dx = 0 at x = 0 removes the first two control rows.
    for (int c = 2 * ny; c < n; ++c) {
        sys.free_dofs.push_back(c);
    }
    const int nf = sys.n_free();
    sys.mass.resize(nf, nf);
    sys.stiffness.resize(nf, nf);
    sys.coupling.resize(nf);
    sys.forcing.resize(nf);
    for (int r = 0; r < nf; ++r) {
        sys.coupling(r) = Th(sys.free_dofs[r]);
        sys.forcing(r) = F(sys.free_dofs[r]);
        for (int s = 0; s < nf; ++s) {
            sys.mass(r, s) = M(sys.free_dofs[r], sys.free_dofs[s]);
            sys.stiffness(r, s) = K(sys.free_dofs[r], sys.free_dofs[s]);
        }
    }
    // Remove round-off asymmetry from the accumulation order.
    sys.mass = 0.5 * (sys.mass + sys.mass.transpose()).eval();
    sys.stiffness = 0.5 * (sys.stiffness + sys.stiffness.transpose()).eval();
    sys.capacitance = design.capacitance();

    Eigen::LLT<Eigen::MatrixXd> llt(sys.mass);
    if (llt.info() != Eigen::Success) {
        throw AssemblyError("assemble_peh: mass matrix is not positive definite");
    }
    return sys;
}

ModalBasis solve_modes(const PehSystem& system, int count) {
    const int nf = system.n_free();
    if (count > nf) {
        throw DomainError("solve_modes: requested more modes than free DOFs");
    }
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(system.stiffness, system.mass);
    if (es.info() != Eigen::Success) {
        throw NumericalError("solve_modes: generalized eigen-solver failed for " + system.design.id());
    }
    const int k = count <= 0 ? nf : count;
    ModalBasis out;
    out.omega.resize(k);
    for (int i = 0; i < k; ++i) {
        const double lam = es.eigenvalues()(i);
        if (!(lam > 0.0)) {
            throw AssemblyError("solve_modes: constrained stiffness is singular for " + system.design.id());
        }
        out.omega(i) = std::sqrt(lam);
    }
    out.shapes = es.eigenvectors().leftCols(k);
    return out;
}

int choose_mode_count(const Eigen::VectorXd& omega, double cutoff_hz, int min_modes) {
    const int n = static_cast<int>(omega.size());
    if (n == 0) {
        throw DomainError("choose_mode_count: empty spectrum");
    }
    const double cutoff = kTwoPi * cutoff_hz;
    int k = n;
    for (int i = 0; i < n; ++i) {
        if (omega(i) > cutoff) {
            k = i + 1;
            break;
        }
    }
    return std::min(n, std::max(k, min_modes));
}

double ReducedPeh::first_frequency_hz() const {
    if (omega.size() == 0) {
        throw DomainError("ReducedPeh: no modes");
    }
    return omega(0) / kTwoPi;
}

ReducedPeh reduce_model(const PehSystem& system, const ModalBasis& modes, int count, bool static_correction) {
    if (count < 1 || count > modes.omega.size()) {
        throw DomainError("reduce_model: mode count inconsistent with the modal basis");
    }
    ReducedPeh r;
    r.omega = modes.omega.head(count);
    r.shapes = modes.shapes.leftCols(count);
    r.k = r.omega.array().square();
    r.c = system.design.damping_alpha + system.design.damping_beta * r.k.array();
    r.theta = r.shapes.transpose() * system.coupling;
    r.f = r.shapes.transpose() * system.forcing;
    r.capacitance = system.capacitance;
    r.load_resistance = system.design.load_resistance;
    r.design_id = system.design.id();
    if (static_correction && count < modes.omega.size()) {
        const Eigen::LLT<Eigen::MatrixXd> llt(system.stiffness);
        if (llt.info() != Eigen::Success) {
            throw NumericalError("reduce_model: stiffness matrix is not positive definite");
        }
        const Eigen::VectorXd kt = llt.solve(system.coupling);
        r.residual_capacitance = system.coupling.dot(kt) - (r.theta.array().square() / r.k.array()).sum();
        r.residual_forcing = system.forcing.dot(kt) - (r.theta.array() * r.f.array() / r.k.array()).sum();
    }
    return r;
}

ReducedPeh build_reduced(const PehDesign& design, const PehMesh& mesh) {
    const PehSystem sys = assemble_peh(design, mesh);
    const ModalBasis modes = solve_modes(sys);
    return reduce_model(sys, modes, choose_mode_count(modes.omega));
}

std::vector<std::complex<double>> voltage_frf(const ReducedPeh& r, const std::vector<double>& omega) {
    if (omega.empty()) {
        throw DomainError("voltage_frf: empty frequency grid");
    }
    using cd = std::complex<double>;
    std::vector<cd> out;
    out.reserve(omega.size());
    const int k = r.n_modes();
    for (double w : omega) {
        if (!(w >= 0.0)) {
            throw DomainError("voltage_frf: frequencies must be non-negative");
        }
        const cd iw(0.0, w);
        const cd s = iw / (1.0 / r.load_resistance + iw * r.capacitance);
        cd tg = 0.0;
        cd tu = 0.0;
        for (int i = 0; i < k; ++i) {
            const cd d = r.k(i) - w * w + iw * r.c(i);
            tg += r.theta(i) * r.f(i) / d;
            tu += r.theta(i) * r.theta(i) / d;
        }
        tg += r.residual_forcing;
        tu += r.residual_capacitance;
        out.push_back(-s * tg / (1.0 + s * tu));
    }
    return out;
}

std::vector<std::complex<double>> voltage_frf_full(const PehSystem& sys, double load_resistance,
                                                   const std::vector<double>& omega) {
    if (omega.empty()) {
        throw DomainError("voltage_frf_full: empty frequency grid");
    }
    using cd = std::complex<double>;
    const Eigen::MatrixXd C = sys.damping();
    const Eigen::VectorXcd theta = sys.coupling.cast<cd>();
    const Eigen::MatrixXcd tt = theta * theta.transpose();
    std::vector<cd> out;
    out.reserve(omega.size());
    for (double w : omega) {
        if (!(w >= 0.0)) {
            throw DomainError("voltage_frf_full: frequencies must be non-negative");
        }
        const cd iw(0.0, w);
        const cd s = iw / (1.0 / load_resistance + iw * sys.capacitance);
        Eigen::MatrixXcd A = (sys.stiffness - w * w * sys.mass).cast<cd>() + iw * C.cast<cd>() + s * tt;
        const Eigen::VectorXcd x = A.partialPivLu().solve(sys.forcing.cast<cd>());
        out.push_back(-s * theta.dot(x));
    }
    return out;
}

VoltageTrace simulate_voltage(const ReducedPeh& r, const std::vector<double>& accel, double dt,
                              const IntegrationOptions& options, std::vector<Eigen::VectorXd>* states) {
    namespace odeint = boost::numeric::odeint;
    if (!(dt > 0.0)) {
        throw DomainError("simulate_voltage: dt must be positive");
    }
    VoltageTrace trace;
    trace.dt = dt;
    trace.design_id = r.design_id;
    trace.load_resistance = r.load_resistance;
    const std::size_t n = accel.size();
    trace.volts.assign(n, 0.0);
    const int k = r.n_modes();
    const int dim = 2 * k + 1;
    if (states) {
        states->assign(n, Eigen::VectorXd::Zero(dim));
    }
    double scale = 0.0;
    for (double a : accel) {
        if (!std::isfinite(a)) {
            throw DomainError("simulate_voltage: non-finite acceleration sample");
        }
        scale = std::max(scale, std::abs(a));
    }
    if (n < 2 || scale == 0.0) {
        return trace;
    }

    // Integrate the response to accel / scale; the model is linear so the
    // result is rescaled afterwards. Keeps abs_tol meaningful for any amplitude.
    // The electrical state is the charge q = (C_p + dC) v + g a, so the
    // discarded modes' static term g da/dt never needs the input derivative.
    const double c_total = r.capacitance + r.residual_capacitance;
    const double inv_c = 1.0 / c_total;
    const double g = r.residual_forcing;
    const double t_end = dt * static_cast<double>(n - 1);
    using state_t = std::vector<double>;
    auto input = [&](double t) {
        double pos = t / dt;
        pos = std::clamp(pos, 0.0, static_cast<double>(n - 1));
        const auto i0 = std::min(static_cast<std::size_t>(pos), n - 2);
        const double frac = pos - static_cast<double>(i0);
        return ((1.0 - frac) * accel[i0] + frac * accel[i0 + 1]) / scale;
    };
    auto rhs = [&](const state_t& z, state_t& dz, double t) {
        const double a = input(t);
        const double v = (z[2 * k] - g * a) * inv_c;
        double flux = 0.0;
        for (int i = 0; i < k; ++i) {
            const double eta = z[i];
            const double deta = z[k + i];
            dz[i] = deta;
            dz[k + i] = -r.k(i) * eta - r.c(i) * deta + r.theta(i) * v + r.f(i) * a;
            flux += r.theta(i) * deta;
        }
        dz[2 * k] = -flux - v / r.load_resistance;
    };

    std::vector<double> times(n);
    for (std::size_t i = 0; i < n; ++i) {
        times[i] = std::min(dt * static_cast<double>(i), t_end);
    }
    state_t z(dim, 0.0);
    z[2 * k] = g * input(0.0);
    std::size_t sample = 0;
    auto observer = [&](const state_t& s, double t) {
        if (sample < n) {
            const double v = (s[2 * k] - g * input(t)) * inv_c;
            trace.volts[sample] = v * scale;
            if (states) {
                for (int d = 0; d < 2 * k; ++d) {
                    (*states)[sample](d) = s[d] * scale;
                }
                (*states)[sample](2 * k) = v * scale;
            }
        }
        ++sample;
    };
    auto stepper = odeint::make_dense_output(options.abs_tol, options.rel_tol, odeint::runge_kutta_dopri5<state_t>());
    try {
        odeint::integrate_times(stepper, rhs, z, times.begin(), times.end(), dt, observer,
                                odeint::max_step_checker(static_cast<int>(std::min<std::size_t>(options.max_steps, 1u << 30))));
    } catch (const std::exception& e) {
        throw NumericalError("simulate_voltage: integration failed for design " + r.design_id + ": " + e.what());
    }
    for (double v : trace.volts) {
        if (!std::isfinite(v)) {
            throw NumericalError("simulate_voltage: non-finite voltage for design " + r.design_id);
        }
    }
    return trace;
}

VoltageTrace simulate_voltage(const ReducedPeh& reduced, const vbi::PassageRecord& passage,
                              const IntegrationOptions& options) {
    VoltageTrace t = simulate_voltage(reduced, passage.accel, passage.dt, options);
    t.source_id = passage.id;
    return t;
}

double harvested_energy(const VoltageTrace& trace, double t1, double t2) {
    if (!(trace.load_resistance > 0.0)) {
        throw DomainError("harvested_energy: trace has no load resistance");
    }
    const double span = trace.duration();
    const double eps = 1e-9 * std::max(1.0, span);
    if (!(t1 < t2) || t1 < -eps || t2 > span + eps) {
        throw DomainError("harvested_energy: window outside the trace");
    }
    t1 = std::max(t1, 0.0);
    t2 = std::min(t2, span);
    const double dt = trace.dt;
    const auto& v = trace.volts;
    auto power_at = [&](double t) {
        double pos = std::clamp(t / dt, 0.0, static_cast<double>(v.size() - 1));
        const auto i0 = std::min(static_cast<std::size_t>(pos), v.size() - 2);
        const double frac = pos - static_cast<double>(i0);
        const double p0 = v[i0] * v[i0];
        const double p1 = v[i0 + 1] * v[i0 + 1];
        return (1.0 - frac) * p0 + frac * p1;
    };
    const auto first = static_cast<std::size_t>(std::floor(t1 / dt));
    double e = 0.0;
    for (std::size_t i = first; i + 1 < v.size(); ++i) {
        const double a = std::max(t1, dt * static_cast<double>(i));
        const double b = std::min(t2, dt * static_cast<double>(i + 1));
        if (b <= a) {
            if (dt * static_cast<double>(i) >= t2) break;
            continue;
        }
        e += 0.5 * (b - a) * (power_at(a) + power_at(b));
    }
    return e / trace.load_resistance;
}

double harvested_energy(const VoltageTrace& trace) {
    if (trace.volts.size() < 2) {
        return 0.0;
    }
    return harvested_energy(trace, 0.0, trace.duration());
}

double frf_power(const ReducedPeh& reduced, double load_resistance, double omega) {
    ReducedPeh r = reduced;
    r.load_resistance = load_resistance;
    const auto h = voltage_frf(r, {omega});
    return std::norm(h[0]) / load_resistance;
}

double select_load_resistance(const ReducedPeh& reduced, double lo, double hi) {
    if (!(lo < hi)) {
        throw DomainError("select_load_resistance: empty bracket");
    }
    const double w1 = reduced.omega(0);
    auto f = [&](double x) { return -frf_power(reduced, std::pow(10.0, x), w1); };
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo;
    double b = hi;
    double c = b - g * (b - a);
    double d = a + g * (b - a);
    double fc = f(c);
    double fd = f(d);
    while (b - a > 1e-6) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    const double x = 0.5 * (a + b);
    if (x - lo < 1e-3 || hi - x < 1e-3 || !std::isfinite(f(x))) {
        throw NumericalError("select_load_resistance: optimum not bracketed in [1e" + std::to_string(lo) + ", 1e" +
                             std::to_string(hi) + "] for " + reduced.design_id);
    }
    return std::pow(10.0, x);
}

ReducedPeh with_load_resistance(ReducedPeh reduced, double load_resistance) {
    if (!(load_resistance > 0.0)) {
        throw DomainError("with_load_resistance: resistance must be positive");
    }
    reduced.load_resistance = load_resistance;
    return reduced;
}

double fundamental_frequency(const PehDesign& design, const PehMesh& mesh) {
    const PehSystem sys = assemble_peh(design, mesh);
    return solve_modes(sys, 1).omega(0) / kTwoPi;
}

std::vector<std::vector<double>> fundamental_frequency_map(const std::vector<double>& lengths,
                                                           const std::vector<double>& ratios, double tip_mass,
                                                           const PehDesign& base, const PehMesh& mesh) {
    if (lengths.empty() || ratios.empty()) {
        throw DomainError("fundamental_frequency_map: empty grid");
    }
    std::vector<std::vector<double>> out(lengths.size(), std::vector<double>(ratios.size()));
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        for (std::size_t j = 0; j < ratios.size(); ++j) {
            PehDesign d = base;
            d.length = lengths[i];
            d.aspect_ratio = ratios[j];
            d.tip_mass = tip_mass;
            out[i][j] = fundamental_frequency(d, mesh);
        }
    }
    return out;
}

}  // namespace sehs::peh
