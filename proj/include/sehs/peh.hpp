#pragma once

// Bimorph piezoelectric cantilever plate: isogeometric Kirchhoff-Love
// discretization, modal reduction, voltage FRF and base-excited time response.

#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sehs/bspline.hpp"

namespace sehs::vbi {
struct PassageRecord;
}

namespace sehs::peh {

struct SubstrateMaterial {
    double youngs_modulus = 105e9;  // [Pa]
    double poisson = 0.30;
    double density = 9000.0;        // [kg/m^3]
};

/// Plane-stress reduced piezo constants.
struct PiezoMaterial {
    double c11 = 69.5e9;  // [Pa]
    double c12 = 24.3e9;
    double c22 = 69.5e9;
    double c66 = 22.6e9;
    double e31 = -16.0;   // [C/m^2]
    double e32 = -16.0;
    double eps33 = 9.57e-9;  // [F/m]
    double density = 7800.0;
};

/// Default total thickness. Tuned so the no-tip-mass L = 0.34 m, R = 1 device
/// sits on the 4.8 Hz first bridge mode (see README, "PEH thickness").
inline constexpr double kDefaultThickness = 2.0e-3;

struct PehDesign {
    double length = 0.34;              // L [m]
    double aspect_ratio = 1.0;         // R, W = R L
    double pzt_length_ratio = 0.1;     // ell, L_pzt = ell L
    double total_thickness = kDefaultThickness;  // h [m]
    double thickness_ratio = 0.3;      // H, h_p = H h
    SubstrateMaterial substrate;
    PiezoMaterial piezo;
    double damping_alpha = 14.65;      // [rad/s]
    double damping_beta = 1e-5;        // [s/rad]
    double load_resistance = 1e6;      // R_l [Ohm]
    double tip_mass = 0.0;             // [kg], spread along x = L

    double width() const { return aspect_ratio * length; }
    double pzt_length() const { return pzt_length_ratio * length; }
    double piezo_thickness() const { return thickness_ratio * total_thickness; }
    double substrate_thickness() const { return total_thickness - 2.0 * piezo_thickness(); }

    /// Series capacitance eps33 W L_pzt / (2 h_p).
    double capacitance() const;

    std::string id() const;
    void validate() const;
};

struct PehMesh {
    int n_x = 16;      // control points along the length
    int n_y = 16;      // control points across the width
    int degree = 3;
    int gauss = 4;     // points per knot span and direction

    void validate() const;
};

/// Matrices over the free control variables (first two control rows clamped).
struct PehSystem {
    PehDesign design;
    PehMesh mesh;
    KnotVector knots_x;
    KnotVector knots_y;
    Eigen::MatrixXd mass;
    Eigen::MatrixXd stiffness;
    Eigen::VectorXd coupling;   // Theta
    Eigen::VectorXd forcing;    // F, per unit base acceleration
    double capacitance = 0.0;
    std::vector<int> free_dofs;  // free index -> control index (i * n_y + j)

    int n_free() const { return static_cast<int>(free_dofs.size()); }

    Eigen::MatrixXd damping() const { return design.damping_alpha * mass + design.damping_beta * stiffness; }

    /// Transverse deflection at physical (x, y) for a free-DOF field.
    double deflection(const Eigen::VectorXd& field, double x, double y) const;
};

/// Laminate bending stiffness [N m] in the piezo-covered root and in the bare tail.
Eigen::Matrix3d laminate_stiffness(const PehDesign& design, bool with_piezo);

/// Mass per unit area [kg/m^2].
double areal_mass(const PehDesign& design, bool with_piezo);

PehSystem assemble_peh(const PehDesign& design, const PehMesh& mesh = {});

struct ModalBasis {
    Eigen::VectorXd omega;   // [rad/s], ascending
    Eigen::MatrixXd shapes;  // mass-normalized columns
};

/// Lowest `count` modes (count <= 0 returns all of them).
ModalBasis solve_modes(const PehSystem& system, int count = 0);

/// Smallest K whose highest retained frequency exceeds cutoff_hz, at least min_modes.
int choose_mode_count(const Eigen::VectorXd& omega, double cutoff_hz = 60.0, int min_modes = 3);

struct ReducedPeh {
    Eigen::VectorXd omega;
    Eigen::VectorXd k;       // diagonal of k_o
    Eigen::VectorXd c;       // diagonal of c_o
    Eigen::VectorXd theta;   // Phi^T Theta
    Eigen::VectorXd f;       // Phi^T F
    Eigen::MatrixXd shapes;
    double capacitance = 0.0;
    double load_resistance = 0.0;
    // Quasi-static contribution of the discarded modes: Theta' K^-1 Theta and
    // Theta' K^-1 F minus the retained modal sums. Zero when every mode is kept.
    double residual_capacitance = 0.0;
    double residual_forcing = 0.0;
    std::string design_id;

    int n_modes() const { return static_cast<int>(omega.size()); }
    double first_frequency_hz() const;
};

/// First `count` modes. With static_correction the discarded modes enter through
/// their static flexibility (residual capacitance and forcing terms).
ReducedPeh reduce_model(const PehSystem& system, const ModalBasis& modes, int count, bool static_correction = true);

/// assemble_peh + solve_modes + reduce_model with the default truncation rule.
ReducedPeh build_reduced(const PehDesign& design, const PehMesh& mesh = {});

/// Voltage per unit base acceleration [V s^2/m] from the reduced model.
std::vector<std::complex<double>> voltage_frf(const ReducedPeh& reduced, const std::vector<double>& omega);

/// Same quantity from the full matrices (dense complex solve per frequency).
std::vector<std::complex<double>> voltage_frf_full(const PehSystem& system, double load_resistance,
                                                   const std::vector<double>& omega);

struct VoltageTrace {
    double dt = 0.0;
    std::vector<double> volts;
    std::string source_id;
    std::string design_id;
    double load_resistance = 0.0;

    double duration() const { return dt * static_cast<double>(volts.empty() ? 0 : volts.size() - 1); }
};

struct IntegrationOptions {
    double rel_tol = 1e-6;
    double abs_tol = 1e-9;
    std::size_t max_steps = 50'000'000;
};

/// Response to a sampled base acceleration (linear between samples), zero
/// initial state. If `states` is given it receives Z = [eta, eta_dot, v] at each sample.
VoltageTrace simulate_voltage(const ReducedPeh& reduced, const std::vector<double>& accel, double dt,
                              const IntegrationOptions& options = {},
                              std::vector<Eigen::VectorXd>* states = nullptr);

VoltageTrace simulate_voltage(const ReducedPeh& reduced, const vbi::PassageRecord& passage,
                              const IntegrationOptions& options = {});

/// Trapezoidal integral of v^2 / R_l over [t1, t2] [J].
double harvested_energy(const VoltageTrace& trace, double t1, double t2);
double harvested_energy(const VoltageTrace& trace);

/// Average power |H_v(omega_1)|^2 / R_l per unit acceleration amplitude squared.
double frf_power(const ReducedPeh& reduced, double load_resistance, double omega);

/// Golden-section search over log10 R_l in [lo, hi] maximizing frf_power at the first mode.
double select_load_resistance(const ReducedPeh& reduced, double log10_lo = 2.0, double log10_hi = 8.0);

ReducedPeh with_load_resistance(ReducedPeh reduced, double load_resistance);

/// First modal frequency [Hz] for every (L, R); result[i][j] is lengths[i], ratios[j].
std::vector<std::vector<double>> fundamental_frequency_map(const std::vector<double>& lengths,
                                                           const std::vector<double>& ratios,
                                                           double tip_mass, const PehDesign& base = {},
                                                           const PehMesh& mesh = {});

double fundamental_frequency(const PehDesign& design, const PehMesh& mesh = {});

/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace sehs::peh
