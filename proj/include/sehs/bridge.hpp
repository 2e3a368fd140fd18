#pragma once

// Vehicle-bridge interaction: Euler-Bernoulli beam FE model with a
// linear-taper crack, ISO 8608 road roughness, a 4-DOF half-car and a
// Newmark-beta coupled time integrator.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace sehs::vbi {

inline constexpr double kGravity = 9.81;

/// Simply supported beam (SI units throughout).
struct BeamModel {
    double span = 25.0;                // L_b [m]
    double youngs_modulus = 2.87e9;    // E [Pa]
    double second_moment = 2.9;        // I_0 [m^4]
    double area = 8.7;                 // A [m^2]
    double mass_per_length = 2303.0;   // mu [kg/m]
    double damping_ratio = 0.03;       // xi
    int n_elements = 100;
    double section_height = 2.0;       // h [m]
    double section_width = 4.35;       // b [m]

    /// Reference bridge with the rectangular section implied by A and I_0.
    static BeamModel reference(int n_elements = 100);

    /// h = sqrt(12 I0 / A), b = A / h.
    static std::pair<double, double> equivalent_rectangle(double area, double second_moment);

    void validate() const;
};

/// Single open crack; severity is the crack-depth ratio h_c / h.
struct CrackSpec {
    double location = 12.5;  // zeta_c [m]
    double severity = 0.0;

    void validate(const BeamModel& beam) const;
};

/// Damage presets used throughout the case studies.
enum class DamageState { Healthy, DMN1, DMN2, DQN1 };

std::optional<CrackSpec> crack_for(DamageState state, const BeamModel& beam);
std::string to_string(DamageState state);
DamageState damage_state_from_string(const std::string& name);

/// Assembled beam with simply supported boundary conditions applied.
/// Matrices are expressed over free DOFs only (node w/theta pairs, minus
/// the two support deflections).
struct BeamSystem {
    BeamModel beam;
    std::optional<CrackSpec> crack;
    Eigen::MatrixXd mass;
    Eigen::MatrixXd stiffness;
    Eigen::MatrixXd damping;
    std::vector<double> element_flexural_stiffness;  // EI at element midpoints
    std::vector<int> free_index;                     // global DOF -> free DOF, -1 if fixed
    double rayleigh_mass_coeff = 0.0;
    double rayleigh_stiffness_coeff = 0.0;

    int n_free() const { return static_cast<int>(mass.rows()); }
    double element_length() const { return beam.span / beam.n_elements; }

    /// Hermite interpolation weights for the deflection at x, as
    /// (free DOF, weight) pairs. With derivative = true the weights give dw/dx.
    std::vector<std::pair<int, double>> interpolation(double x, bool derivative = false) const;

    double interpolate(const Eigen::VectorXd& field, double x, bool derivative = false) const;
};

/// EI_e(zeta) of the cracked beam; linear taper over [zeta_c - 1.5h, zeta_c + 1.5h].
double flexural_stiffness_at(const BeamModel& beam, const std::optional<CrackSpec>& crack, double x);

/// Second moment of area at the crack tip, b (h - h_c)^3 / 12.
double cracked_second_moment(const BeamModel& beam, double severity);

BeamSystem assemble_beam(const BeamModel& beam, const std::optional<CrackSpec>& crack = std::nullopt);

/// Ascending natural frequencies [Hz].
std::vector<double> beam_modal_frequencies(const BeamSystem& system, int count);

/// n^2 pi / (2 L^2) sqrt(EI / mu), the continuous simply supported result.
double analytic_beam_frequency(const BeamModel& beam, int mode);

// ---------------------------------------------------------------------------
// Road roughness

enum class RoadClass { A, B, NR };

std::string to_string(RoadClass road);
RoadClass road_class_from_string(const std::string& name);

struct RoadHarmonic {
    double amplitude;          // eta_i [m]
    double spatial_frequency;  // n_i [cycle/m]
    double phase;              // theta_i [rad]
};

struct RoadProfile {
    RoadClass road_class = RoadClass::NR;
    double psd_n0 = 0.0;       // G_d(n_0) [m^3]
    double exponent = 2.0;     // w
    double n0 = 0.1;           // [cycle/m]
    double delta_n = 0.04;     // [cycle/m]
    double length = 0.0;       // [m]
    std::uint64_t seed = 0;
    std::vector<RoadHarmonic> harmonics;

    bool smooth() const { return harmonics.empty(); }
    double height(double x) const;
    double slope(double x) const;
};

double road_psd_coefficient(RoadClass road);

/// Displacement PSD G_d(n) = G_d(n0) (n / n0)^-w.
double road_psd(double psd_n0, double n, double n0 = 0.1, double exponent = 2.0);

/// eta = sqrt(2 G_d(n) dn).
double road_amplitude(double psd_n0, double n, double delta_n = 0.04, double n0 = 0.1,
                      double exponent = 2.0);

inline constexpr double kRoadCutoff = 10.0;  // highest harmonic [cycle/m]

RoadProfile generate_road_profile(RoadClass road, double length, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Vehicle

struct VehicleModel {
    double body_mass = 1000.0;         // m_v [kg]
    double pitch_inertia = 0.0;        // I_v [kg m^2]
    double tire_mass_front = 50.0;     // m_t1 [kg]
    double tire_mass_rear = 50.0;      // m_t2 [kg]
    double susp_stiffness_front = 27500.0;
    double susp_stiffness_rear = 27500.0;
    double susp_damping_front = 1300.0;
    double susp_damping_rear = 1300.0;
    double tire_stiffness_front = 1.5e5;
    double tire_stiffness_rear = 1.5e5;
    double tire_damping_front = 5.0;
    double tire_damping_rear = 5.0;
    double d1 = 1.2375;                // CG to front axle [m]
    double d2 = 1.5125;                // CG to rear axle [m]
    double speed = 55.0 / 3.6;         // [m/s]

    double wheelbase() const { return d1 + d2; }
    double total_mass() const { return body_mass + tire_mass_front + tire_mass_rear; }

    /// Static axle loads (front, rear) [N].
    std::pair<double, double> static_axle_loads() const;

    /// Mass, damping and stiffness of the half-car over (z_c, theta_c, z_t1, z_t2).
    Eigen::Matrix4d mass_matrix() const;
    Eigen::Matrix4d damping_matrix(bool include_tire_damping) const;
    Eigen::Matrix4d stiffness_matrix() const;

    /// Mid-range vehicle with I_v = m_v d1 d2.
    static VehicleModel nominal();

    void validate() const;
};

struct Interval {
    double lo;
    double hi;
};

/// Ranges of the randomized vehicle parameters.
struct VehicleRanges {
    Interval body_mass{500.0, 1500.0};         // [kg]
    Interval speed{50.0 / 3.6, 60.0 / 3.6};    // [m/s]
    Interval wheelbase{2.0, 3.5};              // d1 + d2 [m]
    Interval front_axle_fraction{0.4, 0.5};    // d1 / (d1 + d2)
};

/// Latin hypercube samples over VehicleRanges; everything else from nominal().
std::vector<VehicleModel> sample_vehicle_params(int n, const VehicleRanges& ranges, std::uint64_t seed);

/// Raw LHS on the unit cube: n samples x dims, each column stratified.
Eigen::MatrixXd latin_hypercube(int n, int dims, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Time integration

/// Newmark-beta for M a + C v + K u = f, with a precomputed inverse of the
/// effective stiffness so repeated trial solves inside a fixed-point loop are cheap.
class NewmarkIntegrator {
public:
    NewmarkIntegrator(Eigen::MatrixXd mass, Eigen::MatrixXd damping, Eigen::MatrixXd stiffness,
                      double dt, double gamma = 0.5, double beta = 0.25);

    /// Sets u, v and derives a from equilibrium with the given force.
    void initialize(const Eigen::VectorXd& u, const Eigen::VectorXd& v, const Eigen::VectorXd& force);

    /// Precomputes the history contribution for the next step.
    void begin_step();

    /// Trial displacement at t + dt under a sparse load (dof, value).
    Eigen::VectorXd trial(const std::vector<std::pair<int, double>>& loads) const;

    /// Velocity and acceleration consistent with a trial displacement.
    Eigen::VectorXd velocity_for(const Eigen::VectorXd& u_next) const;
    Eigen::VectorXd acceleration_for(const Eigen::VectorXd& u_next) const;

    void commit(const Eigen::VectorXd& u_next);

    /// begin_step + trial + commit with a dense load vector.
    void step(const Eigen::VectorXd& force);

    const Eigen::VectorXd& displacement() const { return u_; }
    const Eigen::VectorXd& velocity() const { return v_; }
    const Eigen::VectorXd& acceleration() const { return a_; }
    double dt() const { return dt_; }

    /// 1/2 v'Mv + 1/2 u'Ku.
    double mechanical_energy() const;

private:
    Eigen::MatrixXd mass_, damping_, stiffness_;
    Eigen::MatrixXd effective_inverse_;
    double dt_, gamma_, beta_;
    Eigen::VectorXd u_, v_, a_;
    Eigen::VectorXd history_solution_;
};

// ---------------------------------------------------------------------------
// Passages

struct SimulationOptions {
    double gamma = 0.5;
    double beta = 0.25;
    double contact_tolerance = 1e-6;  // relative change of contact forces
    int max_iterations = 100;
    bool tire_damping = true;         // c_t terms in the contact law
};

/// One vehicle crossing recorded at the sensor.
struct PassageRecord {
    std::string id;
    double dt = 0.001;
    std::vector<double> accel;   // [m/s^2]
    double sensor_location = 12.5;
    std::optional<CrackSpec> crack;  // nullopt: healthy
    std::string state_label = "HN";
    VehicleModel vehicle;
    std::uint64_t road_seed = 0;
    std::string road_class = "NR";

    bool healthy() const { return !crack.has_value(); }
    double duration() const { return dt * static_cast<double>(accel.size() > 0 ? accel.size() - 1 : 0); }
};

/// Contact force histories and iteration counts, for diagnostics and tests.
struct PassageDiagnostics {
    std::vector<double> contact_front;  // total downward force on the bridge [N]
    std::vector<double> contact_rear;
    std::vector<double> midspan_deflection;
    int max_iterations_used = 0;
};

/// Number of samples covering first-axle entry to last-axle exit.
std::size_t passage_sample_count(double span, double wheelbase, double speed, double dt);

PassageRecord simulate_passage(const BeamSystem& system, const VehicleModel& vehicle, const RoadProfile& road,
                               double dt, double sensor_location, const SimulationOptions& options = {},
                               PassageDiagnostics* diagnostics = nullptr);

}  // namespace sehs::vbi
