#include "sehs/bridge.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "sehs/errors.hpp"

namespace sehs::vbi {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool near_relative(double a, double b, double tol) {
    return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
}

// Hermite cubic shape functions on [0, le] at local s in [0, 1].
std::array<double, 4> hermite(double s, double le) {
    const double s2 = s * s;
    const double s3 = s2 * s;
    return {1.0 - 3.0 * s2 + 2.0 * s3, le * (s - 2.0 * s2 + s3), 3.0 * s2 - 2.0 * s3, le * (-s2 + s3)};
}

std::array<double, 4> hermite_slope(double s, double le) {
    const double s2 = s * s;
    return {(-6.0 * s + 6.0 * s2) / le, 1.0 - 4.0 * s + 3.0 * s2, (6.0 * s - 6.0 * s2) / le, -2.0 * s + 3.0 * s2};
}

}  // namespace

// ---------------------------------------------------------------------------
// Beam

std::pair<double, double> BeamModel::equivalent_rectangle(double area, double second_moment) {
    const double h = std::sqrt(12.0 * second_moment / area);
    return {h, area / h};
}

BeamModel BeamModel::reference(int n_elements) {
    BeamModel beam;
    beam.n_elements = n_elements;
    auto [h, b] = equivalent_rectangle(beam.area, beam.second_moment);
    beam.section_height = h;
    beam.section_width = b;
    return beam;
}

void BeamModel::validate() const {
    if (!(span > 0.0) || !(youngs_modulus > 0.0) || !(second_moment > 0.0) || !(area > 0.0) ||
        !(mass_per_length > 0.0)) {
        throw DomainError("beam: span, E, I0, A and mu must be positive");
    }
    if (!(damping_ratio >= 0.0 && damping_ratio < 1.0)) {
        throw DomainError("beam: damping ratio must lie in [0, 1)");
    }
    if (n_elements < 2) {
        throw DomainError("beam: at least two elements are required");
    }
    const double b = section_width;
    const double h = section_height;
    if (!near_relative(b * h, area, 1e-9) || !near_relative(b * h * h * h / 12.0, second_moment, 1e-9)) {
        std::ostringstream msg;
        msg << "beam: section " << b << " x " << h << " inconsistent with A = " << area << ", I0 = " << second_moment;
        throw DomainError(msg.str());
    }
}

void CrackSpec::validate(const BeamModel& beam) const {
    if (!(severity >= 0.0 && severity < 1.0)) {
        throw DomainError("crack: severity must lie in [0, 1)");
    }
    const double half_zone = 1.5 * beam.section_height;
    if (location - half_zone < 0.0 || location + half_zone > beam.span) {
        std::ostringstream msg;
        msg << "crack: affected zone [" << location - half_zone << ", " << location + half_zone
            << "] m leaves the span [0, " << beam.span << "] m";
        throw DomainError(msg.str());
    }
}

std::optional<CrackSpec> crack_for(DamageState state, const BeamModel& beam) {
    switch (state) {
        case DamageState::Healthy: return std::nullopt;
        case DamageState::DMN1: return CrackSpec{0.5 * beam.span, 0.10};
        case DamageState::DMN2: return CrackSpec{0.5 * beam.span, 0.20};
        case DamageState::DQN1: return CrackSpec{0.25 * beam.span, 0.10};
    }
    return std::nullopt;
}

std::string to_string(DamageState state) {
    switch (state) {
        case DamageState::Healthy: return "HN";
        case DamageState::DMN1: return "DMN1";
        case DamageState::DMN2: return "DMN2";
        case DamageState::DQN1: return "DQN1";
    }
    return "HN";
}

DamageState damage_state_from_string(const std::string& name) {
    if (name == "HN" || name == "healthy") return DamageState::Healthy;
    if (name == "DMN1") return DamageState::DMN1;
    if (name == "DMN2") return DamageState::DMN2;
    if (name == "DQN1") return DamageState::DQN1;
    throw DomainError("unknown damage state '" + name + "'");
}

double cracked_second_moment(const BeamModel& beam, double severity) {
    const double remaining = beam.section_height * (1.0 - severity);
    return beam.section_width * remaining * remaining * remaining / 12.0;
}

double flexural_stiffness_at(const BeamModel& beam, const std::optional<CrackSpec>& crack, double x) {
    const double ei0 = beam.youngs_modulus * beam.second_moment;
    if (!crack || crack->severity == 0.0) {
        return ei0;
    }
    const double zc = crack->location;
    const double z1 = zc - 1.5 * beam.section_height;
    const double z2 = zc + 1.5 * beam.section_height;
    const double drop = beam.youngs_modulus * (beam.second_moment - cracked_second_moment(beam, crack->severity));
    if (x >= z1 && x <= zc) {
        return ei0 - drop * (x - z1) / (zc - z1);
    }
    if (x > zc && x <= z2) {
        return ei0 - drop * (z2 - x) / (z2 - zc);
    }
    return ei0;
}

namespace {

struct GlobalMatrices {
    Eigen::MatrixXd mass;
    Eigen::MatrixXd stiffness;
    std::vector<double> element_ei;
};

GlobalMatrices assemble_global(const BeamModel& beam, const std::optional<CrackSpec>& crack) {
    const int ne = beam.n_elements;
    const int ndof = 2 * (ne + 1);
    const double le = beam.span / ne;
    GlobalMatrices g;
    g.mass = Eigen::MatrixXd::Zero(ndof, ndof);
    g.stiffness = Eigen::MatrixXd::Zero(ndof, ndof);
    g.element_ei.resize(ne);

    Eigen::Matrix4d me;
    me << 156, 22 * le, 54, -13 * le,
          22 * le, 4 * le * le, 13 * le, -3 * le * le,
          54, 13 * le, 156, -22 * le,
          -13 * le, -3 * le * le, -22 * le, 4 * le * le;
    me *= beam.mass_per_length * le / 420.0;

    Eigen::Matrix4d ke_unit;
    ke_unit << 12, 6 * le, -12, 6 * le,
               6 * le, 4 * le * le, -6 * le, 2 * le * le,
               -12, -6 * le, 12, -6 * le,
               6 * le, 2 * le * le, -6 * le, 4 * le * le;
    ke_unit /= le * le * le;

    for (int e = 0; e < ne; ++e) {
        const double ei = flexural_stiffness_at(beam, crack, (e + 0.5) * le);
        g.element_ei[e] = ei;
        const int base = 2 * e;
        g.mass.block<4, 4>(base, base) += me;
        g.stiffness.block<4, 4>(base, base) += ei * ke_unit;
    }
    return g;
}

Eigen::MatrixXd restrict_to_free(const Eigen::MatrixXd& full, const std::vector<int>& free_dofs) {
    const int n = static_cast<int>(free_dofs.size());
    Eigen::MatrixXd out(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            out(i, j) = full(free_dofs[i], free_dofs[j]);
        }
    }
    return out;
}

std::vector<double> generalized_frequencies(const Eigen::MatrixXd& k, const Eigen::MatrixXd& m, int count) {
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(k, m, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
        throw NumericalError("beam eigen-solver failed to converge (n = " + std::to_string(k.rows()) + ")");
    }
    std::vector<double> freqs;
    freqs.reserve(count);
    for (int i = 0; i < count; ++i) {
        freqs.push_back(std::sqrt(std::max(solver.eigenvalues()(i), 0.0)) / kTwoPi);
    }
    return freqs;
}

}  // namespace

BeamSystem assemble_beam(const BeamModel& beam, const std::optional<CrackSpec>& crack) {
    beam.validate();
    if (crack) {
        crack->validate(beam);
    }
    const int ne = beam.n_elements;
    const int ndof = 2 * (ne + 1);

    BeamSystem sys;
    sys.beam = beam;
    sys.crack = crack;
    sys.free_index.assign(ndof, -1);
    std::vector<int> free_dofs;
    for (int d = 0; d < ndof; ++d) {
        if (d == 0 || d == 2 * ne) {
            continue;  // support deflections
        }
        sys.free_index[d] = static_cast<int>(free_dofs.size());
        free_dofs.push_back(d);
    }

    GlobalMatrices g = assemble_global(beam, crack);
    sys.element_flexural_stiffness = std::move(g.element_ei);
    sys.mass = restrict_to_free(g.mass, free_dofs);
    sys.stiffness = restrict_to_free(g.stiffness, free_dofs);

    Eigen::LLT<Eigen::MatrixXd> mass_check(sys.mass);
    if (mass_check.info() != Eigen::Success) {
        throw AssemblyError("beam: assembled mass matrix is not positive definite");
    }

    // Rayleigh coefficients from the undamaged beam's first two modes.
    Eigen::MatrixXd healthy_k = sys.stiffness;
    if (crack && crack->severity > 0.0) {
        healthy_k = restrict_to_free(assemble_global(beam, std::nullopt).stiffness, free_dofs);
    }
    const auto f = generalized_frequencies(healthy_k, sys.mass, 2);
    const double w1 = kTwoPi * f[0];
    const double w2 = kTwoPi * f[1];
    sys.rayleigh_mass_coeff = 2.0 * beam.damping_ratio * w1 * w2 / (w1 + w2);
    sys.rayleigh_stiffness_coeff = 2.0 * beam.damping_ratio / (w1 + w2);
    sys.damping = sys.rayleigh_mass_coeff * sys.mass + sys.rayleigh_stiffness_coeff * sys.stiffness;
    return sys;
}

std::vector<std::pair<int, double>> BeamSystem::interpolation(double x, bool derivative) const {
    const double le = element_length();
    const int ne = beam.n_elements;
    int e = static_cast<int>(std::floor(x / le));
    e = std::clamp(e, 0, ne - 1);
    const double s = std::clamp((x - e * le) / le, 0.0, 1.0);
    const auto w = derivative ? hermite_slope(s, le) : hermite(s, le);
    std::vector<std::pair<int, double>> out;
    out.reserve(4);
    for (int k = 0; k < 4; ++k) {
        const int fi = free_index[2 * e + k];
        if (fi >= 0 && w[k] != 0.0) {
            out.emplace_back(fi, w[k]);
        }
    }
    return out;
}

double BeamSystem::interpolate(const Eigen::VectorXd& field, double x, bool derivative) const {
    double value = 0.0;
    for (const auto& [dof, w] : interpolation(x, derivative)) {
        value += w * field(dof);
    }
    return value;
}

std::vector<double> beam_modal_frequencies(const BeamSystem& system, int count) {
    if (count < 1 || count > system.n_free()) {
        throw DomainError("beam_modal_frequencies: count must be in [1, " + std::to_string(system.n_free()) + "]");
    }
    return generalized_frequencies(system.stiffness, system.mass, count);
}

double analytic_beam_frequency(const BeamModel& beam, int mode) {
    const double n2 = static_cast<double>(mode) * mode;
    return n2 * std::numbers::pi / (2.0 * beam.span * beam.span) *
           std::sqrt(beam.youngs_modulus * beam.second_moment / beam.mass_per_length);
}

// ---------------------------------------------------------------------------
// Road

std::string to_string(RoadClass road) {
    switch (road) {
        case RoadClass::A: return "A";
        case RoadClass::B: return "B";
        case RoadClass::NR: return "NR";
    }
    return "NR";
}

RoadClass road_class_from_string(const std::string& name) {
    if (name == "A") return RoadClass::A;
    if (name == "B") return RoadClass::B;
    if (name == "NR") return RoadClass::NR;
    throw DomainError("unknown road class '" + name + "'");
}

double road_psd_coefficient(RoadClass road) {
    switch (road) {
        case RoadClass::A: return 16e-6;
        case RoadClass::B: return 64e-6;
        case RoadClass::NR: return 0.0;
    }
    return 0.0;
}

double road_psd(double psd_n0, double n, double n0, double exponent) {
    return psd_n0 * std::pow(n / n0, -exponent);
}

double road_amplitude(double psd_n0, double n, double delta_n, double n0, double exponent) {
    return std::sqrt(2.0 * road_psd(psd_n0, n, n0, exponent) * delta_n);
}

RoadProfile generate_road_profile(RoadClass road, double length, std::uint64_t seed) {
    if (!(length > 0.0)) {
        throw DomainError("generate_road_profile: length must be positive");
    }
    RoadProfile profile;
    profile.road_class = road;
    profile.psd_n0 = road_psd_coefficient(road);
    profile.length = length;
    profile.seed = seed;
    if (road == RoadClass::NR) {
        return profile;
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> phase(0.0, kTwoPi);
    const int count = static_cast<int>(std::floor(kRoadCutoff / profile.delta_n + 1e-9));
    profile.harmonics.reserve(count);
    for (int i = 1; i <= count; ++i) {
        const double n = i * profile.delta_n;
        double theta = phase(rng);
        if (theta >= kTwoPi) theta = 0.0;
        profile.harmonics.push_back(
            {road_amplitude(profile.psd_n0, n, profile.delta_n, profile.n0, profile.exponent), n, theta});
    }
    return profile;
}

double RoadProfile::height(double x) const {
    double r = 0.0;
    for (const auto& h : harmonics) {
        r += h.amplitude * std::cos(kTwoPi * h.spatial_frequency * x + h.phase);
    }
    return r;
}

double RoadProfile::slope(double x) const {
    double r = 0.0;
    for (const auto& h : harmonics) {
        r -= h.amplitude * kTwoPi * h.spatial_frequency * std::sin(kTwoPi * h.spatial_frequency * x + h.phase);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Vehicle

std::pair<double, double> VehicleModel::static_axle_loads() const {
    const double wb = wheelbase();
    return {kGravity * (body_mass * d2 / wb + tire_mass_front), kGravity * (body_mass * d1 / wb + tire_mass_rear)};
}

Eigen::Matrix4d VehicleModel::mass_matrix() const {
    return Eigen::Vector4d(body_mass, pitch_inertia, tire_mass_front, tire_mass_rear).asDiagonal();
}

Eigen::Matrix4d VehicleModel::damping_matrix(bool include_tire_damping) const {
    const double c1 = susp_damping_front;
    const double c2 = susp_damping_rear;
    Eigen::Matrix4d c;
    c << c1 + c2, c1 * d1 - c2 * d2, -c1, -c2,
         c1 * d1 - c2 * d2, c1 * d1 * d1 + c2 * d2 * d2, -c1 * d1, c2 * d2,
         -c1, -c1 * d1, c1, 0.0,
         -c2, c2 * d2, 0.0, c2;
    if (include_tire_damping) {
        c(2, 2) += tire_damping_front;
        c(3, 3) += tire_damping_rear;
    }
    return c;
}

Eigen::Matrix4d VehicleModel::stiffness_matrix() const {
    const double k1 = susp_stiffness_front;
    const double k2 = susp_stiffness_rear;
    Eigen::Matrix4d k;
    k << k1 + k2, k1 * d1 - k2 * d2, -k1, -k2,
         k1 * d1 - k2 * d2, k1 * d1 * d1 + k2 * d2 * d2, -k1 * d1, k2 * d2,
         -k1, -k1 * d1, k1 + tire_stiffness_front, 0.0,
         -k2, k2 * d2, 0.0, k2 + tire_stiffness_rear;
    return k;
}

VehicleModel VehicleModel::nominal() {
    VehicleModel v;
    v.pitch_inertia = v.body_mass * v.d1 * v.d2;
    return v;
}

void VehicleModel::validate() const {
    const bool positive = body_mass > 0 && pitch_inertia > 0 && tire_mass_front > 0 && tire_mass_rear > 0 &&
                          susp_stiffness_front > 0 && susp_stiffness_rear > 0 && tire_stiffness_front > 0 &&
                          tire_stiffness_rear > 0;
    const bool damping_ok = susp_damping_front >= 0 && susp_damping_rear >= 0 && tire_damping_front >= 0 &&
                            tire_damping_rear >= 0;
    if (!positive || !damping_ok) {
        throw DomainError("vehicle: masses and stiffnesses must be positive, dampings non-negative");
    }
    if (!(d1 + d2 > 0.0) || !(speed > 0.0)) {
        throw DomainError("vehicle: wheelbase and speed must be positive");
    }
}

Eigen::MatrixXd latin_hypercube(int n, int dims, std::uint64_t seed) {
    if (n < 1 || dims < 1) {
        throw DomainError("latin_hypercube: n and dims must be positive");
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::MatrixXd samples(n, dims);
    std::vector<int> strata(n);
    for (int d = 0; d < dims; ++d) {
        for (int i = 0; i < n; ++i) strata[i] = i;
        std::shuffle(strata.begin(), strata.end(), rng);
        for (int i = 0; i < n; ++i) {
            samples(i, d) = (strata[i] + unit(rng)) / n;
        }
    }
    return samples;
}

std::vector<VehicleModel> sample_vehicle_params(int n, const VehicleRanges& ranges, std::uint64_t seed) {
    for (const Interval* iv : {&ranges.body_mass, &ranges.speed, &ranges.wheelbase, &ranges.front_axle_fraction}) {
        if (!(iv->hi >= iv->lo)) {
            throw DomainError("sample_vehicle_params: empty interval");
        }
    }
    const Eigen::MatrixXd u = latin_hypercube(n, 4, seed);
    auto lerp = [](const Interval& iv, double t) { return iv.lo + t * (iv.hi - iv.lo); };
    std::vector<VehicleModel> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        VehicleModel v = VehicleModel::nominal();
        v.body_mass = lerp(ranges.body_mass, u(i, 0));
        v.speed = lerp(ranges.speed, u(i, 1));
        const double wb = lerp(ranges.wheelbase, u(i, 2));
        const double frac = lerp(ranges.front_axle_fraction, u(i, 3));
        v.d1 = frac * wb;
        v.d2 = wb - v.d1;
        v.pitch_inertia = v.body_mass * v.d1 * v.d2;
        out.push_back(v);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Newmark

NewmarkIntegrator::NewmarkIntegrator(Eigen::MatrixXd mass, Eigen::MatrixXd damping, Eigen::MatrixXd stiffness,
                                     double dt, double gamma, double beta)
    : mass_(std::move(mass)), damping_(std::move(damping)), stiffness_(std::move(stiffness)),
      dt_(dt), gamma_(gamma), beta_(beta) {
    if (!(dt > 0.0)) {
        throw DomainError("Newmark: dt must be positive");
    }
    const Eigen::MatrixXd effective =
        stiffness_ + mass_ / (beta_ * dt_ * dt_) + damping_ * (gamma_ / (beta_ * dt_));
    Eigen::LLT<Eigen::MatrixXd> llt(effective);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("Newmark: effective stiffness is not positive definite");
    }
    effective_inverse_ = llt.solve(Eigen::MatrixXd::Identity(effective.rows(), effective.cols()));
    const auto n = mass_.rows();
    u_ = Eigen::VectorXd::Zero(n);
    v_ = Eigen::VectorXd::Zero(n);
    a_ = Eigen::VectorXd::Zero(n);
    history_solution_ = Eigen::VectorXd::Zero(n);
}

void NewmarkIntegrator::initialize(const Eigen::VectorXd& u, const Eigen::VectorXd& v, const Eigen::VectorXd& force) {
    u_ = u;
    v_ = v;
    a_ = mass_.ldlt().solve(force - damping_ * v_ - stiffness_ * u_);
}

void NewmarkIntegrator::begin_step() {
    const double c0 = 1.0 / (beta_ * dt_ * dt_);
    const double c1 = 1.0 / (beta_ * dt_);
    const double c2 = 1.0 / (2.0 * beta_) - 1.0;
    const double c3 = gamma_ / (beta_ * dt_);
    const double c4 = gamma_ / beta_ - 1.0;
    const double c5 = dt_ * (gamma_ / (2.0 * beta_) - 1.0);
    const Eigen::VectorXd rhs = mass_ * (c0 * u_ + c1 * v_ + c2 * a_) + damping_ * (c3 * u_ + c4 * v_ + c5 * a_);
    history_solution_.noalias() = effective_inverse_ * rhs;
}

Eigen::VectorXd NewmarkIntegrator::trial(const std::vector<std::pair<int, double>>& loads) const {
    Eigen::VectorXd u = history_solution_;
    for (const auto& [dof, value] : loads) {
        u += value * effective_inverse_.col(dof);
    }
    return u;
}

Eigen::VectorXd NewmarkIntegrator::acceleration_for(const Eigen::VectorXd& u_next) const {
    return (u_next - u_ - dt_ * v_) / (beta_ * dt_ * dt_) - (1.0 / (2.0 * beta_) - 1.0) * a_;
}

Eigen::VectorXd NewmarkIntegrator::velocity_for(const Eigen::VectorXd& u_next) const {
    const Eigen::VectorXd a_next = acceleration_for(u_next);
    return v_ + dt_ * ((1.0 - gamma_) * a_ + gamma_ * a_next);
}

void NewmarkIntegrator::commit(const Eigen::VectorXd& u_next) {
    const Eigen::VectorXd a_next = acceleration_for(u_next);
    v_ = v_ + dt_ * ((1.0 - gamma_) * a_ + gamma_ * a_next);
    a_ = a_next;
    u_ = u_next;
}

void NewmarkIntegrator::step(const Eigen::VectorXd& force) {
    begin_step();
    Eigen::VectorXd u = history_solution_;
    u.noalias() += effective_inverse_ * force;
    commit(u);
}

double NewmarkIntegrator::mechanical_energy() const {
    return 0.5 * v_.dot(mass_ * v_) + 0.5 * u_.dot(stiffness_ * u_);
}

// ---------------------------------------------------------------------------
// Coupled passage

std::size_t passage_sample_count(double span, double wheelbase, double speed, double dt) {
    const double steps = (span + wheelbase) / (speed * dt);
    return static_cast<std::size_t>(std::ceil(steps - 1e-9)) + 1;
}

namespace {

struct AxleState {
    double position = 0.0;
    bool on_bridge = false;
    double road_height = 0.0;
    double road_slope = 0.0;
};

AxleState axle_at(double x, const BeamModel& beam, const RoadProfile& road) {
    AxleState s;
    s.position = x;
    s.on_bridge = x >= 0.0 && x <= beam.span;
    if (s.on_bridge) {
        s.road_height = road.height(x);
        s.road_slope = road.slope(x);
    }
    return s;
}

}  // namespace

PassageRecord simulate_passage(const BeamSystem& system, const VehicleModel& vehicle, const RoadProfile& road,
                               double dt, double sensor_location, const SimulationOptions& options,
                               PassageDiagnostics* diagnostics) {
    vehicle.validate();
    const BeamModel& beam = system.beam;
    if (!(dt > 0.0)) {
        throw DomainError("simulate_passage: dt must be positive");
    }
    if (!(sensor_location > 0.0 && sensor_location < beam.span)) {
        throw DomainError("simulate_passage: sensor must lie strictly inside the span");
    }
    if (beam.span / (vehicle.speed * dt) < 10.0) {
        throw DomainError("simulate_passage: fewer than 10 time steps on the bridge at this speed");
    }

    const std::size_t n_samples = passage_sample_count(beam.span, vehicle.wheelbase(), vehicle.speed, dt);
    const auto [w_front, w_rear] = vehicle.static_axle_loads();
    const std::array<double, 2> static_load{w_front, w_rear};
    const std::array<double, 2> kt{vehicle.tire_stiffness_front, vehicle.tire_stiffness_rear};
    const std::array<double, 2> ct{options.tire_damping ? vehicle.tire_damping_front : 0.0,
                                   options.tire_damping ? vehicle.tire_damping_rear : 0.0};

    NewmarkIntegrator bridge(system.mass, system.damping, system.stiffness, dt, options.gamma, options.beta);
    NewmarkIntegrator car(vehicle.mass_matrix(), vehicle.damping_matrix(options.tire_damping),
                          vehicle.stiffness_matrix(), dt, options.gamma, options.beta);
    // Vehicle coordinates are measured from static equilibrium; bridge starts unloaded at rest.
    car.initialize(Eigen::Vector4d::Zero(), Eigen::Vector4d::Zero(), Eigen::Vector4d::Zero());

    const auto sensor_weights = system.interpolation(sensor_location);

    PassageRecord rec;
    rec.dt = dt;
    rec.sensor_location = sensor_location;
    rec.crack = system.crack;
    rec.vehicle = vehicle;
    rec.road_seed = road.seed;
    rec.road_class = to_string(road.road_class);
    rec.accel.reserve(n_samples);

    auto sensor_value = [&](const Eigen::VectorXd& a) {
        double s = 0.0;
        for (const auto& [dof, w] : sensor_weights) s += w * a(dof);
        return s;
    };

    // t = 0: front axle at the left support, bridge unloaded at rest.
    std::array<double, 2> dynamic_force{0.0, 0.0};
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(system.n_free());
    bridge.initialize(zero, zero, zero);
    rec.accel.push_back(sensor_value(bridge.acceleration()));
    if (diagnostics) {
        diagnostics->contact_front.assign(1, w_front);
        diagnostics->contact_rear.assign(1, w_rear);
        diagnostics->midspan_deflection.assign(1, 0.0);
        diagnostics->max_iterations_used = 0;
    }

    const double wheelbase = vehicle.wheelbase();
    std::vector<std::pair<int, double>> loads;
    loads.reserve(8);

    for (std::size_t k = 1; k < n_samples; ++k) {
        const double t = static_cast<double>(k) * dt;
        const std::array<AxleState, 2> axles{axle_at(vehicle.speed * t, beam, road),
                                             axle_at(vehicle.speed * t - wheelbase, beam, road)};
        std::array<std::vector<std::pair<int, double>>, 2> w_interp;
        std::array<std::vector<std::pair<int, double>>, 2> slope_interp;
        for (int i = 0; i < 2; ++i) {
            if (axles[i].on_bridge) {
                w_interp[i] = system.interpolation(axles[i].position);
                slope_interp[i] = system.interpolation(axles[i].position, true);
            }
        }

        bridge.begin_step();
        car.begin_step();

        std::array<double, 2> force = dynamic_force;
        Eigen::VectorXd u_bridge;
        Eigen::VectorXd z_car;
        int iter = 0;
        double residual = 0.0;
        for (;;) {
            ++iter;
            loads.clear();
            for (int i = 0; i < 2; ++i) {
                if (!axles[i].on_bridge) continue;
                // Upward force on the bridge: dynamic tire force minus static axle load.
                const double p = force[i] - static_load[i];
                for (const auto& [dof, w] : w_interp[i]) loads.emplace_back(dof, w * p);
            }
            u_bridge = bridge.trial(loads);
            const Eigen::VectorXd v_bridge = bridge.velocity_for(u_bridge);

            std::array<double, 2> ub{0.0, 0.0};
            std::array<double, 2> ub_rate{0.0, 0.0};
            for (int i = 0; i < 2; ++i) {
                if (!axles[i].on_bridge) continue;
                double disp = 0.0, vel = 0.0, slope = 0.0;
                for (const auto& [dof, w] : w_interp[i]) {
                    disp += w * u_bridge(dof);
                    vel += w * v_bridge(dof);
                }
                for (const auto& [dof, w] : slope_interp[i]) slope += w * u_bridge(dof);
                ub[i] = disp + axles[i].road_height;
                ub_rate[i] = vel + vehicle.speed * (slope + axles[i].road_slope);
            }

            std::vector<std::pair<int, double>> car_loads{{2, kt[0] * ub[0] + ct[0] * ub_rate[0]},
                                                          {3, kt[1] * ub[1] + ct[1] * ub_rate[1]}};
            z_car = car.trial(car_loads);
            const Eigen::VectorXd z_rate = car.velocity_for(z_car);

            std::array<double, 2> updated{};
            for (int i = 0; i < 2; ++i) {
                updated[i] = kt[i] * (z_car(2 + i) - ub[i]) + ct[i] * (z_rate(2 + i) - ub_rate[i]);
            }
            residual = 0.0;
            for (int i = 0; i < 2; ++i) {
                const double scale = std::max(std::abs(static_load[i] - updated[i]), static_load[i]);
                residual = std::max(residual, std::abs(updated[i] - force[i]) / scale);
            }
            force = updated;
            if (residual <= options.contact_tolerance) {
                break;
            }
            if (iter >= options.max_iterations) {
                std::ostringstream msg;
                msg << "simulate_passage: contact iteration did not converge at t = " << t << " s (residual "
                    << residual << " after " << iter << " iterations)";
                throw ConvergenceError(msg.str(), residual, iter);
            }
        }
        // Final bridge solve with the converged forces.
        loads.clear();
        for (int i = 0; i < 2; ++i) {
            if (!axles[i].on_bridge) continue;
            const double p = force[i] - static_load[i];
            for (const auto& [dof, w] : w_interp[i]) loads.emplace_back(dof, w * p);
        }
        u_bridge = bridge.trial(loads);
        bridge.commit(u_bridge);
        car.commit(z_car);
        dynamic_force = force;

        rec.accel.push_back(sensor_value(bridge.acceleration()));
        if (diagnostics) {
            diagnostics->contact_front.push_back(static_load[0] - force[0]);
            diagnostics->contact_rear.push_back(static_load[1] - force[1]);
            diagnostics->midspan_deflection.push_back(system.interpolate(bridge.displacement(), 0.5 * beam.span));
            diagnostics->max_iterations_used = std::max(diagnostics->max_iterations_used, iter);
        }
    }
    return rec;
}

}  // namespace sehs::vbi
