#pragma once

// Four-phase experiment driver: passage datasets and harvested energy,
// time-frequency images, per-design detectors, surrogate-based bi-objective
// search, and the result bundle. Every phase reads and writes a run directory.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sehs/bridge.hpp"
#include "sehs/cvae.hpp"
#include "sehs/opt.hpp"
#include "sehs/peh.hpp"
#include "sehs/tf.hpp"

namespace sehs::pipeline {

enum class ObjectiveVariant { Energy, EnergyPerArea };

std::string to_string(ObjectiveVariant v);
ObjectiveVariant objective_from_string(const std::string& name);

struct ScenarioConfig {
    std::string damage = "DMN1";    // HN, DMN1, DMN2, DQN1 or custom
    double crack_location = 12.5;   // custom damage only [m]
    double crack_severity = 0.1;    // custom damage only
    std::string road = "A";         // A, B, NR
    std::string sensor = "mid";     // mid, quarter or custom
    double sensor_location = 12.5;  // custom sensor only [m]
    std::vector<std::string> extra_damage_states;  // scored for DI distributions only
    double dt = 0.001;              // [s]
    int beam_elements = 100;
    vbi::VehicleRanges vehicles;

    double sensor_position(const vbi::BeamModel& beam) const;
    std::optional<vbi::CrackSpec> crack_for_state(const std::string& state, const vbi::BeamModel& beam) const;
};

struct DatasetConfig {
    int healthy = 120;               // train + validation passages
    double train_fraction = 0.8;
    int healthy_test = 30;           // extra held-out healthy passages
    int damaged_test = 30;           // per damage state
    double max_quarantine_fraction = 0.01;
    bool store_voltage_traces = true;

    int n_train() const;
    int n_validation() const { return healthy - n_train(); }
};

struct DesignSpaceConfig {
    std::vector<double> energy_lengths;   // E(.) grid [m]
    std::vector<double> sensing_lengths;  // S(.) grid [m], each must also be an energy length
    std::vector<double> aspect_ratios{1.0};  // crossed with both length grids
    bool optimize_aspect_ratio = false;   // design vector (L) or (L, R)
    double length_lo = 0.15, length_hi = 0.5;
    double ratio_lo = 0.1, ratio_hi = 1.0;
    double tip_mass = 0.0;
    double total_thickness = peh::kDefaultThickness;
    std::string load_policy = "optimal";  // optimal: per design at its first mode; fixed: load_resistance
    double load_resistance = 1e6;
    peh::PehMesh mesh;

    std::vector<peh::PehDesign> designs(const std::vector<double>& lengths) const;
};

struct DetectorConfig {
    cvae::CvaeArch arch;
    cvae::TrainConfig train;
    int repetitions = 5;
    double percentile = 90.0;
    bool acceleration_baseline = true;
};

struct OptimizerConfig {
    opt::KrigingOptions kriging;
    opt::Nsga2Options nsga;
    ObjectiveVariant objective = ObjectiveVariant::Energy;
    std::string energy_source = "healthy";  // healthy or all passages
    int curve_points = 141;                 // per dimension of the exported surrogate curves
};

struct SeedConfig {
    std::uint64_t vehicles = 11;
    std::uint64_t roads = 23;
    std::uint64_t detector = 37;
    std::uint64_t optimizer = 41;
};

/// Power and duration terms of one sensing configuration.
struct PowerBudget {
    std::string name;
    double p_sensing_uw = 0.0;  // negative for a net-harvesting sensor
    double p_sample_uw = 0.0;
    double p_sleep_uw = 0.0;
    double t_sample_s = 0.0;
    double t_sleep_s = 0.0;

    void validate() const;
};

/// (P_sensing + P_sample) t_sample + P_sleep t_sleep [J].
double energy_consumption(const PowerBudget& budget);

/// The four sensing configurations of the lab comparison with the given sleep time.
std::vector<PowerBudget> reference_power_budgets(double t_sleep_s);

struct ExperimentConfig {
    std::string name = "experiment";
    ScenarioConfig scenario;
    DatasetConfig dataset;
    DesignSpaceConfig design;
    tf::WsstConfig wsst;
    tf::ImageOptions image;
    DetectorConfig detector;
    OptimizerConfig optimizer;
    SeedConfig seeds;
    std::vector<PowerBudget> power_budgets;
    int threads = 1;  // phase 1-2 worker count; 1 keeps everything single-threaded

    std::string to_json() const;
    static ExperimentConfig from_json(const std::string& text);  // missing keys keep defaults
    static ExperimentConfig load(const std::string& path);
    void save(const std::string& path) const;
    void validate() const;

    /// "desk" or "paper", optionally suffixed with a scenario:
    /// e.g. "desk", "paper", "desk-quarter-dqn1", "desk-nr-detection".
    static ExperimentConfig preset(const std::string& name);
    static std::vector<std::string> preset_names();
};

/// Evenly spaced inclusive grid with `count` points.
std::vector<double> linspace(double lo, double hi, int count);

/// Deterministic per-job seed from a base seed, a stream tag and an index.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index);

// ---------------------------------------------------------------------------
// Phase results

struct PhaseStatus {
    bool partial = false;
    std::vector<std::string> warnings;
};

struct Phase1Result {
    PhaseStatus status;
    int passages = 0;
    int quarantined = 0;
    int designs = 0;
};

struct Phase2Result {
    PhaseStatus status;
    int images = 0;
    int degenerate = 0;
};

struct Phase3Result {
    PhaseStatus status;
    int models = 0;
    std::vector<std::string> failed_designs;
};

struct SensingRow {
    std::string design_id;
    double length = 0.0;
    double aspect_ratio = 0.0;
    double mean = 0.0;
    double stddev = 0.0;
    std::vector<double> per_seed;
};

struct Phase4Result {
    PhaseStatus status;
    opt::ParetoSet pareto;
    double energy_loo_rmse = 0.0;
    double sensing_loo_rmse = 0.0;
};

struct ReportResult {
    PhaseStatus status;
    std::vector<std::string> files;
    std::vector<std::string> gaps;
};

/// Simulates every passage and every design's voltage response, writes
/// traces, per-passage energies and the E table. The config is stored in the run directory.
Phase1Result run_phase1(const ExperimentConfig& config, const std::string& run_dir);

/// WSST images for each sensing design's voltage traces and for the acceleration baseline.
Phase2Result run_phase2(const std::string& run_dir);

/// Trains repetitions x sensing designs detectors (plus the baseline) and calibrates thresholds.
/// A non-empty `detector_override` replaces the stored detector section for this phase.
Phase3Result run_phase3_train(const std::string& run_dir, const std::optional<DetectorConfig>& detector_override = {});

/// Scores the test images with every trained detector and writes the S table.
std::vector<SensingRow> run_phase3_evaluate(const std::string& run_dir);

/// Fits the surrogates, runs the bi-objective search and exports the Pareto set and curves.
Phase4Result run_phase4(const std::string& run_dir, const std::optional<OptimizerConfig>& optimizer_override = {});

/// Collects the result bundle; missing artifacts are listed as gaps and flag the result partial.
ReportResult report(const std::string& run_dir);

/// Verifies a phase manifest's file hashes; returns the mismatching or missing paths.
std::vector<std::string> verify_manifest(const std::string& run_dir, const std::string& phase);

/// Loaded E and S tables keyed by design id.
struct DesignTables {
    struct Row {
        std::string design_id;
        double length = 0.0;
        double aspect_ratio = 0.0;
        double energy = 0.0;   // objective-source mean energy [J]
        bool has_sensing = false;
        double sensing = 0.0;
    };
    std::vector<Row> rows;
};

DesignTables load_design_tables(const std::string& run_dir, const std::string& energy_source);

/// Phase 4 on in-memory tables (used by run_phase4 and by synthetic-table tests).
Phase4Result optimize_tables(const DesignTables& tables, const OptimizerConfig& optimizer,
                             const DesignSpaceConfig& design, const std::string& out_dir = "");

}  // namespace sehs::pipeline
