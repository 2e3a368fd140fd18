// sehs: command-line driver for simulation, dataset generation, detector
// training and evaluation, design optimization and reporting.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 partial results.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sehs/bridge.hpp"
#include "sehs/errors.hpp"
#include "sehs/io.hpp"
#include "sehs/peh.hpp"
#include "sehs/pipeline.hpp"
#include "sehs/tf.hpp"

using namespace sehs;
namespace pl = sehs::pipeline;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;
constexpr int kPartial = 4;

int finish(const pl::PhaseStatus& status) {
    for (const auto& w : status.warnings) std::cerr << "warning: " << w << "\n";
    return status.partial ? kPartial : kOk;
}

pl::ExperimentConfig load_config(const std::string& file, const std::string& preset) {
    if (!file.empty() && !preset.empty()) throw ConfigError("give either --config or --preset, not both");
    if (!file.empty()) return pl::ExperimentConfig::load(file);
    if (!preset.empty()) return pl::ExperimentConfig::preset(preset);
    throw ConfigError("a --config file or a --preset name is required");
}

std::string path_in(const std::string& dir, const std::string& name) { return dir + "/" + name; }

struct SimulateArgs {
    std::string out;
    std::string accel;
    std::string damage = "HN";
    std::string road = "A";
    std::string sensor = "mid";
    std::uint64_t road_seed = 1;
    double dt = 0.001;
    double body_mass = 0.0;
    double speed_kmh = 0.0;
    double length = 0.34;
    double ratio = 1.0;
    double tip_mass = 0.0;
    double thickness = peh::kDefaultThickness;
    std::string load = "optimal";
    bool png = false;
    bool frf = false;
    double frf_max_hz = 30.0;
    int frf_points = 601;
};

int run_simulate(const SimulateArgs& a) {
    io::ensure_directory(a.out);
    vbi::PassageRecord passage;
    if (!a.accel.empty()) {
        passage = io::read_passage(a.accel);
    } else {
        const vbi::BeamModel beam = vbi::BeamModel::reference();
        const auto crack = vbi::crack_for(vbi::damage_state_from_string(a.damage), beam);
        const vbi::BeamSystem system = vbi::assemble_beam(beam, crack);
        double sensor = 0.0;
        if (a.sensor == "mid") {
            sensor = beam.span / 2.0;
        } else if (a.sensor == "quarter") {
            sensor = beam.span / 4.0;
        } else {
            try {
                sensor = std::stod(a.sensor);
            } catch (const std::exception&) {
                throw ConfigError("--sensor must be mid, quarter or a position in metres");
            }
        }
        vbi::VehicleModel vehicle = vbi::VehicleModel::nominal();
        if (a.body_mass > 0.0) vehicle.body_mass = a.body_mass;
        if (a.speed_kmh > 0.0) vehicle.speed = a.speed_kmh / 3.6;
        const auto road = vbi::generate_road_profile(vbi::road_class_from_string(a.road), beam.span, a.road_seed);
        passage = vbi::simulate_passage(system, vehicle, road, a.dt, sensor);
        passage.id = "passage";
        passage.state_label = a.damage;
        passage.road_seed = a.road_seed;
        passage.road_class = a.road;
        io::write_passage(path_in(a.out, "passage.csv"), passage);
    }

    peh::PehDesign design;
    design.length = a.length;
    design.aspect_ratio = a.ratio;
    design.tip_mass = a.tip_mass;
    design.total_thickness = a.thickness;
    design.validate();
    peh::ReducedPeh reduced = peh::build_reduced(design);
    double rl = 0.0;
    if (a.load == "optimal") {
        rl = peh::select_load_resistance(reduced);
    } else {
        try {
            rl = std::stod(a.load);
        } catch (const std::exception&) {
            throw ConfigError("--load must be 'optimal' or a resistance in ohm");
        }
    }
    reduced = peh::with_load_resistance(reduced, rl);
    auto trace = peh::simulate_voltage(reduced, passage);
    trace.source_id = passage.id;
    io::write_voltage(path_in(a.out, "voltage.csv"), trace);
    const double energy = peh::harvested_energy(trace);

    const auto image = tf::signal_image(trace.volts, trace.dt, {}, {}, passage.id);
    tf::write_tf_image(path_in(a.out, "image.tfi"), image);
    if (a.png) tf::write_png(path_in(a.out, "image.png"), image);
    if (a.frf) {
        std::vector<double> freq, omega;
        for (int i = 0; i < a.frf_points; ++i) {
            const double f = a.frf_max_hz * (i + 1) / a.frf_points;
            freq.push_back(f);
            omega.push_back(2.0 * std::numbers::pi * f);
        }
        io::write_frf(path_in(a.out, "frf.csv"), freq, peh::voltage_frf(reduced, omega));
    }
    std::printf("samples %zu  duration %.3f s  design %s  f1 %.3f Hz  R_l %.4g ohm  energy %.6g uJ\n",
                passage.accel.size(), passage.duration(), design.id().c_str(), reduced.first_frequency_hz(), rl,
                energy * 1e6);
    return kOk;
}

void print_sensing(const std::vector<pl::SensingRow>& rows) {
    std::printf("%-24s %8s %8s %8s\n", "design", "L [m]", "S mean", "S std");
    for (const auto& r : rows) {
        std::printf("%-24s %8.3f %8.3f %8.3f\n", r.design_id.c_str(), r.length, r.mean, r.stddev);
    }
}

void print_pareto(const pl::Phase4Result& r) {
    std::printf("pareto points %zu  (energy LOO-RMSE %.4g, sensing LOO-RMSE %.4g)\n", r.pareto.points.size(),
                r.energy_loo_rmse, r.sensing_loo_rmse);
    const std::size_t n = r.pareto.points.size();
    const std::size_t step = n > 20 ? (n + 19) / 20 : 1;  // at most ~20 rows; full set is in pareto.csv
    for (std::size_t i = 0; i < n; i += step) {
        const auto& p = r.pareto.points[i];
        std::printf("  L %.4f", p.x(0));
        if (p.x.size() > 1) std::printf("  R %.3f", p.x(1));
        std::printf("  E %.6g  S %.3f\n", p.f(0), p.f(1));
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bridge-mounted energy-harvesting sensor design toolkit"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "one passage, its harvester voltage, image and FRF");
    simulate->add_option("--out", sim.out, "output directory")->required();
    simulate->add_option("--accel", sim.accel, "external acceleration CSV (t,accel) instead of a simulated passage");
    simulate->add_option("--damage", sim.damage, "HN, DMN1, DMN2 or DQN1")->capture_default_str();
    simulate->add_option("--road", sim.road, "road class A, B or NR")->capture_default_str();
    simulate->add_option("--sensor", sim.sensor, "mid, quarter or a position [m]")->capture_default_str();
    simulate->add_option("--road-seed", sim.road_seed)->capture_default_str();
    simulate->add_option("--dt", sim.dt, "time step [s]")->capture_default_str();
    simulate->add_option("--body-mass", sim.body_mass, "vehicle body mass [kg] (default nominal)");
    simulate->add_option("--speed", sim.speed_kmh, "vehicle speed [km/h] (default nominal)");
    simulate->add_option("--length", sim.length, "harvester length L [m]")->capture_default_str();
    simulate->add_option("--ratio", sim.ratio, "aspect ratio R = W/L")->capture_default_str();
    simulate->add_option("--tip-mass", sim.tip_mass, "[kg]")->capture_default_str();
    simulate->add_option("--thickness", sim.thickness, "total thickness h [m]")->capture_default_str();
    simulate->add_option("--load", sim.load, "'optimal' or load resistance [ohm]")->capture_default_str();
    simulate->add_flag("--png", sim.png, "also write image.png");
    simulate->add_flag("--frf", sim.frf, "also write frf.csv");
    simulate->add_option("--frf-max", sim.frf_max_hz, "[Hz]")->capture_default_str();
    simulate->add_option("--frf-points", sim.frf_points)->capture_default_str();

    std::string config_file, preset, run_dir;
    int threads = 0;
    auto add_config = [&](CLI::App* sub) {
        sub->add_option("--config", config_file, "experiment config (JSON)");
        sub->add_option("--preset", preset, "named preset, e.g. desk, paper, desk-quarter-dqn1");
        sub->add_option("--threads", threads, "worker count for passages and images (0 keeps the config value)");
    };
    auto* dataset = app.add_subcommand("dataset", "phase 1-2: passages, voltages, energies and images");
    add_config(dataset);
    dataset->add_option("--run", run_dir, "run directory")->required();

    auto* run_all = app.add_subcommand("run", "all phases and the report");
    add_config(run_all);
    run_all->add_option("--run", run_dir, "run directory")->required();

    int epochs = 0, repetitions = 0, batch = 0;
    auto* train = app.add_subcommand("train", "phase 3: train and calibrate detectors");
    train->add_option("--run", run_dir)->required();
    train->add_option("--epochs", epochs, "override the configured epoch count");
    train->add_option("--repetitions", repetitions, "override the configured repetitions");
    train->add_option("--batch-size", batch, "override the configured batch size");

    auto* evaluate = app.add_subcommand("evaluate", "phase 3: score test images and write the S table");
    evaluate->add_option("--run", run_dir)->required();

    std::string objective, energy_source;
    auto* optimize = app.add_subcommand("optimize", "phase 4: surrogates and NSGA-II");
    optimize->add_option("--run", run_dir)->required();
    optimize->add_option("--objective", objective, "energy or energy-per-area");
    optimize->add_option("--energy-source", energy_source, "healthy or all");

    auto* rep = app.add_subcommand("report", "collect the result bundle");
    rep->add_option("--run", run_dir)->required();

    std::string dump_out;
    bool list = false;
    auto* config_cmd = app.add_subcommand("config", "write a preset to a config file or list presets");
    config_cmd->add_option("--preset", preset);
    config_cmd->add_option("--out", dump_out, "destination file (default stdout)");
    config_cmd->add_flag("--list", list, "list preset names");

    pl::PowerBudget budget;
    bool table = false;
    double t_sleep = 300.0;
    std::string budget_out;
    auto* power = app.add_subcommand("power-budget", "energy consumption of a sensing configuration");
    power->add_flag("--table", table, "print the reference configurations");
    power->add_option("--name", budget.name);
    power->add_option("--p-sensing", budget.p_sensing_uw, "[uW], negative for a harvesting sensor");
    power->add_option("--p-sample", budget.p_sample_uw, "[uW]");
    power->add_option("--p-sleep", budget.p_sleep_uw, "[uW]");
    power->add_option("--t-sample", budget.t_sample_s, "[s]");
    power->add_option("--t-sleep", t_sleep, "[s]; sleep time (custom budget) or for the reference table")
        ->capture_default_str();
    power->add_option("--out", budget_out, "CSV output");

    std::vector<double> lrange{0.15, 0.5, 15}, rrange{0.1, 1.0, 10};
    double fm_tip = 0.0, fm_thickness = peh::kDefaultThickness;
    std::string fm_out;
    auto* freq = app.add_subcommand("freq-map", "first-mode frequency over a length x aspect-ratio grid");
    freq->add_option("--lengths", lrange, "lo hi count")->expected(3)->capture_default_str();
    freq->add_option("--ratios", rrange, "lo hi count")->expected(3)->capture_default_str();
    freq->add_option("--tip-mass", fm_tip, "[kg]")->capture_default_str();
    freq->add_option("--thickness", fm_thickness, "[m]")->capture_default_str();
    freq->add_option("--out", fm_out, "CSV output (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfigError;
    }

    try {
        if (*simulate) return run_simulate(sim);

        if (*dataset || *run_all) {
            auto cfg = load_config(config_file, preset);
            if (threads > 0) cfg.threads = threads;
            const auto p1 = pl::run_phase1(cfg, run_dir);
            std::printf("phase 1: %d passages (%d quarantined), %d designs\n", p1.passages, p1.quarantined, p1.designs);
            const auto p2 = pl::run_phase2(run_dir);
            std::printf("phase 2: %d images (%d excluded)\n", p2.images, p2.degenerate);
            int rc = std::max(finish(p1.status), finish(p2.status));
            if (*dataset) return rc;
            const auto p3 = pl::run_phase3_train(run_dir);
            std::printf("phase 3: %d detectors trained\n", p3.models);
            rc = std::max(rc, finish(p3.status));
            print_sensing(pl::run_phase3_evaluate(run_dir));
            try {
                const auto p4 = pl::run_phase4(run_dir);
                print_pareto(p4);
                rc = std::max(rc, finish(p4.status));
            } catch (const DomainError& e) {
                std::cerr << "phase 4 skipped: " << e.what() << "\n";
                rc = kPartial;
            }
            const auto r = pl::report(run_dir);
            for (const auto& g : r.gaps) std::cerr << "gap: " << g << "\n";
            return std::max(rc, finish(r.status));
        }

        if (*train) {
            std::optional<pl::DetectorConfig> over;
            if (epochs > 0 || repetitions > 0 || batch > 0) {
                auto d = pl::ExperimentConfig::load(path_in(run_dir, "config.json")).detector;
                if (epochs > 0) d.train.epochs = epochs;
                if (repetitions > 0) d.repetitions = repetitions;
                if (batch > 0) d.train.batch_size = batch;
                over = d;
            }
            const auto r = pl::run_phase3_train(run_dir, over);
            std::printf("phase 3: %d detectors trained, %zu failed\n", r.models, r.failed_designs.size());
            int rc = finish(r.status);
            return r.failed_designs.empty() ? rc : kPartial;
        }

        if (*evaluate) {
            print_sensing(pl::run_phase3_evaluate(run_dir));
            return kOk;
        }

        if (*optimize) {
            std::optional<pl::OptimizerConfig> over;
            if (!objective.empty() || !energy_source.empty()) {
                auto o = pl::ExperimentConfig::load(path_in(run_dir, "config.json")).optimizer;
                if (!objective.empty()) o.objective = pl::objective_from_string(objective);
                if (!energy_source.empty()) o.energy_source = energy_source;
                over = o;
            }
            const auto r = pl::run_phase4(run_dir, over);
            print_pareto(r);
            return finish(r.status);
        }

        if (*rep) {
            const auto r = pl::report(run_dir);
            for (const auto& f : r.files) std::printf("%s\n", f.c_str());
            for (const auto& g : r.gaps) std::cerr << "gap: " << g << "\n";
            return finish(r.status);
        }

        if (*config_cmd) {
            if (list) {
                for (const auto& n : pl::ExperimentConfig::preset_names()) std::printf("%s\n", n.c_str());
                return kOk;
            }
            const auto cfg = pl::ExperimentConfig::preset(preset.empty() ? "desk" : preset);
            if (dump_out.empty()) {
                std::cout << cfg.to_json() << "\n";
            } else {
                cfg.save(dump_out);
            }
            return kOk;
        }

        if (*power) {
            std::vector<pl::PowerBudget> budgets;
            if (table) {
                budgets = pl::reference_power_budgets(t_sleep);
            } else {
                budget.t_sleep_s = power->count("--t-sleep") ? t_sleep : 0.0;
                if (budget.name.empty()) budget.name = "custom";
                budgets.push_back(budget);
            }
            io::CsvTable t;
            t.header = {"name", "p_sensing_uw", "p_sample_uw", "p_sleep_uw", "t_sample_s", "t_sleep_s", "energy_j"};
            for (const auto& b : budgets) {
                const double e = pl::energy_consumption(b);
                std::printf("%-22s %.3f J\n", b.name.c_str(), e);
                t.rows.push_back({b.name, io::format_number(b.p_sensing_uw), io::format_number(b.p_sample_uw),
                                  io::format_number(b.p_sleep_uw), io::format_number(b.t_sample_s),
                                  io::format_number(b.t_sleep_s), io::format_number(e)});
            }
            if (!budget_out.empty()) io::write_csv(budget_out, t);
            return kOk;
        }

        if (*freq) {
            if (lrange[2] < 1 || rrange[2] < 1) throw ConfigError("grid counts must be >= 1");
            const auto Ls = pl::linspace(lrange[0], lrange[1], static_cast<int>(lrange[2]));
            const auto Rs = pl::linspace(rrange[0], rrange[1], static_cast<int>(rrange[2]));
            peh::PehDesign base;
            base.total_thickness = fm_thickness;
            const auto map = peh::fundamental_frequency_map(Ls, Rs, fm_tip, base);
            io::CsvTable t;
            t.header = {"length", "aspect_ratio", "tip_mass", "f1_hz"};
            for (std::size_t i = 0; i < Ls.size(); ++i) {
                for (std::size_t j = 0; j < Rs.size(); ++j) {
                    t.rows.push_back({io::format_number(Ls[i]), io::format_number(Rs[j]), io::format_number(fm_tip),
                                      io::format_number(map[i][j])});
                }
            }
            if (fm_out.empty()) {
                for (const auto& h : t.header) std::printf("%s%s", h.c_str(), &h == &t.header.back() ? "\n" : ",");
                for (const auto& r : t.rows) {
                    std::printf("%s,%s,%s,%s\n", r[0].c_str(), r[1].c_str(), r[2].c_str(), r[3].c_str());
                }
            } else {
                io::write_csv(fm_out, t);
            }
            return kOk;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const DomainError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kConfigError;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumericalError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumericalError;
    }
    return kOk;
}
