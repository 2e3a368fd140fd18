#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "sehs/errors.hpp"
#include "sehs/io.hpp"
#include "sehs/pipeline.hpp"

namespace sehs::pipeline {

using nlohmann::json;

std::string to_string(ObjectiveVariant v) { return v == ObjectiveVariant::Energy ? "energy" : "energy-per-area"; }

ObjectiveVariant objective_from_string(const std::string& name) {
    if (name == "energy") return ObjectiveVariant::Energy;
    if (name == "energy-per-area") return ObjectiveVariant::EnergyPerArea;
    throw ConfigError("unknown objective variant '" + name + "' (energy, energy-per-area)");
}

std::vector<double> linspace(double lo, double hi, int count) {
    if (count < 1) throw DomainError("linspace: count must be >= 1");
    std::vector<double> v(count);
    for (int i = 0; i < count; ++i) {
        v[i] = count == 1 ? lo : lo + (hi - lo) * i / (count - 1);
        v[i] = std::round(v[i] * 1e10) / 1e10;
    }
    return v;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
    // splitmix64 finalizer over a combined key
    std::uint64_t z = base * 0x9E3779B97F4A7C15ULL + stream * 0xBF58476D1CE4E5B9ULL + index + 1;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------

double ScenarioConfig::sensor_position(const vbi::BeamModel& beam) const {
    if (sensor == "mid") return 0.5 * beam.span;
    if (sensor == "quarter") return 0.25 * beam.span;
    if (sensor == "custom") {
        if (!(sensor_location > 0.0 && sensor_location < beam.span)) {
            throw ConfigError("scenario.sensor_location must lie inside the span");
        }
        return sensor_location;
    }
    throw ConfigError("scenario.sensor must be mid, quarter or custom");
}

std::optional<vbi::CrackSpec> ScenarioConfig::crack_for_state(const std::string& state,
                                                              const vbi::BeamModel& beam) const {
    if (state == "custom") {
        vbi::CrackSpec c{crack_location, crack_severity};
        c.validate(beam);
        return c;
    }
    try {
        return vbi::crack_for(vbi::damage_state_from_string(state), beam);
    } catch (const DomainError& e) {
        throw ConfigError(std::string("scenario: ") + e.what());
    }
}

int DatasetConfig::n_train() const { return static_cast<int>(std::lround(healthy * train_fraction)); }

std::vector<peh::PehDesign> DesignSpaceConfig::designs(const std::vector<double>& lengths) const {
    std::vector<peh::PehDesign> out;
    for (double L : lengths) {
        for (double r : aspect_ratios) {
            peh::PehDesign d;
            d.length = L;
            d.aspect_ratio = r;
            d.tip_mass = tip_mass;
            d.total_thickness = total_thickness;
            d.load_resistance = load_resistance;
            out.push_back(d);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

void PowerBudget::validate() const {
    if (p_sample_uw < 0.0 || p_sleep_uw < 0.0 || t_sample_s < 0.0 || t_sleep_s < 0.0 ||
        !std::isfinite(p_sensing_uw)) {
        throw ConfigError("power budget '" + name + "': powers (except sensing) and times must be non-negative");
    }
}

double energy_consumption(const PowerBudget& b) {
    b.validate();
    return ((b.p_sensing_uw + b.p_sample_uw) * b.t_sample_s + b.p_sleep_uw * b.t_sleep_s) * 1e-6;
}

std::vector<PowerBudget> reference_power_budgets(double t_sleep) {
    if (t_sleep < 0.0) throw ConfigError("reference_power_budgets: t_sleep must be non-negative");
    const std::string tag = "sleep" + std::to_string(static_cast<long>(std::lround(t_sleep)));
    return {{"ARS-A continuous", 33.3e3, 480.0, 6.6, 140.0, 0.0},
            {"PEH continuous", -4.0, 480.0, 6.0, 140.0, 0.0},
            {"ARS-A " + tag, 33.3e3, 480.0, 6.0, 140.0, t_sleep},
            {"PEH " + tag, -4.0, 480.0, 6.0, 140.0, t_sleep}};
}

// ---------------------------------------------------------------------------
// JSON

namespace {

template <typename T>
void read_key(const json& j, const char* key, T& out, const std::string& section) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(section + "." + key + ": " + e.what());
    }
}

void check_keys(const json& j, const std::vector<std::string>& allowed, const std::string& section) {
    if (!j.is_object()) throw ConfigError(section + " must be an object");
    for (const auto& [k, v] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
            throw ConfigError("unknown key '" + section + "." + k + "'");
        }
    }
}

json interval_json(const vbi::Interval& iv) { return json::array({iv.lo, iv.hi}); }

void read_interval(const json& j, const char* key, vbi::Interval& iv, const std::string& section) {
    if (!j.contains(key)) return;
    const json& a = j.at(key);
    if (!a.is_array() || a.size() != 2) throw ConfigError(section + "." + key + " must be [lo, hi]");
    iv.lo = a[0].get<double>();
    iv.hi = a[1].get<double>();
}

std::string norm_name(tf::WaveletNorm n) { return n == tf::WaveletNorm::L2 ? "L2" : "L1"; }

}  // namespace

std::string ExperimentConfig::to_json() const {
    json j;
    j["name"] = name;
    j["threads"] = threads;
    const auto& s = scenario;
    j["scenario"] = {{"damage", s.damage},
                     {"crack_location", s.crack_location},
                     {"crack_severity", s.crack_severity},
                     {"road", s.road},
                     {"sensor", s.sensor},
                     {"sensor_location", s.sensor_location},
                     {"extra_damage_states", s.extra_damage_states},
                     {"dt", s.dt},
                     {"beam_elements", s.beam_elements},
                     {"vehicle_ranges",
                      {{"body_mass", interval_json(s.vehicles.body_mass)},
                       {"speed", interval_json(s.vehicles.speed)},
                       {"wheelbase", interval_json(s.vehicles.wheelbase)},
                       {"front_axle_fraction", interval_json(s.vehicles.front_axle_fraction)}}}};
    j["dataset"] = {{"healthy", dataset.healthy},
                    {"train_fraction", dataset.train_fraction},
                    {"healthy_test", dataset.healthy_test},
                    {"damaged_test", dataset.damaged_test},
                    {"max_quarantine_fraction", dataset.max_quarantine_fraction},
                    {"store_voltage_traces", dataset.store_voltage_traces}};
    const auto& d = design;
    j["design"] = {{"energy_lengths", d.energy_lengths},
                   {"sensing_lengths", d.sensing_lengths},
                   {"aspect_ratios", d.aspect_ratios},
                   {"optimize_aspect_ratio", d.optimize_aspect_ratio},
                   {"length_bounds", {d.length_lo, d.length_hi}},
                   {"ratio_bounds", {d.ratio_lo, d.ratio_hi}},
                   {"tip_mass", d.tip_mass},
                   {"total_thickness", d.total_thickness},
                   {"load_policy", d.load_policy},
                   {"load_resistance", d.load_resistance},
                   {"mesh", {{"n_x", d.mesh.n_x}, {"n_y", d.mesh.n_y}, {"degree", d.mesh.degree}, {"gauss", d.mesh.gauss}}}};
    j["wsst"] = {{"morlet_center", wsst.morlet_center},
                 {"n_scales", wsst.n_scales},
                 {"gamma_threshold", wsst.gamma_threshold},
                 {"freq_bins", wsst.freq_bins},
                 {"band", {wsst.band_lo, wsst.band_hi}},
                 {"min_freq", wsst.min_freq},
                 {"top_factor", wsst.top_factor},
                 {"norm", norm_name(wsst.norm)},
                 {"padding", wsst.padding == tf::Padding::Zero ? "zero" : "symmetric"}};
    j["image"] = {{"height", image.height},
                  {"width", image.width},
                  {"log_gain", image.log_gain},
                  {"global_reference", image.global_reference},
                  {"degenerate_ratio", image.degenerate_ratio}};
    const auto& t = detector.train;
    j["detector"] = {{"arch", json::parse(detector.arch.to_json())},
                     {"epochs", t.epochs},
                     {"batch_size", t.batch_size},
                     {"learning_rate", t.learning_rate},
                     {"adam_beta1", t.adam_beta1},
                     {"adam_beta2", t.adam_beta2},
                     {"adam_eps", t.adam_eps},
                     {"beta_kl", t.beta_kl},
                     {"repetitions", detector.repetitions},
                     {"percentile", detector.percentile},
                     {"acceleration_baseline", detector.acceleration_baseline}};
    const auto& k = optimizer.kriging;
    const auto& n = optimizer.nsga;
    j["optimizer"] = {{"objective", pipeline::to_string(optimizer.objective)},
                      {"energy_source", optimizer.energy_source},
                      {"curve_points", optimizer.curve_points},
                      {"kriging",
                       {{"nugget", k.nugget},
                        {"max_nugget", k.max_nugget},
                        {"n_starts", k.n_starts},
                        {"log10_theta_bounds", {k.log10_theta_lo, k.log10_theta_hi}}}},
                      {"nsga2",
                       {{"population", n.population},
                        {"generations", n.generations},
                        {"eta_crossover", n.eta_crossover},
                        {"eta_mutation", n.eta_mutation},
                        {"crossover_prob", n.crossover_prob},
                        {"mutation_prob", n.mutation_prob},
                        {"dedup_tol", n.dedup_tol}}}};
    j["seeds"] = {{"vehicles", seeds.vehicles},
                  {"roads", seeds.roads},
                  {"detector", seeds.detector},
                  {"optimizer", seeds.optimizer}};
    json pb = json::array();
    for (const auto& b : power_budgets) {
        pb.push_back({{"name", b.name},
                      {"p_sensing_uw", b.p_sensing_uw},
                      {"p_sample_uw", b.p_sample_uw},
                      {"p_sleep_uw", b.p_sleep_uw},
                      {"t_sample_s", b.t_sample_s},
                      {"t_sleep_s", b.t_sleep_s}});
    }
    j["power_budgets"] = pb;
    return j.dump(2) + "\n";
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    check_keys(j, {"name", "threads", "scenario", "dataset", "design", "wsst", "image", "detector", "optimizer",
                   "seeds", "power_budgets"},
               "config");
    ExperimentConfig c;
    read_key(j, "name", c.name, "config");
    read_key(j, "threads", c.threads, "config");

    if (j.contains("scenario")) {
        const json& s = j.at("scenario");
        const std::string sec = "scenario";
        check_keys(s, {"damage", "crack_location", "crack_severity", "road", "sensor", "sensor_location",
                       "extra_damage_states", "dt", "beam_elements", "vehicle_ranges"},
                   sec);
        read_key(s, "damage", c.scenario.damage, sec);
        read_key(s, "crack_location", c.scenario.crack_location, sec);
        read_key(s, "crack_severity", c.scenario.crack_severity, sec);
        read_key(s, "road", c.scenario.road, sec);
        read_key(s, "sensor", c.scenario.sensor, sec);
        read_key(s, "sensor_location", c.scenario.sensor_location, sec);
        read_key(s, "extra_damage_states", c.scenario.extra_damage_states, sec);
        read_key(s, "dt", c.scenario.dt, sec);
        read_key(s, "beam_elements", c.scenario.beam_elements, sec);
        if (s.contains("vehicle_ranges")) {
            const json& v = s.at("vehicle_ranges");
            check_keys(v, {"body_mass", "speed", "wheelbase", "front_axle_fraction"}, "scenario.vehicle_ranges");
            read_interval(v, "body_mass", c.scenario.vehicles.body_mass, "scenario.vehicle_ranges");
            read_interval(v, "speed", c.scenario.vehicles.speed, "scenario.vehicle_ranges");
            read_interval(v, "wheelbase", c.scenario.vehicles.wheelbase, "scenario.vehicle_ranges");
            read_interval(v, "front_axle_fraction", c.scenario.vehicles.front_axle_fraction, "scenario.vehicle_ranges");
        }
    }
    if (j.contains("dataset")) {
        const json& s = j.at("dataset");
        const std::string sec = "dataset";
        check_keys(s, {"healthy", "train_fraction", "healthy_test", "damaged_test", "max_quarantine_fraction",
                       "store_voltage_traces"},
                   sec);
        read_key(s, "healthy", c.dataset.healthy, sec);
        read_key(s, "train_fraction", c.dataset.train_fraction, sec);
        read_key(s, "healthy_test", c.dataset.healthy_test, sec);
        read_key(s, "damaged_test", c.dataset.damaged_test, sec);
        read_key(s, "max_quarantine_fraction", c.dataset.max_quarantine_fraction, sec);
        read_key(s, "store_voltage_traces", c.dataset.store_voltage_traces, sec);
    }
    if (j.contains("design")) {
        const json& s = j.at("design");
        const std::string sec = "design";
        check_keys(s, {"energy_lengths", "sensing_lengths", "aspect_ratios", "optimize_aspect_ratio", "length_bounds",
                       "ratio_bounds", "tip_mass", "total_thickness", "load_policy", "load_resistance", "mesh"},
                   sec);
        auto& d = c.design;
        read_key(s, "energy_lengths", d.energy_lengths, sec);
        read_key(s, "sensing_lengths", d.sensing_lengths, sec);
        read_key(s, "aspect_ratios", d.aspect_ratios, sec);
        read_key(s, "optimize_aspect_ratio", d.optimize_aspect_ratio, sec);
        vbi::Interval lb{d.length_lo, d.length_hi}, rb{d.ratio_lo, d.ratio_hi};
        read_interval(s, "length_bounds", lb, sec);
        read_interval(s, "ratio_bounds", rb, sec);
        d.length_lo = lb.lo;
        d.length_hi = lb.hi;
        d.ratio_lo = rb.lo;
        d.ratio_hi = rb.hi;
        read_key(s, "tip_mass", d.tip_mass, sec);
        read_key(s, "total_thickness", d.total_thickness, sec);
        read_key(s, "load_policy", d.load_policy, sec);
        read_key(s, "load_resistance", d.load_resistance, sec);
        if (s.contains("mesh")) {
            const json& m = s.at("mesh");
            check_keys(m, {"n_x", "n_y", "degree", "gauss"}, "design.mesh");
            read_key(m, "n_x", d.mesh.n_x, "design.mesh");
            read_key(m, "n_y", d.mesh.n_y, "design.mesh");
            read_key(m, "degree", d.mesh.degree, "design.mesh");
            read_key(m, "gauss", d.mesh.gauss, "design.mesh");
        }
    }
    if (j.contains("wsst")) {
        const json& s = j.at("wsst");
        const std::string sec = "wsst";
        check_keys(s, {"morlet_center", "n_scales", "gamma_threshold", "freq_bins", "band", "min_freq", "top_factor",
                       "norm", "padding"},
                   sec);
        read_key(s, "morlet_center", c.wsst.morlet_center, sec);
        read_key(s, "n_scales", c.wsst.n_scales, sec);
        read_key(s, "gamma_threshold", c.wsst.gamma_threshold, sec);
        read_key(s, "freq_bins", c.wsst.freq_bins, sec);
        vbi::Interval band{c.wsst.band_lo, c.wsst.band_hi};
        read_interval(s, "band", band, sec);
        c.wsst.band_lo = band.lo;
        c.wsst.band_hi = band.hi;
        read_key(s, "min_freq", c.wsst.min_freq, sec);
        read_key(s, "top_factor", c.wsst.top_factor, sec);
        std::string norm = norm_name(c.wsst.norm);
        read_key(s, "norm", norm, sec);
        if (norm == "L2") {
            c.wsst.norm = tf::WaveletNorm::L2;
        } else if (norm == "L1") {
            c.wsst.norm = tf::WaveletNorm::L1;
        } else {
            throw ConfigError("wsst.norm must be L2 or L1");
        }
        std::string padding = c.wsst.padding == tf::Padding::Zero ? "zero" : "symmetric";
        read_key(s, "padding", padding, sec);
        if (padding == "zero") {
            c.wsst.padding = tf::Padding::Zero;
        } else if (padding == "symmetric") {
            c.wsst.padding = tf::Padding::Symmetric;
        } else {
            throw ConfigError("wsst.padding must be zero or symmetric");
        }
    }
    c.image.band_lo = c.wsst.band_lo;
    c.image.band_hi = c.wsst.band_hi;
    if (j.contains("image")) {
        const json& s = j.at("image");
        const std::string sec = "image";
        check_keys(s, {"height", "width", "log_gain", "global_reference", "degenerate_ratio"}, sec);
        read_key(s, "height", c.image.height, sec);
        read_key(s, "width", c.image.width, sec);
        read_key(s, "log_gain", c.image.log_gain, sec);
        read_key(s, "global_reference", c.image.global_reference, sec);
        read_key(s, "degenerate_ratio", c.image.degenerate_ratio, sec);
    }
    if (j.contains("detector")) {
        const json& s = j.at("detector");
        const std::string sec = "detector";
        check_keys(s, {"arch", "epochs", "batch_size", "learning_rate", "adam_beta1", "adam_beta2", "adam_eps",
                       "beta_kl", "repetitions", "percentile", "acceleration_baseline"},
                   sec);
        if (s.contains("arch")) c.detector.arch = cvae::CvaeArch::from_json(s.at("arch").dump());
        auto& t = c.detector.train;
        read_key(s, "epochs", t.epochs, sec);
        read_key(s, "batch_size", t.batch_size, sec);
        read_key(s, "learning_rate", t.learning_rate, sec);
        read_key(s, "adam_beta1", t.adam_beta1, sec);
        read_key(s, "adam_beta2", t.adam_beta2, sec);
        read_key(s, "adam_eps", t.adam_eps, sec);
        read_key(s, "beta_kl", t.beta_kl, sec);
        read_key(s, "repetitions", c.detector.repetitions, sec);
        read_key(s, "percentile", c.detector.percentile, sec);
        read_key(s, "acceleration_baseline", c.detector.acceleration_baseline, sec);
    }
    if (j.contains("optimizer")) {
        const json& s = j.at("optimizer");
        const std::string sec = "optimizer";
        check_keys(s, {"objective", "energy_source", "curve_points", "kriging", "nsga2"}, sec);
        std::string objective = pipeline::to_string(c.optimizer.objective);
        read_key(s, "objective", objective, sec);
        c.optimizer.objective = objective_from_string(objective);
        read_key(s, "energy_source", c.optimizer.energy_source, sec);
        read_key(s, "curve_points", c.optimizer.curve_points, sec);
        if (s.contains("kriging")) {
            const json& k = s.at("kriging");
            const std::string ks = "optimizer.kriging";
            check_keys(k, {"nugget", "max_nugget", "n_starts", "log10_theta_bounds"}, ks);
            read_key(k, "nugget", c.optimizer.kriging.nugget, ks);
            read_key(k, "max_nugget", c.optimizer.kriging.max_nugget, ks);
            read_key(k, "n_starts", c.optimizer.kriging.n_starts, ks);
            vbi::Interval tb{c.optimizer.kriging.log10_theta_lo, c.optimizer.kriging.log10_theta_hi};
            read_interval(k, "log10_theta_bounds", tb, ks);
            c.optimizer.kriging.log10_theta_lo = tb.lo;
            c.optimizer.kriging.log10_theta_hi = tb.hi;
        }
        if (s.contains("nsga2")) {
            const json& n = s.at("nsga2");
            const std::string ns = "optimizer.nsga2";
            check_keys(n, {"population", "generations", "eta_crossover", "eta_mutation", "crossover_prob",
                           "mutation_prob", "dedup_tol"},
                       ns);
            auto& o = c.optimizer.nsga;
            read_key(n, "population", o.population, ns);
            read_key(n, "generations", o.generations, ns);
            read_key(n, "eta_crossover", o.eta_crossover, ns);
            read_key(n, "eta_mutation", o.eta_mutation, ns);
            read_key(n, "crossover_prob", o.crossover_prob, ns);
            read_key(n, "mutation_prob", o.mutation_prob, ns);
            read_key(n, "dedup_tol", o.dedup_tol, ns);
        }
    }
    if (j.contains("seeds")) {
        const json& s = j.at("seeds");
        check_keys(s, {"vehicles", "roads", "detector", "optimizer"}, "seeds");
        read_key(s, "vehicles", c.seeds.vehicles, "seeds");
        read_key(s, "roads", c.seeds.roads, "seeds");
        read_key(s, "detector", c.seeds.detector, "seeds");
        read_key(s, "optimizer", c.seeds.optimizer, "seeds");
    }
    if (j.contains("power_budgets")) {
        c.power_budgets.clear();
        for (const json& b : j.at("power_budgets")) {
            check_keys(b, {"name", "p_sensing_uw", "p_sample_uw", "p_sleep_uw", "t_sample_s", "t_sleep_s"},
                       "power_budgets[]");
            PowerBudget p;
            read_key(b, "name", p.name, "power_budgets[]");
            read_key(b, "p_sensing_uw", p.p_sensing_uw, "power_budgets[]");
            read_key(b, "p_sample_uw", p.p_sample_uw, "power_budgets[]");
            read_key(b, "p_sleep_uw", p.p_sleep_uw, "power_budgets[]");
            read_key(b, "t_sample_s", p.t_sample_s, "power_budgets[]");
            read_key(b, "t_sleep_s", p.t_sleep_s, "power_budgets[]");
            c.power_budgets.push_back(p);
        }
    }
    c.detector.train.seed = c.seeds.detector;
    c.optimizer.kriging.seed = c.seeds.optimizer;
    c.optimizer.nsga.seed = c.seeds.optimizer;
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    if (!io::file_exists(path)) throw ConfigError("config file not found: " + path);
    try {
        return from_json(io::read_text(path));
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

void ExperimentConfig::save(const std::string& path) const { io::write_text(path, to_json()); }

void ExperimentConfig::validate() const {
    auto fail = [](const std::string& m) { throw ConfigError(m); };
    const vbi::BeamModel beam = vbi::BeamModel::reference(std::max(1, scenario.beam_elements));
    if (scenario.beam_elements < 10) fail("scenario.beam_elements must be >= 10");
    if (!(scenario.dt > 0.0 && scenario.dt <= 0.01)) fail("scenario.dt must be in (0, 0.01] s");
    try {
        vbi::road_class_from_string(scenario.road);
    } catch (const Error&) {
        fail("scenario.road must be A, B or NR");
    }
    scenario.sensor_position(beam);
    scenario.crack_for_state(scenario.damage, beam);
    for (const auto& s : scenario.extra_damage_states) {
        if (s == "HN") fail("scenario.extra_damage_states may not contain HN");
        scenario.crack_for_state(s, beam);
    }
    for (const vbi::Interval* iv : {&scenario.vehicles.body_mass, &scenario.vehicles.speed,
                                    &scenario.vehicles.wheelbase, &scenario.vehicles.front_axle_fraction}) {
        if (!(iv->hi >= iv->lo && iv->lo > 0.0)) fail("scenario.vehicle_ranges must be positive [lo, hi] pairs");
    }

    if (dataset.healthy < 10) fail("dataset.healthy must be >= 10");
    if (!(dataset.train_fraction > 0.0 && dataset.train_fraction < 1.0)) fail("dataset.train_fraction must be in (0, 1)");
    if (dataset.n_train() < 2 || dataset.n_validation() < 1) fail("dataset: split leaves an empty train or validation set");
    if (dataset.healthy_test < 1 || dataset.damaged_test < 1) fail("dataset: test sets must be non-empty");
    if (scenario.damage == "HN") fail("scenario.damage must be a damaged state (DMN1, DMN2, DQN1 or custom)");
    if (!(dataset.max_quarantine_fraction >= 0.0 && dataset.max_quarantine_fraction < 1.0)) {
        fail("dataset.max_quarantine_fraction must be in [0, 1)");
    }

    const auto& d = design;
    if (d.energy_lengths.empty()) fail("design.energy_lengths must be non-empty");
    if (d.aspect_ratios.empty()) fail("design.aspect_ratios must be non-empty");
    if (!(d.length_lo > 0.0 && d.length_hi > d.length_lo)) fail("design.length_bounds must be 0 < lo < hi");
    if (!(d.ratio_lo > 0.0 && d.ratio_hi >= d.ratio_lo)) fail("design.ratio_bounds must be 0 < lo <= hi");
    auto inside = [](double v, double lo, double hi) { return v >= lo - 1e-9 && v <= hi + 1e-9; };
    for (double L : d.energy_lengths) {
        if (!inside(L, d.length_lo, d.length_hi)) fail("design.energy_lengths outside length_bounds");
    }
    for (double L : d.sensing_lengths) {
        if (!inside(L, d.length_lo, d.length_hi)) fail("design.sensing_lengths outside length_bounds");
        const bool found = std::any_of(d.energy_lengths.begin(), d.energy_lengths.end(),
                                       [&](double e) { return std::abs(e - L) < 1e-9; });
        if (!found) fail("design.sensing_lengths must be a subset of design.energy_lengths");
    }
    for (double r : d.aspect_ratios) {
        if (!inside(r, d.ratio_lo, d.ratio_hi)) fail("design.aspect_ratios outside ratio_bounds");
    }
    if (d.optimize_aspect_ratio && d.aspect_ratios.size() < 2) {
        fail("design.optimize_aspect_ratio needs at least two aspect_ratios");
    }
    if (d.load_policy != "optimal" && d.load_policy != "fixed") fail("design.load_policy must be optimal or fixed");
    if (!(d.load_resistance > 0.0)) fail("design.load_resistance must be positive");
    if (d.tip_mass < 0.0) fail("design.tip_mass must be non-negative");
    try {
        d.mesh.validate();
        for (const auto& p : d.designs({d.length_lo, d.length_hi})) p.validate();
        wsst.validate();
        image.validate();
        detector.arch.validate();
    } catch (const Error& e) {
        fail(e.what());
    }
    if (image.band_lo != wsst.band_lo || image.band_hi != wsst.band_hi) fail("image band must equal the wsst band");
    if (image.height != detector.arch.image_size || image.width != detector.arch.image_size) {
        fail("image size must equal detector.arch.image_size");
    }
    const auto& t = detector.train;
    if (t.epochs < 1 || t.batch_size < 1 || !(t.learning_rate > 0.0) || t.beta_kl < 0.0) {
        fail("detector: epochs, batch_size, learning_rate must be positive and beta_kl non-negative");
    }
    if (dataset.n_train() <= t.batch_size) fail("detector.batch_size must be smaller than the training split");
    if (dataset.n_validation() < 20) fail("dataset: calibration needs at least 20 validation passages");
    if (detector.repetitions < 1) fail("detector.repetitions must be >= 1");
    if (!(detector.percentile > 0.0 && detector.percentile < 100.0)) fail("detector.percentile must be in (0, 100)");
    if (optimizer.energy_source != "healthy" && optimizer.energy_source != "all") {
        fail("optimizer.energy_source must be healthy or all");
    }
    if (optimizer.curve_points < 2) fail("optimizer.curve_points must be >= 2");
    if (optimizer.nsga.population < 8 || optimizer.nsga.population % 2) fail("optimizer.nsga2.population must be even and >= 8");
    if (optimizer.nsga.generations < 1) fail("optimizer.nsga2.generations must be >= 1");
    if (optimizer.kriging.n_starts < 1 || !(optimizer.kriging.nugget > 0.0)) fail("optimizer.kriging: bad settings");
    for (const auto& b : power_budgets) b.validate();
    if (threads < 1) fail("threads must be >= 1");
}

// ---------------------------------------------------------------------------
// Presets

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(item);
    return out;
}

}  // namespace

ExperimentConfig ExperimentConfig::preset(const std::string& name) {
    const auto parts = split(name, '-');
    if (parts.empty() || (parts[0] != "desk" && parts[0] != "paper")) {
        throw ConfigError("unknown preset '" + name + "'; scale must be desk or paper");
    }
    ExperimentConfig c;
    c.name = name;
    const bool desk = parts[0] == "desk";
    c.design.energy_lengths = linspace(0.15, 0.5, 36);
    c.power_budgets = reference_power_budgets(300.0);
    for (const auto& b : reference_power_budgets(600.0)) {
        if (b.t_sleep_s > 0.0) c.power_budgets.push_back(b);
    }
    // Detector and image settings shared by both scales (see README, "Detector settings").
    c.image.log_gain = 1.0;
    c.detector.train.beta_kl = 1e-3;
    if (desk) {
        c.dataset.healthy = 120;
        c.dataset.healthy_test = 30;
        c.dataset.damaged_test = 30;
        c.design.sensing_lengths = {0.15, 0.17, 0.2, 0.25, 0.3, 0.34, 0.4, 0.5};
        c.detector.train.epochs = 60;
        c.detector.train.batch_size = 4;
    } else {
        c.dataset.healthy = 500;
        c.dataset.healthy_test = 100;
        c.dataset.damaged_test = 100;
        c.design.sensing_lengths = c.design.energy_lengths;
        c.detector.train.epochs = 100;
        c.detector.train.batch_size = 32;
    }
    for (std::size_t i = 1; i < parts.size(); ++i) {
        const std::string& m = parts[i];
        if (m == "dmn1" || m == "dmn2" || m == "dqn1") {
            std::string up = m;
            std::transform(up.begin(), up.end(), up.begin(), ::toupper);
            c.scenario.damage = up;
        } else if (m == "a" || m == "b" || m == "nr") {
            std::string up = m;
            std::transform(up.begin(), up.end(), up.begin(), ::toupper);
            c.scenario.road = up;
        } else if (m == "mid" || m == "quarter") {
            c.scenario.sensor = m;
        } else if (m == "area") {
            c.optimizer.objective = ObjectiveVariant::EnergyPerArea;
        } else if (m == "lr") {
            c.design.optimize_aspect_ratio = true;
            c.design.aspect_ratios = {0.1, 0.4, 0.7, 1.0};
            c.design.energy_lengths = linspace(0.15, 0.5, 15);
            c.design.sensing_lengths = desk ? std::vector<double>{0.15, 0.25, 0.35, 0.5} : c.design.energy_lengths;
        } else if (m == "detection") {
            // Single-design detector study with a second severity for DI ordering.
            c.design.energy_lengths = {0.34};
            c.design.sensing_lengths = {0.34};
            c.scenario.extra_damage_states = {"DMN2"};
            c.detector.acceleration_baseline = false;
        } else {
            throw ConfigError("unknown preset modifier '" + m + "' in '" + name + "'");
        }
    }
    if (c.scenario.sensor == "quarter" && c.scenario.damage == "DMN1" && name.find("dmn1") == std::string::npos) {
        c.scenario.damage = "DQN1";
    }
    c.detector.train.seed = c.seeds.detector;
    c.optimizer.kriging.seed = c.seeds.optimizer;
    c.optimizer.nsga.seed = c.seeds.optimizer;
    c.validate();
    return c;
}

std::vector<std::string> ExperimentConfig::preset_names() {
    return {"desk",
            "desk-nr-detection",
            "desk-quarter-dqn1",
            "desk-dmn2",
            "desk-b",
            "desk-nr",
            "desk-area",
            "desk-quarter-dqn1-area",
            "desk-lr",
            "paper",
            "paper-dmn2",
            "paper-b",
            "paper-nr",
            "paper-area",
            "paper-quarter-dqn1",
            "paper-quarter-dqn1-area",
            "paper-lr"};
}

}  // namespace sehs::pipeline
