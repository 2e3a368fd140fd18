#include "sehs/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

#include "json.hpp"
#include "sehs/errors.hpp"
#include "sehs/io.hpp"

namespace sehs::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kAccelTarget = "accel";

std::string join(const std::string& a, const std::string& b) { return (fs::path(a) / b).string(); }

json load_json(const std::string& path) {
    if (!io::file_exists(path)) throw ConfigError("missing artifact " + path);
    try {
        return json::parse(io::read_text(path));
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

void write_json(const std::string& path, const json& j) { io::write_text(path, j.dump(2) + "\n"); }

/// Adds a run-relative file and its hash to a manifest.
void record_file(json& manifest, const std::string& run_dir, const std::string& rel) {
    manifest["files"][rel] = io::sha256_file(join(run_dir, rel));
}

ExperimentConfig load_run_config(const std::string& run_dir) {
    return ExperimentConfig::load(join(run_dir, "config.json"));
}

void require_clean(const std::string& run_dir, const std::string& phase) {
    const auto bad = verify_manifest(run_dir, phase);
    if (!bad.empty()) {
        std::string list;
        for (const auto& b : bad) list += " " + b;
        throw ConfigError(phase + " artifacts failed hash verification:" + list);
    }
}

/// Runs fn(i) for i in [0, n) on `threads` workers. Exceptions stay per job.
template <typename Fn>
std::vector<std::string> parallel_for(std::size_t n, int threads, Fn fn) {
    std::vector<std::string> errors(n);
    auto run = [&](std::size_t i) {
        try {
            fn(i);
        } catch (const std::exception& e) {
            errors[i] = e.what();
            if (errors[i].empty()) errors[i] = "unknown error";
        }
    };
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) run(i);
        return errors;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) run(i);
        });
    }
    for (auto& th : pool) th.join();
    return errors;
}

struct PlannedPassage {
    std::string id;
    std::string state;
    std::string split;
    vbi::VehicleModel vehicle;
    std::uint64_t road_seed = 0;
};

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), ::tolower);
    return s;
}

std::string indexed(const std::string& prefix, int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d", i);
    return prefix + buf;
}

std::vector<std::string> damaged_states(const ExperimentConfig& c) {
    std::vector<std::string> s{c.scenario.damage};
    for (const auto& e : c.scenario.extra_damage_states) {
        if (std::find(s.begin(), s.end(), e) == s.end()) s.push_back(e);
    }
    return s;
}

std::vector<PlannedPassage> plan_passages(const ExperimentConfig& c) {
    std::vector<PlannedPassage> out;
    auto add = [&](int n, std::uint64_t stream, const std::string& state, const std::string& prefix,
                   auto split_of) {
        const auto vehicles = vbi::sample_vehicle_params(n, c.scenario.vehicles, derive_seed(c.seeds.vehicles, stream, 0));
        for (int i = 0; i < n; ++i) {
            out.push_back({indexed(prefix, i), state, split_of(i), vehicles[i], derive_seed(c.seeds.roads, stream, i)});
        }
    };
    const int n_train = c.dataset.n_train();
    add(c.dataset.healthy, 0, "HN", "hn_", [&](int i) { return i < n_train ? "train" : "validation"; });
    add(c.dataset.healthy_test, 1, "HN", "hn_test_", [](int) { return "test"; });
    std::uint64_t stream = 2;
    for (const auto& s : damaged_states(c)) {
        add(c.dataset.damaged_test, stream++, s, lower(s) + "_", [](int) { return "test"; });
    }
    return out;
}

bool in_list(double v, const std::vector<double>& list) {
    return std::any_of(list.begin(), list.end(), [&](double x) { return std::abs(x - v) < 1e-9; });
}

double mean_of(const std::vector<double>& v) {
    return v.empty() ? std::nan("") : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::string num(double v) { return io::format_number(v); }

}  // namespace

// ---------------------------------------------------------------------------
// Phase 1

Phase1Result run_phase1(const ExperimentConfig& config, const std::string& run_dir) {
    config.validate();
    io::ensure_directory(run_dir);
    config.save(join(run_dir, "config.json"));
    Phase1Result result;

    const vbi::BeamModel beam = vbi::BeamModel::reference(config.scenario.beam_elements);
    const double sensor = config.scenario.sensor_position(beam);
    const vbi::RoadClass road = vbi::road_class_from_string(config.scenario.road);
    std::map<std::string, vbi::BeamSystem> systems;
    systems.emplace("HN", vbi::assemble_beam(beam));
    for (const auto& s : damaged_states(config)) {
        systems.emplace(s, vbi::assemble_beam(beam, config.scenario.crack_for_state(s, beam)));
    }

    const auto plan = plan_passages(config);
    std::vector<vbi::PassageRecord> records(plan.size());
    auto errors = parallel_for(plan.size(), config.threads, [&](std::size_t i) {
        const auto& p = plan[i];
        const auto profile = vbi::generate_road_profile(road, beam.span, p.road_seed);
        records[i] = vbi::simulate_passage(systems.at(p.state), p.vehicle, profile, config.scenario.dt, sensor);
        records[i].id = p.id;
        records[i].state_label = p.state;
        records[i].road_seed = p.road_seed;
        records[i].road_class = vbi::to_string(road);
    });

    json manifest;
    manifest["phase"] = 1;
    manifest["config_sha256"] = io::sha256_file(join(run_dir, "config.json"));
    manifest["files"] = json::object();
    manifest["quarantine"] = json::array();
    manifest["passages"] = json::array();
    std::vector<bool> ok(plan.size(), true);
    for (std::size_t i = 0; i < plan.size(); ++i) {
        if (!errors[i].empty()) {
            ok[i] = false;
            manifest["quarantine"].push_back({{"passage", plan[i].id}, {"design", ""}, {"error", errors[i]}});
        }
    }
    auto check_quarantine = [&](std::size_t bad, std::size_t total, const std::string& what) {
        if (total > 0 && static_cast<double>(bad) > config.dataset.max_quarantine_fraction * static_cast<double>(total)) {
            write_json(join(run_dir, "phase1/manifest.json"), manifest);
            throw NumericalError("phase 1: " + std::to_string(bad) + " of " + std::to_string(total) + " " + what +
                                 " quarantined (limit " + num(100.0 * config.dataset.max_quarantine_fraction) +
                                 "%); see phase1/manifest.json");
        }
    };
    const auto n_bad = static_cast<std::size_t>(std::count(ok.begin(), ok.end(), false));
    check_quarantine(n_bad, plan.size(), "passages");

    for (std::size_t i = 0; i < plan.size(); ++i) {
        if (!ok[i]) continue;
        const std::string rel = "phase1/passages/" + plan[i].id + ".csv";
        io::write_passage(join(run_dir, rel), records[i]);
        record_file(manifest, run_dir, rel);
        record_file(manifest, run_dir, "phase1/passages/" + plan[i].id + ".json");
        manifest["passages"].push_back({{"id", plan[i].id},
                                        {"state", plan[i].state},
                                        {"split", plan[i].split},
                                        {"road_seed", plan[i].road_seed},
                                        {"file", rel}});
    }
    result.passages = static_cast<int>(plan.size() - n_bad);
    result.quarantined = static_cast<int>(n_bad);

    // Voltage response and energy of every design.
    const auto designs = config.design.designs(config.design.energy_lengths);
    io::CsvTable per_passage;
    per_passage.header = {"design_id", "passage_id", "state", "split", "energy_j"};
    io::CsvTable table;
    table.header = {"design_id", "length", "aspect_ratio", "width", "area_m2", "tip_mass", "f1_hz", "n_modes",
                    "load_resistance", "sensing", "energy_healthy_j", "energy_damaged_j", "energy_all_j",
                    "energy_healthy_uj", "energy_damaged_uj", "energy_healthy_uj_per_m2"};
    const auto states = damaged_states(config);
    for (const auto& s : states) table.header.push_back("energy_" + lower(s) + "_j");
    manifest["designs"] = json::array();
    std::size_t pair_total = 0, pair_bad = 0;
    for (const auto& design : designs) {
        peh::ReducedPeh reduced = peh::build_reduced(design, config.design.mesh);
        const double rl = config.design.load_policy == "optimal" ? peh::select_load_resistance(reduced)
                                                                 : config.design.load_resistance;
        reduced = peh::with_load_resistance(reduced, rl);
        const bool sensing = in_list(design.length, config.design.sensing_lengths);
        std::vector<double> energy(plan.size(), std::nan(""));
        std::vector<peh::VoltageTrace> traces(plan.size());
        auto verr = parallel_for(plan.size(), config.threads, [&](std::size_t i) {
            if (!ok[i]) return;
            traces[i] = peh::simulate_voltage(reduced, records[i]);
            energy[i] = peh::harvested_energy(traces[i]);
        });
        std::map<std::string, std::vector<double>> by_state;
        std::vector<double> all;
        for (std::size_t i = 0; i < plan.size(); ++i) {
            if (!ok[i]) continue;
            ++pair_total;
            if (!verr[i].empty()) {
                ++pair_bad;
                manifest["quarantine"].push_back({{"passage", plan[i].id}, {"design", design.id()}, {"error", verr[i]}});
                continue;
            }
            by_state[plan[i].state].push_back(energy[i]);
            if (plan[i].state == "HN" || plan[i].state == config.scenario.damage) all.push_back(energy[i]);
            per_passage.rows.push_back({design.id(), plan[i].id, plan[i].state, plan[i].split, num(energy[i])});
            if (sensing && config.dataset.store_voltage_traces) {
                traces[i].source_id = plan[i].id;
                const std::string rel = "phase1/voltages/" + design.id() + "/" + plan[i].id + ".csv";
                io::write_voltage(join(run_dir, rel), traces[i]);
                record_file(manifest, run_dir, rel);
            }
        }
        const double area = design.length * design.width();
        const double eh = mean_of(by_state["HN"]);
        std::vector<std::string> row{design.id(),
                                     num(design.length),
                                     num(design.aspect_ratio),
                                     num(design.width()),
                                     num(area),
                                     num(design.tip_mass),
                                     num(reduced.first_frequency_hz()),
                                     std::to_string(reduced.n_modes()),
                                     num(rl),
                                     sensing ? "1" : "0",
                                     num(eh),
                                     num(mean_of(by_state[config.scenario.damage])),
                                     num(mean_of(all)),
                                     num(eh * 1e6),
                                     num(mean_of(by_state[config.scenario.damage]) * 1e6),
                                     num(eh * 1e6 / area)};
        for (const auto& s : states) row.push_back(num(mean_of(by_state[s])));
        table.rows.push_back(row);
        manifest["designs"].push_back({{"id", design.id()},
                                       {"length", design.length},
                                       {"aspect_ratio", design.aspect_ratio},
                                       {"sensing", sensing},
                                       {"f1_hz", reduced.first_frequency_hz()},
                                       {"n_modes", reduced.n_modes()},
                                       {"load_resistance", rl}});
    }
    check_quarantine(pair_bad, pair_total, "voltage simulations");
    io::write_csv(join(run_dir, "phase1/energy_per_passage.csv"), per_passage);
    io::write_csv(join(run_dir, "phase1/energy.csv"), table);
    record_file(manifest, run_dir, "phase1/energy_per_passage.csv");
    record_file(manifest, run_dir, "phase1/energy.csv");
    write_json(join(run_dir, "phase1/manifest.json"), manifest);
    result.designs = static_cast<int>(designs.size());
    if (result.quarantined > 0 || pair_bad > 0) {
        result.status.warnings.push_back(std::to_string(result.quarantined + pair_bad) + " jobs quarantined");
    }
    return result;
}

// ---------------------------------------------------------------------------
// Phase 2

Phase2Result run_phase2(const std::string& run_dir) {
    const ExperimentConfig config = load_run_config(run_dir);
    require_clean(run_dir, "phase1");
    const json m1 = load_json(join(run_dir, "phase1/manifest.json"));
    Phase2Result result;

    struct Job {
        std::string target, passage, state, split, source;
        bool voltage;
    };
    std::vector<Job> jobs;
    std::vector<peh::ReducedPeh> rebuild;  // only used when traces were not stored
    std::map<std::string, std::size_t> rebuild_index;
    for (const auto& d : m1.at("designs")) {
        if (!d.at("sensing").get<bool>()) continue;
        const std::string id = d.at("id").get<std::string>();
        if (!config.dataset.store_voltage_traces) {
            peh::PehDesign design = config.design.designs({d.at("length").get<double>()}).front();
            design.aspect_ratio = d.at("aspect_ratio").get<double>();
            rebuild_index[id] = rebuild.size();
            rebuild.push_back(peh::with_load_resistance(peh::build_reduced(design, config.design.mesh),
                                                        d.at("load_resistance").get<double>()));
        }
        for (const auto& p : m1.at("passages")) {
            const std::string pid = p.at("id").get<std::string>();
            const std::string vrel = "phase1/voltages/" + id + "/" + pid + ".csv";
            if (config.dataset.store_voltage_traces && !m1.at("files").contains(vrel)) continue;  // quarantined
            jobs.push_back({id, pid, p.at("state"), p.at("split"),
                            config.dataset.store_voltage_traces ? vrel : p.at("file").get<std::string>(), true});
        }
    }
    if (config.detector.acceleration_baseline) {
        for (const auto& p : m1.at("passages")) {
            jobs.push_back({kAccelTarget, p.at("id"), p.at("state"), p.at("split"), p.at("file"), false});
        }
    }

    std::vector<tf::TfImage> images(jobs.size());
    auto errors = parallel_for(jobs.size(), config.threads, [&](std::size_t i) {
        const Job& j = jobs[i];
        std::vector<double> signal;
        double dt = 0.0;
        if (j.voltage && config.dataset.store_voltage_traces) {
            const auto trace = io::read_voltage(join(run_dir, j.source));
            signal = trace.volts;
            dt = trace.dt;
        } else {
            const auto passage = io::read_passage(join(run_dir, j.source));
            if (j.voltage) {
                const auto trace = peh::simulate_voltage(rebuild[rebuild_index.at(j.target)], passage);
                signal = trace.volts;
                dt = trace.dt;
            } else {
                signal = passage.accel;
                dt = passage.dt;
            }
        }
        images[i] = tf::signal_image(signal, dt, config.wsst, config.image, j.target + "/" + j.passage);
    });

    json manifest;
    manifest["phase"] = 2;
    manifest["files"] = json::object();
    manifest["images"] = json::array();
    manifest["excluded"] = json::array();
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const Job& j = jobs[i];
        if (!errors[i].empty() || images[i].degenerate) {
            const std::string why = errors[i].empty() ? "degenerate image" : errors[i];
            manifest["excluded"].push_back({{"target", j.target}, {"passage", j.passage}, {"reason", why}});
            ++result.degenerate;
            continue;
        }
        const std::string rel = "phase2/images/" + j.target + "/" + j.passage + ".tfi";
        io::ensure_directory(join(run_dir, "phase2/images/" + j.target));
        tf::write_tf_image(join(run_dir, rel), images[i]);
        record_file(manifest, run_dir, rel);
        manifest["images"].push_back(
            {{"target", j.target}, {"passage", j.passage}, {"state", j.state}, {"split", j.split}, {"file", rel}});
        ++result.images;
    }
    manifest["band"] = {config.wsst.band_lo, config.wsst.band_hi};
    write_json(join(run_dir, "phase2/manifest.json"), manifest);
    if (result.degenerate > 0) {
        result.status.warnings.push_back(std::to_string(result.degenerate) + " traces excluded (see phase2/manifest.json)");
    }
    return result;
}

// ---------------------------------------------------------------------------
// Phase 3

namespace {

struct ImageSet {
    std::vector<Eigen::VectorXd> images;
    std::vector<std::string> passages;
    std::vector<std::string> states;
    std::vector<std::string> splits;
};

std::map<std::string, ImageSet> load_images(const std::string& run_dir, const json& m2) {
    std::map<std::string, ImageSet> sets;
    for (const auto& e : m2.at("images")) {
        const auto img = tf::read_tf_image(join(run_dir, e.at("file").get<std::string>()));
        Eigen::VectorXd v(static_cast<Eigen::Index>(img.pixels.size()));
        for (std::size_t k = 0; k < img.pixels.size(); ++k) v(static_cast<Eigen::Index>(k)) = img.pixels[k];
        auto& s = sets[e.at("target").get<std::string>()];
        s.images.push_back(std::move(v));
        s.passages.push_back(e.at("passage"));
        s.states.push_back(e.at("state"));
        s.splits.push_back(e.at("split"));
    }
    return sets;
}

std::vector<std::string> ordered_targets(const json& m2) {
    std::vector<std::string> t;
    for (const auto& e : m2.at("images")) {
        const std::string id = e.at("target");
        if (std::find(t.begin(), t.end(), id) == t.end()) t.push_back(id);
    }
    return t;
}

}  // namespace

Phase3Result run_phase3_train(const std::string& run_dir, const std::optional<DetectorConfig>& override_cfg) {
    ExperimentConfig config = load_run_config(run_dir);
    if (override_cfg) {
        config.detector = *override_cfg;
        config.validate();
    }
    require_clean(run_dir, "phase2");
    const json m2 = load_json(join(run_dir, "phase2/manifest.json"));
    const auto sets = load_images(run_dir, m2);
    Phase3Result result;

    json manifest;
    manifest["phase"] = "phase3_train";
    manifest["files"] = json::object();
    manifest["models"] = json::array();
    manifest["failed"] = json::array();
    manifest["detector"] = json::parse(config.to_json()).at("detector");
    manifest["detector"]["seed"] = config.seeds.detector;
    io::CsvTable curves;
    curves.header = {"target", "repetition", "seed", "epoch", "total", "reconstruction", "kl"};

    for (const auto& target : ordered_targets(m2)) {
        const ImageSet& s = sets.at(target);
        std::vector<Eigen::VectorXd> train, validation;
        for (std::size_t i = 0; i < s.images.size(); ++i) {
            if (s.splits[i] == "train") train.push_back(s.images[i]);
            if (s.splits[i] == "validation") validation.push_back(s.images[i]);
        }
        try {
            if (static_cast<int>(train.size()) <= config.detector.train.batch_size) {
                throw TrainingError("too few training images (" + std::to_string(train.size()) + ")", 0, 0);
            }
            if (validation.size() < 20) {
                throw TrainingError("too few validation images (" + std::to_string(validation.size()) + ")", 0, 0);
            }
            std::vector<json> entries;
            for (int r = 0; r < config.detector.repetitions; ++r) {
                const std::uint64_t seed = config.seeds.detector + static_cast<std::uint64_t>(r);
                cvae::Cvae model(config.detector.arch, seed);
                cvae::TrainConfig tc = config.detector.train;
                tc.seed = seed;
                const auto rep = cvae::train(model, train, tc);
                for (std::size_t e = 0; e < rep.epochs.size(); ++e) {
                    curves.rows.push_back({target, std::to_string(r), std::to_string(seed), std::to_string(e + 1),
                                           num(rep.epochs[e].total), num(rep.epochs[e].reconstruction),
                                           num(rep.epochs[e].kl)});
                }
                const auto cal = cvae::calibrate_threshold(model, validation, config.detector.percentile,
                                                           target + "/seed" + std::to_string(seed));
                const std::string rel = "phase3/models/" + target + "/rep" + std::to_string(r) + ".cvae";
                io::ensure_directory(join(run_dir, "phase3/models/" + target));
                model.save(join(run_dir, rel));
                entries.push_back({{"target", target},
                                   {"repetition", r},
                                   {"seed", seed},
                                   {"file", rel},
                                   {"threshold", cal.threshold},
                                   {"percentile", cal.percentile},
                                   {"n_train", train.size()},
                                   {"n_validation", validation.size()},
                                   {"final_loss", rep.epochs.back().total}});
            }
            for (auto& e : entries) {
                record_file(manifest, run_dir, e.at("file").get<std::string>());
                manifest["models"].push_back(e);
                ++result.models;
            }
        } catch (const NumericalError& e) {
            manifest["failed"].push_back({{"target", target}, {"error", e.what()}});
            result.failed_designs.push_back(target);
            result.status.warnings.push_back("detector for " + target + " failed: " + e.what());
        }
    }
    io::write_csv(join(run_dir, "phase3/training_curves.csv"), curves);
    record_file(manifest, run_dir, "phase3/training_curves.csv");
    write_json(join(run_dir, "phase3/train_manifest.json"), manifest);
    return result;
}

std::vector<SensingRow> run_phase3_evaluate(const std::string& run_dir) {
    const ExperimentConfig config = load_run_config(run_dir);
    require_clean(run_dir, "phase2");
    require_clean(run_dir, "phase3_train");
    const json m1 = load_json(join(run_dir, "phase1/manifest.json"));
    const json m2 = load_json(join(run_dir, "phase2/manifest.json"));
    const json mt = load_json(join(run_dir, "phase3/train_manifest.json"));
    const auto sets = load_images(run_dir, m2);
    const std::string damage = config.scenario.damage;

    io::CsvTable di;
    di.header = {"target", "repetition", "passage_id", "state", "split", "di", "threshold", "predicted"};
    io::CsvTable confusion;
    confusion.header = {"target", "repetition", "true_positive", "false_negative", "false_positive", "true_negative",
                        "n_test", "accuracy"};
    std::map<std::string, std::vector<double>> acc;
    for (const auto& m : mt.at("models")) {
        const std::string target = m.at("target");
        const int rep = m.at("repetition");
        const double gamma = m.at("threshold");
        const cvae::Cvae model = cvae::Cvae::load(join(run_dir, m.at("file").get<std::string>()));
        const ImageSet& s = sets.at(target);
        std::vector<cvae::Label> pred, truth;
        int tp = 0, fn = 0, fp = 0, tn = 0;
        for (std::size_t i = 0; i < s.images.size(); ++i) {
            if (s.splits[i] == "train") continue;
            const double d = cvae::damage_index(model, s.images[i]);
            const auto label = cvae::classify(d, gamma);
            di.rows.push_back({target, std::to_string(rep), s.passages[i], s.states[i], s.splits[i], num(d), num(gamma),
                               label == cvae::Label::Damaged ? "damaged" : "healthy"});
            if (s.splits[i] != "test") continue;
            const bool healthy = s.states[i] == "HN";
            if (!healthy && s.states[i] != damage) continue;
            pred.push_back(label);
            truth.push_back(healthy ? cvae::Label::Healthy : cvae::Label::Damaged);
            if (healthy) {
                (label == cvae::Label::Healthy ? tn : fp)++;
            } else {
                (label == cvae::Label::Damaged ? tp : fn)++;
            }
        }
        const double a = cvae::sensing_accuracy(pred, truth);
        acc[target].push_back(a);
        confusion.rows.push_back({target, std::to_string(rep), std::to_string(tp), std::to_string(fn),
                                  std::to_string(fp), std::to_string(tn), std::to_string(pred.size()), num(a)});
    }

    std::vector<SensingRow> rows;
    io::CsvTable sensing;
    sensing.header = {"design_id", "length", "aspect_ratio", "accuracy_mean", "accuracy_std", "accuracy_min",
                      "accuracy_max", "repetitions"};
    for (int r = 0; r < config.detector.repetitions; ++r) sensing.header.push_back("accuracy_rep" + std::to_string(r));
    io::CsvTable baseline = sensing;
    baseline.header[0] = "target";
    for (const auto& d : m1.at("designs")) {
        if (!d.at("sensing").get<bool>()) continue;
        const std::string id = d.at("id");
        if (!acc.count(id)) continue;  // failed detector
        SensingRow row{id, d.at("length"), d.at("aspect_ratio"), mean_of(acc[id]), stddev_of(acc[id]), acc[id]};
        rows.push_back(row);
    }
    auto emit = [&](io::CsvTable& t, const std::string& id, double L, double R, const std::vector<double>& v) {
        std::vector<std::string> cells{id, num(L), num(R), num(mean_of(v)), num(stddev_of(v)),
                                       num(*std::min_element(v.begin(), v.end())),
                                       num(*std::max_element(v.begin(), v.end())), std::to_string(v.size())};
        for (int r = 0; r < config.detector.repetitions; ++r) {
            cells.push_back(r < static_cast<int>(v.size()) ? num(v[r]) : "");
        }
        t.rows.push_back(cells);
    };
    for (const auto& r : rows) emit(sensing, r.design_id, r.length, r.aspect_ratio, r.per_seed);
    if (acc.count(kAccelTarget)) emit(baseline, kAccelTarget, std::nan(""), std::nan(""), acc[kAccelTarget]);

    json manifest;
    manifest["phase"] = "phase3_evaluate";
    manifest["files"] = json::object();
    manifest["damage_state"] = damage;
    io::write_csv(join(run_dir, "phase3/di.csv"), di);
    io::write_csv(join(run_dir, "phase3/confusion.csv"), confusion);
    io::write_csv(join(run_dir, "phase3/sensing.csv"), sensing);
    for (const char* f : {"phase3/di.csv", "phase3/confusion.csv", "phase3/sensing.csv"}) record_file(manifest, run_dir, f);
    if (!baseline.rows.empty()) {
        io::write_csv(join(run_dir, "phase3/baseline.csv"), baseline);
        record_file(manifest, run_dir, "phase3/baseline.csv");
    }
    write_json(join(run_dir, "phase3/eval_manifest.json"), manifest);
    return rows;
}

// ---------------------------------------------------------------------------
// Phase 4

DesignTables load_design_tables(const std::string& run_dir, const std::string& energy_source) {
    const io::CsvTable e = io::read_csv(join(run_dir, "phase1/energy.csv"));
    const io::CsvTable s = io::read_csv(join(run_dir, "phase3/sensing.csv"));
    std::map<std::string, double> sense;
    for (std::size_t i = 0; i < s.rows.size(); ++i) sense[s.text(i, "design_id")] = s.number(i, "accuracy_mean");
    const std::string col = energy_source == "all" ? "energy_all_j" : "energy_healthy_j";
    DesignTables t;
    for (std::size_t i = 0; i < e.rows.size(); ++i) {
        DesignTables::Row r;
        r.design_id = e.text(i, "design_id");
        r.length = e.number(i, "length");
        r.aspect_ratio = e.number(i, "aspect_ratio");
        r.energy = e.number(i, col);
        if (sense.count(r.design_id)) {
            r.has_sensing = true;
            r.sensing = sense[r.design_id];
        }
        t.rows.push_back(r);
    }
    return t;
}

Phase4Result optimize_tables(const DesignTables& tables, const OptimizerConfig& oc, const DesignSpaceConfig& design,
                             const std::string& out_dir) {
    const int dims = design.optimize_aspect_ratio ? 2 : 1;
    const bool per_area = oc.objective == ObjectiveVariant::EnergyPerArea;
    auto point = [&](double L, double R) {
        Eigen::VectorXd x(dims);
        x(0) = L;
        if (dims == 2) x(1) = R;
        return x;
    };
    auto objective_energy = [&](double e, double L, double R) { return per_area ? e / (L * L * R) : e; };

    std::vector<const DesignTables::Row*> er, sr;
    for (const auto& r : tables.rows) {
        if (std::isfinite(r.energy)) er.push_back(&r);
        if (r.has_sensing && std::isfinite(r.sensing)) sr.push_back(&r);
    }
    if (er.size() < 4 || sr.size() < 4) {
        throw DomainError("phase 4 needs at least 4 valid designs for each objective (have " +
                          std::to_string(er.size()) + " energy, " + std::to_string(sr.size()) + " sensing)");
    }
    Eigen::MatrixXd XE(static_cast<Eigen::Index>(er.size()), dims), XS(static_cast<Eigen::Index>(sr.size()), dims);
    Eigen::VectorXd yE(XE.rows()), yS(XS.rows());
    for (std::size_t i = 0; i < er.size(); ++i) {
        XE.row(static_cast<Eigen::Index>(i)) = point(er[i]->length, er[i]->aspect_ratio).transpose();
        yE(static_cast<Eigen::Index>(i)) = objective_energy(er[i]->energy, er[i]->length, er[i]->aspect_ratio);
    }
    for (std::size_t i = 0; i < sr.size(); ++i) {
        XS.row(static_cast<Eigen::Index>(i)) = point(sr[i]->length, sr[i]->aspect_ratio).transpose();
        yS(static_cast<Eigen::Index>(i)) = sr[i]->sensing;
    }

    Phase4Result res;
    opt::KrigingModel kE, kS;
    try {
        kE = opt::KrigingModel::fit(XE, yE, oc.kriging);
        kS = opt::KrigingModel::fit(XS, yS, oc.kriging);
        res.energy_loo_rmse = XE.rows() >= 5 ? opt::leave_one_out_rmse(XE, yE, oc.kriging) : std::nan("");
        res.sensing_loo_rmse = XS.rows() >= 5 ? opt::leave_one_out_rmse(XS, yS, oc.kriging) : std::nan("");
    } catch (const Error& e) {
        throw NumericalError(std::string("phase 4 surrogate fit failed: ") + e.what());
    }
    for (const auto* k : {&kE, &kS}) {
        if (k->nugget_escalated()) res.status.warnings.push_back(k->warning());
    }

    Eigen::VectorXd lo(dims), hi(dims);
    lo(0) = design.length_lo;
    hi(0) = design.length_hi;
    if (dims == 2) {
        lo(1) = design.ratio_lo;
        hi(1) = design.ratio_hi;
    }
    auto objective = [&](const Eigen::VectorXd& x) {
        Eigen::VectorXd f(2);
        f(0) = kE.mean(x);
        f(1) = std::clamp(kS.mean(x), 0.0, 1.0);
        return f;
    };
    res.pareto = opt::nsga2(objective, lo, hi, oc.nsga);
    if (out_dir.empty()) return res;

    const std::string eunit = per_area ? "energy_j_per_m2" : "energy_j";
    const std::string eunit_u = per_area ? "energy_uj_per_m2" : "energy_uj";
    io::CsvTable pareto;
    pareto.header = {"length"};
    if (dims == 2) pareto.header.push_back("aspect_ratio");
    for (const auto& h : {eunit, eunit_u, std::string("accuracy"), std::string("generation")}) pareto.header.push_back(h);
    for (const auto& p : res.pareto.points) {
        std::vector<std::string> row{num(p.x(0))};
        if (dims == 2) row.push_back(num(p.x(1)));
        row.push_back(num(p.f(0)));
        row.push_back(num(p.f(0) * 1e6));
        row.push_back(num(p.f(1)));
        row.push_back(std::to_string(p.generation));
        pareto.rows.push_back(row);
    }
    io::write_csv(join(out_dir, "pareto.csv"), pareto);

    auto curve = [&](const opt::KrigingModel& k, const std::string& name, const std::string& unit, double scale) {
        io::CsvTable t;
        t.header = {"length"};
        if (dims == 2) t.header.push_back("aspect_ratio");
        t.header.push_back(unit);
        t.header.push_back(unit + "_std");
        t.header.push_back("extrapolated");
        const auto Ls = linspace(design.length_lo, design.length_hi, oc.curve_points);
        const auto Rs = dims == 2 ? linspace(design.ratio_lo, design.ratio_hi, 19) : std::vector<double>{0.0};
        for (double L : Ls) {
            for (double R : Rs) {
                const auto p = k.predict(point(L, R));
                std::vector<std::string> row{num(L)};
                if (dims == 2) row.push_back(num(R));
                row.push_back(num(p.mean * scale));
                row.push_back(num(std::sqrt(p.variance) * scale));
                row.push_back(p.extrapolated ? "1" : "0");
                t.rows.push_back(row);
            }
        }
        io::write_csv(join(out_dir, name), t);
    };
    curve(kE, "surrogate_energy.csv", eunit_u, 1e6);
    curve(kS, "surrogate_sensing.csv", "accuracy", 1.0);

    io::CsvTable hv;
    hv.header = {"generation", "hypervolume"};
    for (std::size_t g = 0; g < res.pareto.hypervolume_history.size(); ++g) {
        hv.rows.push_back({std::to_string(g), num(res.pareto.hypervolume_history[g])});
    }
    io::write_csv(join(out_dir, "hypervolume.csv"), hv);
    return res;
}

Phase4Result run_phase4(const std::string& run_dir, const std::optional<OptimizerConfig>& override_cfg) {
    ExperimentConfig config = load_run_config(run_dir);
    if (override_cfg) {
        config.optimizer = *override_cfg;
        config.validate();
    }
    require_clean(run_dir, "phase1");
    require_clean(run_dir, "phase3_evaluate");
    const auto tables = load_design_tables(run_dir, config.optimizer.energy_source);
    const std::string out = join(run_dir, "phase4");
    io::ensure_directory(out);
    Phase4Result res = optimize_tables(tables, config.optimizer, config.design, out);

    json manifest;
    manifest["phase"] = 4;
    manifest["files"] = json::object();
    manifest["objective"] = to_string(config.optimizer.objective);
    manifest["energy_source"] = config.optimizer.energy_source;
    manifest["seed"] = config.seeds.optimizer;
    manifest["optimizer"] = json::parse(config.to_json()).at("optimizer");
    manifest["surrogates"] = {{"energy_loo_rmse", res.energy_loo_rmse}, {"sensing_loo_rmse", res.sensing_loo_rmse}};
    manifest["warnings"] = res.status.warnings;
    manifest["evaluations"] = res.pareto.evaluations;
    manifest["hv_reference"] = {res.pareto.hv_reference(0), res.pareto.hv_reference(1)};
    manifest["pareto_points"] = res.pareto.points.size();
    for (const char* f : {"phase4/pareto.csv", "phase4/surrogate_energy.csv", "phase4/surrogate_sensing.csv",
                          "phase4/hypervolume.csv"}) {
        record_file(manifest, run_dir, f);
    }
    write_json(join(run_dir, "phase4/manifest.json"), manifest);
    return res;
}

// ---------------------------------------------------------------------------
// Report

std::vector<std::string> verify_manifest(const std::string& run_dir, const std::string& phase) {
    static const std::map<std::string, std::string> where{{"phase1", "phase1/manifest.json"},
                                                          {"phase2", "phase2/manifest.json"},
                                                          {"phase3_train", "phase3/train_manifest.json"},
                                                          {"phase3_evaluate", "phase3/eval_manifest.json"},
                                                          {"phase4", "phase4/manifest.json"}};
    if (!where.count(phase)) throw ConfigError("verify_manifest: unknown phase " + phase);
    const std::string mpath = join(run_dir, where.at(phase));
    if (!io::file_exists(mpath)) return {where.at(phase)};
    const json m = load_json(mpath);
    std::vector<std::string> bad;
    for (const auto& [rel, sha] : m.at("files").items()) {
        const std::string p = join(run_dir, rel);
        if (!io::file_exists(p) || io::sha256_file(p) != sha.get<std::string>()) bad.push_back(rel);
    }
    return bad;
}

ReportResult report(const std::string& run_dir) {
    const ExperimentConfig config = load_run_config(run_dir);
    ReportResult res;
    const std::string out = join(run_dir, "report");
    io::ensure_directory(out);
    json summary;
    summary["name"] = config.name;
    summary["config_sha256"] = io::sha256_file(join(run_dir, "config.json"));
    summary["seeds"] = json::parse(config.to_json()).at("seeds");
    summary["scenario"] = json::parse(config.to_json()).at("scenario");
    summary["files"] = json::object();
    summary["manifests"] = json::object();

    for (const char* phase : {"phase1", "phase2", "phase3_train", "phase3_evaluate", "phase4"}) {
        const auto bad = verify_manifest(run_dir, phase);
        summary["manifests"][phase] = bad.empty() ? "verified" : "failed";
        for (const auto& b : bad) res.gaps.push_back(std::string(phase) + ": " + b);
    }

    const std::vector<std::pair<std::string, std::string>> copies{
        {"phase1/energy.csv", "energy_curve.csv"},         {"phase1/energy_per_passage.csv", "energy_per_passage.csv"},
        {"phase3/sensing.csv", "sensing_curve.csv"},       {"phase3/baseline.csv", "baseline_accuracy.csv"},
        {"phase3/di.csv", "di_distribution.csv"},          {"phase3/confusion.csv", "confusion.csv"},
        {"phase3/training_curves.csv", "training_curves.csv"}, {"phase4/pareto.csv", "pareto.csv"},
        {"phase4/surrogate_energy.csv", "surrogate_energy.csv"},
        {"phase4/surrogate_sensing.csv", "surrogate_sensing.csv"}, {"phase4/hypervolume.csv", "hypervolume.csv"}};
    for (const auto& [src, dst] : copies) {
        const std::string s = join(run_dir, src);
        if (!io::file_exists(s)) {
            if (src == "phase3/baseline.csv" && !config.detector.acceleration_baseline) continue;
            res.gaps.push_back("missing " + src);
            continue;
        }
        fs::copy_file(s, join(out, dst), fs::copy_options::overwrite_existing);
        res.files.push_back(dst);
    }

    // Fundamental-frequency isocurve grid.
    {
        io::CsvTable t;
        t.header = {"length", "aspect_ratio", "tip_mass", "f1_hz"};
        const auto Ls = linspace(config.design.length_lo, config.design.length_hi, 15);
        const auto Rs = linspace(0.1, 1.0, 10);
        std::vector<double> tips{0.0};
        if (config.design.tip_mass > 0.0) tips.push_back(config.design.tip_mass);
        peh::PehDesign base;
        base.total_thickness = config.design.total_thickness;
        for (double tip : tips) {
            const auto map = peh::fundamental_frequency_map(Ls, Rs, tip, base, config.design.mesh);
            for (std::size_t i = 0; i < Ls.size(); ++i) {
                for (std::size_t j = 0; j < Rs.size(); ++j) {
                    t.rows.push_back({num(Ls[i]), num(Rs[j]), num(tip), num(map[i][j])});
                }
            }
        }
        io::write_csv(join(out, "frequency_map.csv"), t);
        res.files.push_back("frequency_map.csv");
    }
    // Energy-consumption comparison.
    {
        io::CsvTable t;
        t.header = {"name", "p_sensing_uw", "p_sample_uw", "p_sleep_uw", "t_sample_s", "t_sleep_s", "energy_j"};
        json budgets = json::array();
        for (const auto& b : config.power_budgets) {
            const double e = energy_consumption(b);
            t.rows.push_back({b.name, num(b.p_sensing_uw), num(b.p_sample_uw), num(b.p_sleep_uw), num(b.t_sample_s),
                              num(b.t_sleep_s), num(e)});
            budgets.push_back({{"name", b.name}, {"energy_j", e}});
        }
        io::write_csv(join(out, "energy_consumption.csv"), t);
        res.files.push_back("energy_consumption.csv");
        summary["energy_consumption"] = budgets;
    }

    // Headline numbers.
    if (io::file_exists(join(run_dir, "phase1/energy.csv"))) {
        const auto e = io::read_csv(join(run_dir, "phase1/energy.csv"));
        std::size_t best = 0;
        for (std::size_t i = 0; i < e.rows.size(); ++i) {
            if (e.number(i, "energy_healthy_j") > e.number(best, "energy_healthy_j")) best = i;
        }
        if (!e.rows.empty()) {
            summary["max_energy_design"] = {{"design_id", e.text(best, "design_id")},
                                            {"length", e.number(best, "length")},
                                            {"energy_healthy_uj", e.number(best, "energy_healthy_uj")}};
        }
    }
    if (io::file_exists(join(run_dir, "phase3/sensing.csv"))) {
        const auto s = io::read_csv(join(run_dir, "phase3/sensing.csv"));
        json rows = json::array();
        for (std::size_t i = 0; i < s.rows.size(); ++i) {
            rows.push_back({{"design_id", s.text(i, "design_id")},
                            {"accuracy_mean", s.number(i, "accuracy_mean")},
                            {"accuracy_std", s.number(i, "accuracy_std")}});
        }
        summary["sensing"] = rows;
    }
    if (io::file_exists(join(run_dir, "phase4/pareto.csv"))) {
        const auto p = io::read_csv(join(run_dir, "phase4/pareto.csv"));
        double lo = 1e300, hi = -1e300;
        for (std::size_t i = 0; i < p.rows.size(); ++i) {
            lo = std::min(lo, p.number(i, "length"));
            hi = std::max(hi, p.number(i, "length"));
        }
        summary["pareto"] = {{"points", p.rows.size()}, {"length_min", lo}, {"length_max", hi}};
    }

    for (const auto& f : res.files) summary["files"][f] = io::sha256_file(join(out, f));
    summary["gaps"] = res.gaps;
    summary["partial"] = !res.gaps.empty();
    write_json(join(out, "summary.json"), summary);
    res.files.push_back("summary.json");
    res.status.partial = !res.gaps.empty();
    return res;
}

}  // namespace sehs::pipeline
