#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "sehs/errors.hpp"
#include "sehs/io.hpp"
#include "sehs/pipeline.hpp"

using namespace sehs;
using namespace sehs::pipeline;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string temp_dir(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("sehs_pipeline_" + name);
    fs::remove_all(p);
    return p.string();
}

// Smallest configuration that exercises every phase: one sensing design,
// 22 train and 22 validation healthy images, a miniature detector.
ExperimentConfig tiny_config() {
    ExperimentConfig c = ExperimentConfig::preset("desk");
    c.name = "tiny";
    c.dataset.healthy = 44;
    c.dataset.train_fraction = 0.5;
    c.dataset.healthy_test = 3;
    c.dataset.damaged_test = 3;
    c.scenario.extra_damage_states = {"DMN2"};
    c.design.energy_lengths = {0.3, 0.34};
    c.design.sensing_lengths = {0.34};
    c.design.mesh.n_x = 10;
    c.design.mesh.n_y = 8;
    c.wsst.n_scales = 32;
    c.wsst.freq_bins = 64;
    c.image.height = 16;
    c.image.width = 16;
    c.detector.arch.image_size = 16;
    c.detector.arch.channels = {2, 4};
    c.detector.arch.latent = 2;
    c.detector.train.epochs = 2;
    c.detector.train.batch_size = 4;
    c.detector.repetitions = 2;
    c.detector.acceleration_baseline = false;
    return c;
}

std::string hash(const std::string& dir, const std::string& rel) { return io::sha256_file(dir + "/" + rel); }

}  // namespace

TEST_CASE("configuration") {
    SUBCASE("JSON round trip") {
        for (const auto& name : ExperimentConfig::preset_names()) {
            const auto c = ExperimentConfig::preset(name);
            CHECK_NOTHROW(c.validate());
            CHECK(ExperimentConfig::from_json(c.to_json()).to_json() == c.to_json());
        }
    }
    SUBCASE("unknown keys are rejected") {
        json j = json::parse(ExperimentConfig::preset("desk").to_json());
        j["dataset"]["heathy"] = 10;
        CHECK_THROWS_AS(ExperimentConfig::from_json(j.dump()), ConfigError);
        j = json::parse(ExperimentConfig::preset("desk").to_json());
        j["colour"] = "blue";
        CHECK_THROWS_AS(ExperimentConfig::from_json(j.dump()), ConfigError);
        CHECK_THROWS_AS(ExperimentConfig::from_json("{not json"), ConfigError);
    }
    SUBCASE("missing keys keep defaults") {
        json j = json::parse(ExperimentConfig::preset("desk").to_json());
        j["dataset"].erase("train_fraction");
        j["dataset"]["healthy"] = 150;
        const auto c = ExperimentConfig::from_json(j.dump());
        CHECK(c.dataset.healthy == 150);
        CHECK(c.dataset.train_fraction == 0.8);
    }
    SUBCASE("invalid values are rejected") {
        auto c = tiny_config();
        c.design.sensing_lengths = {0.33};
        CHECK_THROWS_AS(c.validate(), ConfigError);
        c = tiny_config();
        c.scenario.damage = "HN";
        CHECK_THROWS_AS(c.validate(), ConfigError);
        c = tiny_config();
        c.image.height = 32;
        CHECK_THROWS_AS(c.validate(), ConfigError);
        CHECK_THROWS_AS(ExperimentConfig::preset("laptop"), ConfigError);
    }
    SUBCASE("scenario presets") {
        const auto q = ExperimentConfig::preset("desk-quarter-dqn1");
        CHECK(q.scenario.sensor == "quarter");
        CHECK(q.scenario.damage == "DQN1");
        CHECK(ExperimentConfig::preset("desk-nr-detection").scenario.road == "NR");
        CHECK(ExperimentConfig::preset("paper-area").optimizer.objective == ObjectiveVariant::EnergyPerArea);
        CHECK(ExperimentConfig::preset("paper-lr").design.optimize_aspect_ratio);
        CHECK(ExperimentConfig::preset("paper").design.energy_lengths.size() == 36);
    }
}

TEST_CASE("helpers") {
    const auto g = linspace(0.15, 0.5, 36);
    CHECK(g.size() == 36);
    CHECK(g.front() == 0.15);
    CHECK(g.back() == 0.5);
    CHECK(g[19] == doctest::Approx(0.34));
    CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
    std::set<std::uint64_t> seen;
    for (std::uint64_t s = 0; s < 4; ++s) {
        for (std::uint64_t i = 0; i < 100; ++i) seen.insert(derive_seed(7, s, i));
    }
    CHECK(seen.size() == 400);
}

TEST_CASE("power budgets") {
    const auto b = reference_power_budgets(300.0);
    REQUIRE(b.size() == 4);
    // (P_sensing + P_sample) t_sample + P_sleep t_sleep.
    CHECK(energy_consumption(b[0]) == doctest::Approx((33.3e3 + 480.0) * 140.0 * 1e-6).epsilon(1e-12));
    CHECK(std::round(energy_consumption(b[0]) * 1000) / 1000 == 4.729);
    CHECK(std::round(energy_consumption(b[1]) * 1000) / 1000 == 0.067);
    CHECK(std::abs(energy_consumption(b[2]) - 4.733) <= 0.005);
    CHECK(std::abs(energy_consumption(b[3]) - 0.068) <= 0.005);
    PowerBudget bad = b[0];
    bad.t_sample_s = -1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("synthetic tables: a shared maximizer collapses the Pareto set") {
    DesignTables t;
    for (int i = 0; i < 15; ++i) {
        DesignTables::Row r;
        r.length = 0.15 + 0.025 * i;
        r.aspect_ratio = 1.0;
        r.design_id = "L" + std::to_string(i);
        const double d = (r.length - 0.34) / 0.08;
        r.energy = 1e-6 * std::exp(-d * d);
        r.has_sensing = true;
        r.sensing = 0.6 + 0.35 * std::exp(-d * d);
        t.rows.push_back(r);
    }
    OptimizerConfig o;
    o.nsga.population = 20;
    o.nsga.generations = 30;
    o.kriging.n_starts = 5;
    DesignSpaceConfig space;
    const auto res = optimize_tables(t, o, space);
    REQUIRE(!res.pareto.points.empty());
    for (const auto& p : res.pareto.points) CHECK(std::abs(p.x(0) - 0.34) < 0.02);

    DesignTables few;
    few.rows.assign(t.rows.begin(), t.rows.begin() + 3);
    CHECK_THROWS_AS(optimize_tables(few, o, space), DomainError);
}

TEST_CASE("end-to-end plumbing on a miniature run") {
    const auto cfg = tiny_config();
    const std::string a = temp_dir("a");
    const std::string b = temp_dir("b");

    const auto p1 = run_phase1(cfg, a);
    CHECK(p1.passages == 44 + 3 + 3 + 3);
    CHECK(p1.designs == 2);
    CHECK(p1.quarantined == 0);
    const auto p2 = run_phase2(a);
    CHECK(p2.images == p1.passages);
    CHECK(p2.degenerate == 0);

    // Passage and energy tables.
    const auto energy = io::read_csv(a + "/phase1/energy.csv");
    CHECK(energy.rows.size() == 2);
    for (std::size_t i = 0; i < energy.rows.size(); ++i) {
        CHECK(energy.number(i, "energy_healthy_j") > 0.0);
        CHECK(energy.number(i, "energy_healthy_uj") == doctest::Approx(energy.number(i, "energy_healthy_j") * 1e6));
    }
    CHECK(io::read_csv(a + "/phase1/energy_per_passage.csv").rows.size() == 2 * 53);

    const auto p3 = run_phase3_train(a);
    CHECK(p3.models == 2);
    CHECK(p3.failed_designs.empty());
    const auto rows = run_phase3_evaluate(a);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].per_seed.size() == 2);
    for (double s : rows[0].per_seed) {
        CHECK(s >= 0.0);
        CHECK(s <= 1.0);
    }

    // DI rows: every non-train image for each repetition.
    const auto di = io::read_csv(a + "/phase3/di.csv");
    CHECK(di.rows.size() == 2 * (22 + 3 + 3 + 3));
    std::map<std::string, int> states;
    for (std::size_t i = 0; i < di.rows.size(); ++i) {
        states[di.text(i, "state")]++;
        CHECK(di.number(i, "di") >= 0.0);
    }
    CHECK(states["DMN2"] == 6);
    const auto conf = io::read_csv(a + "/phase3/confusion.csv");
    for (std::size_t i = 0; i < conf.rows.size(); ++i) {
        const double n = conf.number(i, "true_positive") + conf.number(i, "false_negative") +
                         conf.number(i, "false_positive") + conf.number(i, "true_negative");
        CHECK(n == 6);
        CHECK(conf.number(i, "n_test") == 6);
        CHECK(conf.number(i, "accuracy") ==
              doctest::Approx((conf.number(i, "true_positive") + conf.number(i, "true_negative")) / n));
    }

    SUBCASE("phase isolation") {
        const auto e1 = hash(a, "phase1/energy.csv");
        const auto img = hash(a, "phase2/manifest.json");
        run_phase3_train(a);
        run_phase3_evaluate(a);
        CHECK(verify_manifest(a, "phase1").empty());
        CHECK(verify_manifest(a, "phase2").empty());
        CHECK(verify_manifest(a, "phase3_train").empty());
        CHECK(hash(a, "phase1/energy.csv") == e1);
        CHECK(hash(a, "phase2/manifest.json") == img);

        // Tampering is detected.
        io::write_text(a + "/phase1/energy.csv", "design_id\nx\n");
        CHECK(verify_manifest(a, "phase1").size() == 1);
        CHECK_THROWS(run_phase2(a));
    }
    SUBCASE("determinism from the seeds alone") {
        run_phase1(ExperimentConfig::load(a + "/config.json"), b);
        run_phase2(b);
        run_phase3_train(b);
        run_phase3_evaluate(b);
        for (const char* f : {"phase1/energy.csv", "phase1/energy_per_passage.csv", "phase2/manifest.json",
                              "phase3/training_curves.csv", "phase3/di.csv", "phase3/sensing.csv"}) {
            CHECK_MESSAGE(hash(a, f) == hash(b, f), f);
        }
    }
    SUBCASE("report without phase 4 is partial") {
        const auto r = report(a);
        CHECK(r.status.partial);
        bool pareto_gap = false;
        for (const auto& g : r.gaps) pareto_gap = pareto_gap || g.find("pareto") != std::string::npos;
        CHECK(pareto_gap);
        int csv = 0;
        for (const auto& f : r.files) csv += f.size() > 4 && f.substr(f.size() - 4) == ".csv";
        CHECK(csv >= 6);
        CHECK(fs::exists(a + "/report/summary.json"));
        const auto ec = io::read_csv(a + "/report/energy_consumption.csv");
        CHECK(ec.rows.size() == cfg.power_budgets.size());
    }
    fs::remove_all(a);
    fs::remove_all(b);
}
