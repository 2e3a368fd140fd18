#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sehs/bridge.hpp"
#include "sehs/cvae.hpp"
#include "sehs/errors.hpp"
#include "sehs/opt.hpp"
#include "sehs/peh.hpp"
#include "sehs/pipeline.hpp"
#include "sehs/tf.hpp"

namespace py = pybind11;
using namespace sehs;

namespace {

std::optional<vbi::CrackSpec> crack_from_state(const std::string& state, const vbi::BeamModel& beam) {
    return vbi::crack_for(vbi::damage_state_from_string(state), beam);
}

void bind_vbi(py::module_& m) {
    py::class_<vbi::BeamModel>(m, "BeamModel")
        .def(py::init<>())
        .def_static("reference", &vbi::BeamModel::reference, py::arg("n_elements") = 100)
        .def_readwrite("span", &vbi::BeamModel::span)
        .def_readwrite("youngs_modulus", &vbi::BeamModel::youngs_modulus)
        .def_readwrite("second_moment", &vbi::BeamModel::second_moment)
        .def_readwrite("area", &vbi::BeamModel::area)
        .def_readwrite("mass_per_length", &vbi::BeamModel::mass_per_length)
        .def_readwrite("damping_ratio", &vbi::BeamModel::damping_ratio)
        .def_readwrite("n_elements", &vbi::BeamModel::n_elements)
        .def_readwrite("section_height", &vbi::BeamModel::section_height)
        .def_readwrite("section_width", &vbi::BeamModel::section_width)
        .def("validate", &vbi::BeamModel::validate);

    py::class_<vbi::CrackSpec>(m, "CrackSpec")
        .def(py::init<>())
        .def(py::init([](double location, double severity) { return vbi::CrackSpec{location, severity}; }),
             py::arg("location"), py::arg("severity"))
        .def_readwrite("location", &vbi::CrackSpec::location)
        .def_readwrite("severity", &vbi::CrackSpec::severity);

    m.def("crack_for", &crack_from_state, py::arg("state"), py::arg("beam"),
          "Crack of a named damage state (HN, DMN1, DMN2, DQN1); None when healthy.");

    py::class_<vbi::BeamSystem>(m, "BeamSystem")
        .def_readonly("beam", &vbi::BeamSystem::beam)
        .def_readonly("crack", &vbi::BeamSystem::crack)
        .def_readonly("mass", &vbi::BeamSystem::mass)
        .def_readonly("stiffness", &vbi::BeamSystem::stiffness)
        .def_readonly("damping", &vbi::BeamSystem::damping)
        .def_property_readonly("n_free", &vbi::BeamSystem::n_free);

    m.def("assemble_beam", &vbi::assemble_beam, py::arg("beam"), py::arg("crack") = std::nullopt);
    m.def("beam_modal_frequencies", &vbi::beam_modal_frequencies, py::arg("system"), py::arg("count"));
    m.def("analytic_beam_frequency", &vbi::analytic_beam_frequency, py::arg("beam"), py::arg("mode"));
    m.def("flexural_stiffness_at", &vbi::flexural_stiffness_at, py::arg("beam"), py::arg("crack"), py::arg("x"));

    py::class_<vbi::RoadProfile>(m, "RoadProfile")
        .def_readonly("length", &vbi::RoadProfile::length)
        .def_readonly("seed", &vbi::RoadProfile::seed)
        .def_property_readonly("smooth", &vbi::RoadProfile::smooth)
        .def("height", &vbi::RoadProfile::height)
        .def("slope", &vbi::RoadProfile::slope);
    m.def(
        "generate_road_profile",
        [](const std::string& road, double length, std::uint64_t seed) {
            return vbi::generate_road_profile(vbi::road_class_from_string(road), length, seed);
        },
        py::arg("road"), py::arg("length"), py::arg("seed"));

    py::class_<vbi::VehicleModel>(m, "VehicleModel")
        .def(py::init<>())
        .def_static("nominal", &vbi::VehicleModel::nominal)
        .def_readwrite("body_mass", &vbi::VehicleModel::body_mass)
        .def_readwrite("pitch_inertia", &vbi::VehicleModel::pitch_inertia)
        .def_readwrite("tire_mass_front", &vbi::VehicleModel::tire_mass_front)
        .def_readwrite("tire_mass_rear", &vbi::VehicleModel::tire_mass_rear)
        .def_readwrite("d1", &vbi::VehicleModel::d1)
        .def_readwrite("d2", &vbi::VehicleModel::d2)
        .def_readwrite("speed", &vbi::VehicleModel::speed)
        .def_property_readonly("wheelbase", &vbi::VehicleModel::wheelbase)
        .def_property_readonly("total_mass", &vbi::VehicleModel::total_mass)
        .def("validate", &vbi::VehicleModel::validate);

    py::class_<vbi::VehicleRanges>(m, "VehicleRanges").def(py::init<>());
    m.def("sample_vehicle_params", &vbi::sample_vehicle_params, py::arg("n"),
          py::arg("ranges") = vbi::VehicleRanges{}, py::arg("seed") = 0);

    py::class_<vbi::PassageRecord>(m, "PassageRecord")
        .def_readonly("id", &vbi::PassageRecord::id)
        .def_readonly("dt", &vbi::PassageRecord::dt)
        .def_readonly("accel", &vbi::PassageRecord::accel)
        .def_readonly("sensor_location", &vbi::PassageRecord::sensor_location)
        .def_readonly("state_label", &vbi::PassageRecord::state_label)
        .def_readonly("vehicle", &vbi::PassageRecord::vehicle)
        .def_property_readonly("duration", &vbi::PassageRecord::duration);

    m.def(
        "simulate_passage",
        [](const vbi::BeamSystem& system, const vbi::VehicleModel& vehicle, const vbi::RoadProfile& road, double dt,
           double sensor_location) {
            py::gil_scoped_release release;
            return vbi::simulate_passage(system, vehicle, road, dt, sensor_location);
        },
        py::arg("system"), py::arg("vehicle"), py::arg("road"), py::arg("dt") = 0.001,
        py::arg("sensor_location") = 12.5);
}

void bind_peh(py::module_& m) {
    py::class_<peh::PehDesign>(m, "PehDesign")
        .def(py::init<>())
        .def(py::init([](double length, double aspect_ratio, double tip_mass) {
                 peh::PehDesign d;
                 d.length = length;
                 d.aspect_ratio = aspect_ratio;
                 d.tip_mass = tip_mass;
                 return d;
             }),
             py::arg("length"), py::arg("aspect_ratio") = 1.0, py::arg("tip_mass") = 0.0)
        .def_readwrite("length", &peh::PehDesign::length)
        .def_readwrite("aspect_ratio", &peh::PehDesign::aspect_ratio)
        .def_readwrite("pzt_length_ratio", &peh::PehDesign::pzt_length_ratio)
        .def_readwrite("total_thickness", &peh::PehDesign::total_thickness)
        .def_readwrite("thickness_ratio", &peh::PehDesign::thickness_ratio)
        .def_readwrite("damping_alpha", &peh::PehDesign::damping_alpha)
        .def_readwrite("damping_beta", &peh::PehDesign::damping_beta)
        .def_readwrite("load_resistance", &peh::PehDesign::load_resistance)
        .def_readwrite("tip_mass", &peh::PehDesign::tip_mass)
        .def_property_readonly("width", &peh::PehDesign::width)
        .def_property_readonly("capacitance", &peh::PehDesign::capacitance)
        .def_property_readonly("id", &peh::PehDesign::id)
        .def("validate", &peh::PehDesign::validate);

    py::class_<peh::PehMesh>(m, "PehMesh")
        .def(py::init<>())
        .def(py::init([](int n_x, int n_y) {
                 peh::PehMesh mesh;
                 mesh.n_x = n_x;
                 mesh.n_y = n_y;
                 return mesh;
             }),
             py::arg("n_x"), py::arg("n_y"))
        .def_readwrite("n_x", &peh::PehMesh::n_x)
        .def_readwrite("n_y", &peh::PehMesh::n_y)
        .def_readwrite("degree", &peh::PehMesh::degree)
        .def_readwrite("gauss", &peh::PehMesh::gauss);

    py::class_<peh::ReducedPeh>(m, "ReducedPeh")
        .def_readonly("omega", &peh::ReducedPeh::omega)
        .def_readonly("theta", &peh::ReducedPeh::theta)
        .def_readonly("f", &peh::ReducedPeh::f)
        .def_readonly("capacitance", &peh::ReducedPeh::capacitance)
        .def_readonly("load_resistance", &peh::ReducedPeh::load_resistance)
        .def_readonly("residual_capacitance", &peh::ReducedPeh::residual_capacitance)
        .def_readonly("residual_forcing", &peh::ReducedPeh::residual_forcing)
        .def_readonly("design_id", &peh::ReducedPeh::design_id)
        .def_property_readonly("n_modes", &peh::ReducedPeh::n_modes)
        .def_property_readonly("first_frequency_hz", &peh::ReducedPeh::first_frequency_hz);

    m.def(
        "build_reduced",
        [](const peh::PehDesign& d, const peh::PehMesh& mesh) {
            py::gil_scoped_release release;
            return peh::build_reduced(d, mesh);
        },
        py::arg("design"), py::arg("mesh") = peh::PehMesh{});
    m.def(
        "fundamental_frequency",
        [](const peh::PehDesign& d, const peh::PehMesh& mesh) {
            py::gil_scoped_release release;
            return peh::fundamental_frequency(d, mesh);
        },
        py::arg("design"), py::arg("mesh") = peh::PehMesh{});
    m.def(
        "fundamental_frequency_map",
        [](const std::vector<double>& lengths, const std::vector<double>& ratios, double tip_mass,
           const peh::PehMesh& mesh) {
            py::gil_scoped_release release;
            return peh::fundamental_frequency_map(lengths, ratios, tip_mass, peh::PehDesign{}, mesh);
        },
        py::arg("lengths"), py::arg("ratios"), py::arg("tip_mass") = 0.0, py::arg("mesh") = peh::PehMesh{});
    m.def("with_load_resistance", &peh::with_load_resistance, py::arg("reduced"), py::arg("load_resistance"));
    m.def("select_load_resistance", &peh::select_load_resistance, py::arg("reduced"), py::arg("log10_lo") = 2.0,
          py::arg("log10_hi") = 8.0);
    m.def("voltage_frf", &peh::voltage_frf, py::arg("reduced"), py::arg("omega"),
          "Voltage per unit base acceleration at the given angular frequencies.");

    py::class_<peh::VoltageTrace>(m, "VoltageTrace")
        .def_readonly("dt", &peh::VoltageTrace::dt)
        .def_readonly("volts", &peh::VoltageTrace::volts)
        .def_readonly("load_resistance", &peh::VoltageTrace::load_resistance)
        .def_property_readonly("duration", &peh::VoltageTrace::duration);

    m.def(
        "simulate_voltage",
        [](const peh::ReducedPeh& reduced, const std::vector<double>& accel, double dt) {
            py::gil_scoped_release release;
            return peh::simulate_voltage(reduced, accel, dt);
        },
        py::arg("reduced"), py::arg("accel"), py::arg("dt"));
    m.def("harvested_energy", py::overload_cast<const peh::VoltageTrace&>(&peh::harvested_energy),
          py::arg("trace"), "Energy dissipated in the load over the whole trace [J].");
}

void bind_tf(py::module_& m) {
    py::enum_<tf::WaveletNorm>(m, "WaveletNorm").value("L2", tf::WaveletNorm::L2).value("L1", tf::WaveletNorm::L1);

    py::class_<tf::WsstConfig>(m, "WsstConfig")
        .def(py::init<>())
        .def_readwrite("morlet_center", &tf::WsstConfig::morlet_center)
        .def_readwrite("n_scales", &tf::WsstConfig::n_scales)
        .def_readwrite("gamma_threshold", &tf::WsstConfig::gamma_threshold)
        .def_readwrite("freq_bins", &tf::WsstConfig::freq_bins)
        .def_readwrite("band_lo", &tf::WsstConfig::band_lo)
        .def_readwrite("band_hi", &tf::WsstConfig::band_hi)
        .def_readwrite("min_freq", &tf::WsstConfig::min_freq)
        .def_readwrite("norm", &tf::WsstConfig::norm)
        .def_property_readonly("bin_width", &tf::WsstConfig::bin_width);

    py::class_<tf::ImageOptions>(m, "ImageOptions")
        .def(py::init<>())
        .def_readwrite("height", &tf::ImageOptions::height)
        .def_readwrite("width", &tf::ImageOptions::width)
        .def_readwrite("band_lo", &tf::ImageOptions::band_lo)
        .def_readwrite("band_hi", &tf::ImageOptions::band_hi)
        .def_readwrite("log_gain", &tf::ImageOptions::log_gain);

    m.def(
        "cwt",
        [](const std::vector<double>& signal, double dt, const tf::WsstConfig& config) {
            auto r = tf::cwt(signal, dt, config);
            return py::make_tuple(r.coeffs, r.freqs);
        },
        py::arg("signal"), py::arg("dt"), py::arg("config") = tf::WsstConfig{},
        "Returns (coefficients scales x time, scale frequencies in Hz).");
    m.def(
        "wsst",
        [](const std::vector<double>& signal, double dt, const tf::WsstConfig& config) {
            auto r = tf::wsst(signal, dt, config);
            Eigen::VectorXd centers(r.n_bins());
            for (int k = 0; k < r.n_bins(); ++k) centers(k) = r.bin_center(k);
            return py::make_tuple(r.values, centers);
        },
        py::arg("signal"), py::arg("dt"), py::arg("config") = tf::WsstConfig{},
        "Returns (synchrosqueezed values bins x time, bin centres in Hz).");

    py::class_<tf::TfImage>(m, "TfImage")
        .def_readonly("height", &tf::TfImage::height)
        .def_readonly("width", &tf::TfImage::width)
        .def_readonly("band_lo", &tf::TfImage::band_lo)
        .def_readonly("band_hi", &tf::TfImage::band_hi)
        .def_readonly("duration", &tf::TfImage::duration)
        .def_readonly("degenerate", &tf::TfImage::degenerate)
        .def_readonly("source_id", &tf::TfImage::source_id)
        .def("matrix", &tf::TfImage::matrix, "Pixels as height x width, row 0 = lowest frequency.")
        .def("flat", [](const tf::TfImage& img) {
            return Eigen::Map<const Eigen::VectorXf>(img.pixels.data(), img.pixels.size()).cast<double>().eval();
        });

    m.def(
        "signal_image",
        [](const std::vector<double>& signal, double dt, const tf::WsstConfig& config, const tf::ImageOptions& options) {
            py::gil_scoped_release release;
            return tf::signal_image(signal, dt, config, options);
        },
        py::arg("signal"), py::arg("dt"), py::arg("config") = tf::WsstConfig{},
        py::arg("options") = tf::ImageOptions{});
    m.def("read_tf_image", &tf::read_tf_image, py::arg("path"));
    m.def("write_tf_image", &tf::write_tf_image, py::arg("path"), py::arg("image"));
}

void bind_cvae(py::module_& m) {
    py::class_<cvae::CvaeArch>(m, "CvaeArch")
        .def(py::init<>())
        .def(py::init([](int image_size, std::vector<int> channels, int latent) {
                 cvae::CvaeArch a;
                 a.image_size = image_size;
                 a.channels = std::move(channels);
                 a.latent = latent;
                 return a;
             }),
             py::arg("image_size"), py::arg("channels"), py::arg("latent"))
        .def_readwrite("image_size", &cvae::CvaeArch::image_size)
        .def_readwrite("channels", &cvae::CvaeArch::channels)
        .def_readwrite("kernel", &cvae::CvaeArch::kernel)
        .def_readwrite("latent", &cvae::CvaeArch::latent)
        .def("to_json", &cvae::CvaeArch::to_json)
        .def("validate", &cvae::CvaeArch::validate);

    py::class_<cvae::TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("epochs", &cvae::TrainConfig::epochs)
        .def_readwrite("batch_size", &cvae::TrainConfig::batch_size)
        .def_readwrite("learning_rate", &cvae::TrainConfig::learning_rate)
        .def_readwrite("beta_kl", &cvae::TrainConfig::beta_kl)
        .def_readwrite("seed", &cvae::TrainConfig::seed);

    py::class_<cvae::ElboTerms>(m, "ElboTerms")
        .def_readonly("total", &cvae::ElboTerms::total)
        .def_readonly("reconstruction", &cvae::ElboTerms::reconstruction)
        .def_readonly("kl", &cvae::ElboTerms::kl);

    m.def("elbo_loss", &cvae::elbo_loss, py::arg("x"), py::arg("x_rec"), py::arg("mu"), py::arg("sigma"),
          py::arg("beta_kl") = 1.0);

    py::class_<cvae::Cvae>(m, "Cvae")
        .def(py::init<const cvae::CvaeArch&, std::uint64_t>(), py::arg("arch"), py::arg("seed") = 0)
        .def_property_readonly("arch", &cvae::Cvae::arch)
        .def_property_readonly("n_parameters", [](const cvae::Cvae& c) { return c.parameters().size(); })
        .def(
            "reconstruct",
            [](const cvae::Cvae& c, const Eigen::VectorXd& image) {
                auto r = c.reconstruct(image);
                return py::make_tuple(r.image, r.mu, r.sigma);
            },
            py::arg("image"), "Mean-mode reconstruction: (image, mu, sigma).")
        .def("save", &cvae::Cvae::save, py::arg("path"))
        .def_static("load", &cvae::Cvae::load, py::arg("path"));

    m.def(
        "train",
        [](cvae::Cvae& model, const std::vector<Eigen::VectorXd>& images, const cvae::TrainConfig& config) {
            py::gil_scoped_release release;
            auto report = cvae::train(model, images, config);
            std::vector<double> losses;
            for (const auto& e : report.epochs) losses.push_back(e.total);
            return losses;
        },
        py::arg("model"), py::arg("images"), py::arg("config"), "Trains in place; returns the per-epoch mean loss.");
    m.def("damage_index", &cvae::damage_index, py::arg("model"), py::arg("image"));
    m.def("percentile", &cvae::percentile, py::arg("values"), py::arg("p"));
    m.def(
        "calibrate_threshold",
        [](const std::vector<double>& di, double pct) { return cvae::calibrate_threshold(di, pct).threshold; },
        py::arg("validation_di"), py::arg("percentile") = 90.0);
    m.def(
        "sensing_accuracy",
        [](const std::vector<double>& di, const std::vector<bool>& damaged, double gamma) {
            if (di.size() != damaged.size()) throw DomainError("di and labels differ in length");
            std::vector<cvae::Label> pred, truth;
            for (std::size_t i = 0; i < di.size(); ++i) {
                pred.push_back(cvae::classify(di[i], gamma));
                truth.push_back(damaged[i] ? cvae::Label::Damaged : cvae::Label::Healthy);
            }
            return cvae::sensing_accuracy(pred, truth);
        },
        py::arg("di"), py::arg("damaged"), py::arg("threshold"),
        "Fraction of samples whose DI > threshold decision matches the label.");
}

void bind_opt(py::module_& m) {
    py::class_<opt::KrigingOptions>(m, "KrigingOptions")
        .def(py::init<>())
        .def_readwrite("nugget", &opt::KrigingOptions::nugget)
        .def_readwrite("n_starts", &opt::KrigingOptions::n_starts)
        .def_readwrite("seed", &opt::KrigingOptions::seed);

    py::class_<opt::KrigingModel>(m, "KrigingModel")
        .def_static("fit", &opt::KrigingModel::fit, py::arg("X"), py::arg("y"),
                    py::arg("options") = opt::KrigingOptions{})
        .def(
            "predict",
            [](const opt::KrigingModel& k, const Eigen::VectorXd& x) {
                auto p = k.predict(x);
                return py::make_tuple(p.mean, p.variance, p.extrapolated);
            },
            py::arg("x"), "(mean, variance, extrapolated)")
        .def("mean", &opt::KrigingModel::mean, py::arg("x"))
        .def_property_readonly("theta", &opt::KrigingModel::theta)
        .def_property_readonly("nugget", &opt::KrigingModel::nugget)
        .def_property_readonly("log_likelihood", &opt::KrigingModel::log_likelihood);

    m.def("leave_one_out_rmse", &opt::leave_one_out_rmse, py::arg("X"), py::arg("y"),
          py::arg("options") = opt::KrigingOptions{});
    m.def("dominates", &opt::dominates, py::arg("a"), py::arg("b"));
    m.def("fast_nondominated_sort", &opt::fast_nondominated_sort, py::arg("points"));
    m.def("crowding_distance", &opt::crowding_distance, py::arg("points"), py::arg("front"));
    m.def("hypervolume_2d", &opt::hypervolume_2d, py::arg("points"), py::arg("reference"));

    py::class_<opt::Nsga2Options>(m, "Nsga2Options")
        .def(py::init<>())
        .def_readwrite("population", &opt::Nsga2Options::population)
        .def_readwrite("generations", &opt::Nsga2Options::generations)
        .def_readwrite("eta_crossover", &opt::Nsga2Options::eta_crossover)
        .def_readwrite("eta_mutation", &opt::Nsga2Options::eta_mutation)
        .def_readwrite("seed", &opt::Nsga2Options::seed);

    py::class_<opt::ParetoPoint>(m, "ParetoPoint")
        .def_readonly("x", &opt::ParetoPoint::x)
        .def_readonly("f", &opt::ParetoPoint::f)
        .def_readonly("generation", &opt::ParetoPoint::generation);
    py::class_<opt::ParetoSet>(m, "ParetoSet")
        .def_readonly("points", &opt::ParetoSet::points)
        .def_readonly("hypervolume_history", &opt::ParetoSet::hypervolume_history)
        .def_readonly("evaluations", &opt::ParetoSet::evaluations);

    m.def("nsga2", &opt::nsga2, py::arg("objective"), py::arg("lo"), py::arg("hi"),
          py::arg("options") = opt::Nsga2Options{}, "Maximizes every component of objective(x).");
}

void bind_pipeline(py::module_& m) {
    using namespace sehs::pipeline;

    py::class_<ExperimentConfig>(m, "ExperimentConfig")
        .def_static("preset", &ExperimentConfig::preset, py::arg("name"))
        .def_static("preset_names", &ExperimentConfig::preset_names)
        .def_static("from_json", &ExperimentConfig::from_json, py::arg("text"))
        .def_static("load", &ExperimentConfig::load, py::arg("path"))
        .def("to_json", &ExperimentConfig::to_json)
        .def("save", &ExperimentConfig::save, py::arg("path"))
        .def("validate", &ExperimentConfig::validate)
        .def_readwrite("name", &ExperimentConfig::name)
        .def_readwrite("threads", &ExperimentConfig::threads);

    py::class_<PhaseStatus>(m, "PhaseStatus")
        .def_readonly("partial", &PhaseStatus::partial)
        .def_readonly("warnings", &PhaseStatus::warnings);
    py::class_<Phase1Result>(m, "Phase1Result")
        .def_readonly("status", &Phase1Result::status)
        .def_readonly("passages", &Phase1Result::passages)
        .def_readonly("quarantined", &Phase1Result::quarantined)
        .def_readonly("designs", &Phase1Result::designs);
    py::class_<Phase2Result>(m, "Phase2Result")
        .def_readonly("status", &Phase2Result::status)
        .def_readonly("images", &Phase2Result::images)
        .def_readonly("degenerate", &Phase2Result::degenerate);
    py::class_<Phase3Result>(m, "Phase3Result")
        .def_readonly("status", &Phase3Result::status)
        .def_readonly("models", &Phase3Result::models)
        .def_readonly("failed_designs", &Phase3Result::failed_designs);
    py::class_<SensingRow>(m, "SensingRow")
        .def_readonly("design_id", &SensingRow::design_id)
        .def_readonly("length", &SensingRow::length)
        .def_readonly("aspect_ratio", &SensingRow::aspect_ratio)
        .def_readonly("mean", &SensingRow::mean)
        .def_readonly("stddev", &SensingRow::stddev)
        .def_readonly("per_seed", &SensingRow::per_seed);
    py::class_<Phase4Result>(m, "Phase4Result")
        .def_readonly("status", &Phase4Result::status)
        .def_readonly("pareto", &Phase4Result::pareto)
        .def_readonly("energy_loo_rmse", &Phase4Result::energy_loo_rmse)
        .def_readonly("sensing_loo_rmse", &Phase4Result::sensing_loo_rmse);
    py::class_<ReportResult>(m, "ReportResult")
        .def_readonly("status", &ReportResult::status)
        .def_readonly("files", &ReportResult::files)
        .def_readonly("gaps", &ReportResult::gaps);

    m.def(
        "run_phase1",
        [](const ExperimentConfig& c, const std::string& dir) {
            py::gil_scoped_release release;
            return run_phase1(c, dir);
        },
        py::arg("config"), py::arg("run_dir"));
    m.def(
        "run_phase2",
        [](const std::string& dir) {
            py::gil_scoped_release release;
            return run_phase2(dir);
        },
        py::arg("run_dir"));
    m.def(
        "run_phase3_train",
        [](const std::string& dir) {
            py::gil_scoped_release release;
            return run_phase3_train(dir);
        },
        py::arg("run_dir"));
    m.def(
        "run_phase3_evaluate",
        [](const std::string& dir) {
            py::gil_scoped_release release;
            return run_phase3_evaluate(dir);
        },
        py::arg("run_dir"));
    m.def(
        "run_phase4",
        [](const std::string& dir) {
            py::gil_scoped_release release;
            return run_phase4(dir);
        },
        py::arg("run_dir"));
    m.def("report", &report, py::arg("run_dir"));
    m.def("verify_manifest", &verify_manifest, py::arg("run_dir"), py::arg("phase"));

    py::class_<PowerBudget>(m, "PowerBudget")
        .def(py::init<>())
        .def_readwrite("name", &PowerBudget::name)
        .def_readwrite("p_sensing_uw", &PowerBudget::p_sensing_uw)
        .def_readwrite("p_sample_uw", &PowerBudget::p_sample_uw)
        .def_readwrite("p_sleep_uw", &PowerBudget::p_sleep_uw)
        .def_readwrite("t_sample_s", &PowerBudget::t_sample_s)
        .def_readwrite("t_sleep_s", &PowerBudget::t_sleep_s);
    m.def("energy_consumption", &energy_consumption, py::arg("budget"));
    m.def("reference_power_budgets", &reference_power_budgets, py::arg("t_sleep_s") = 300.0);
    m.def("linspace", &linspace, py::arg("lo"), py::arg("hi"), py::arg("count"));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Smart energy-harvesting sensing core";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<DomainError>(m, "DomainError", base.ptr());
    py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

    auto vbi_m = m.def_submodule("vbi", "Vehicle-bridge interaction");
    bind_vbi(vbi_m);
    auto peh_m = m.def_submodule("peh", "Piezoelectric energy harvester");
    bind_peh(peh_m);
    auto tf_m = m.def_submodule("tf", "Time-frequency transforms and images");
    bind_tf(tf_m);
    auto cvae_m = m.def_submodule("cvae", "Variational autoencoder damage detector");
    bind_cvae(cvae_m);
    auto opt_m = m.def_submodule("opt", "Kriging and NSGA-II");
    bind_opt(opt_m);
    auto pipe_m = m.def_submodule("pipeline", "Four-phase experiment driver");
    bind_pipeline(pipe_m);
}
