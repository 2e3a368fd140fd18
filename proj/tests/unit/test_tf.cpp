#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "sehs/bridge.hpp"
#include "sehs/errors.hpp"
#include "sehs/peh.hpp"
#include "sehs/tf.hpp"

using namespace sehs;
using namespace sehs::tf;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<double> tone(double f, double dt, int n, double amp = 1.0, double phase = 0.0) {
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i) x[i] = amp * std::sin(2.0 * kPi * f * i * dt + phase);
    return x;
}

// Energy fraction of the analysis band within +-1 bin of `row`.
double concentration(const TfMatrix& m, int rows, int row) {
    const Eigen::VectorXd e = m.values.topRows(rows).cwiseAbs2().rowwise().sum();
    double near = 0.0;
    for (int k = std::max(0, row - 1); k <= std::min(rows - 1, row + 1); ++k) near += e(k);
    return near / m.values.cwiseAbs2().sum();
}

int dominant_row(const Eigen::MatrixXd& m) {
    Eigen::Index k = 0;
    m.rowwise().sum().maxCoeff(&k);
    return static_cast<int>(k);
}

}  // namespace

TEST_CASE("cwt localizes tones") {
    const WsstConfig cfg;
    const double dt = 0.005;
    const int n = 2000;

    SUBCASE("pure tone peaks at the scale of its frequency") {
        const auto c = cwt(tone(5.0, dt, n), dt, cfg);
        const Eigen::VectorXd mag = c.coeffs.middleCols(n / 4, n / 2).cwiseAbs().rowwise().mean();
        Eigen::Index best = 0;
        mag.maxCoeff(&best);
        CHECK(std::abs(c.freqs[best] - 5.0) <= cfg.bin_width());
    }
    SUBCASE("zero signal gives zero coefficients") {
        const auto c = cwt(std::vector<double>(n, 0.0), dt, cfg);
        CHECK(c.coeffs.cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("equal tones at 4 and 16 Hz: ridge peak ratio follows the scale normalization") {
        std::vector<double> x = tone(4.0, dt, n);
        const auto x2 = tone(16.0, dt, n);
        for (int i = 0; i < n; ++i) x[i] += x2[i];
        // A unit tone gives |W| = 0.5 a^{1/2} |psi_hat(a w)| under a^{-1/2} and
        // 0.5 |psi_hat(a w)| under a^{-1}; the ridge sits at the same a w for both tones.
        for (auto [norm, expected] : {std::pair{WaveletNorm::L2, 2.0}, std::pair{WaveletNorm::L1, 1.0}}) {
            WsstConfig c2 = cfg;
            c2.norm = norm;
            const auto c = cwt(x, dt, c2);
            const Eigen::VectorXd mag = c.coeffs.middleCols(n / 4, n / 2).cwiseAbs().rowwise().mean();
            double p4 = 0.0, p16 = 0.0;
            for (std::size_t s = 0; s < c.freqs.size(); ++s) {
                if (c.freqs[s] < 9.0) p4 = std::max(p4, mag(s));
                else p16 = std::max(p16, mag(s));
            }
            CHECK(p4 / p16 == doctest::Approx(expected).epsilon(0.10));
        }
    }
    SUBCASE("short records and bad steps are rejected") {
        CHECK_THROWS_AS(cwt(std::vector<double>(32, 1.0), dt, cfg), DomainError);
        CHECK_THROWS_AS(cwt(tone(5.0, dt, n), 0.0, cfg), DomainError);
        CHECK_THROWS_AS(cwt(tone(5.0, dt, 100), dt, cfg), DomainError);
    }
}

TEST_CASE("synchrosqueezing concentrates energy") {
    const WsstConfig cfg;
    const double dt = 0.005;
    const int n = 2000;

    SUBCASE("pure tones put at least 90% of the energy within one bin") {
        for (double f : {3.0, 5.0, 11.3, 17.0}) {
            const auto m = wsst(tone(f, dt, n), dt, cfg);
            CHECK(concentration(m, cfg.freq_bins, m.bin_of(f)) >= 0.90);
        }
    }
    SUBCASE("linear chirp ridge follows the instantaneous frequency") {
        const double f0 = 2.0, f1 = 18.0;
        const int len = 4000;
        const double T = len * dt;
        std::vector<double> x(len);
        for (int i = 0; i < len; ++i) {
            const double t = i * dt;
            x[i] = std::sin(2.0 * kPi * (f0 * t + 0.5 * (f1 - f0) / T * t * t));
        }
        const auto m = wsst(x, dt, cfg);
        int misses = 0, total = 0;
        for (int col = len / 10; col < len - len / 10; ++col) {
            Eigen::Index row = 0;
            m.values.col(col).head(cfg.freq_bins).cwiseAbs().maxCoeff(&row);
            const double fi = f0 + (f1 - f0) * col * dt / T;
            ++total;
            if (std::abs(static_cast<int>(row) - m.bin_of(fi)) > 1) ++misses;
        }
        CHECK(misses == 0);
        CHECK(total > 0);
    }
    SUBCASE("zero signal gives a zero matrix") {
        const auto m = wsst(std::vector<double>(n, 0.0), dt, cfg);
        CHECK(m.energy() == 0.0);
    }
    SUBCASE("matrix energy grows with amplitude") {
        double prev = 0.0;
        for (double a : {0.1, 0.5, 1.0, 3.0}) {
            const double e = wsst(tone(6.0, dt, n, a), dt, cfg).energy();
            CHECK(e >= prev);
            prev = e;
        }
    }
}

TEST_CASE("image rasterization") {
    const WsstConfig cfg;
    const double dt = 0.005;
    const int n = 2000;

    SUBCASE("pixels lie in [0, 1]") {
        const auto img = signal_image(tone(7.0, dt, n), dt, cfg);
        CHECK(img.height == 128);
        CHECK(img.width == 128);
        for (float p : img.pixels) {
            CHECK(p >= 0.0f);
            CHECK(p <= 1.0f);
        }
    }
    SUBCASE("constant matrix maps to zero") {
        TfMatrix m;
        m.values = Eigen::MatrixXcd::Constant(cfg.freq_bins, 300, {2.0, 0.0});
        m.bin_width = cfg.bin_width();
        m.dt = dt;
        const auto img = to_image(m);
        for (float p : img.pixels) CHECK(p == 0.0f);
    }
    SUBCASE("zero matrix is flagged degenerate") {
        const auto img = signal_image(std::vector<double>(n, 0.0), dt, cfg);
        CHECK(img.degenerate);
        for (float p : img.pixels) CHECK(p == 0.0f);
    }
    SUBCASE("a 25 Hz tone leaves the 0-20 Hz image nearly empty") {
        const auto m = wsst(tone(25.0, dt, n), dt, cfg);
        const double in_band = m.values.topRows(cfg.freq_bins).cwiseAbs2().sum();
        CHECK(in_band < 1e-3 * m.energy());
        // The image reference includes the guard band, so leakage is not stretched to full scale.
        ImageOptions opts;
        opts.log_gain = 1.0;
        auto pixel_energy = [](const TfImage& img) {
            double e = 0.0;
            for (float p : img.pixels) e += double(p) * p;
            return e;
        };
        const double out = pixel_energy(to_image(m, opts));
        const double in = pixel_energy(signal_image(tone(7.0, dt, n), dt, cfg, opts));
        CHECK(out < 1e-2 * in);
    }
    SUBCASE("scaling the signal leaves the image unchanged") {
        const auto a = signal_image(tone(7.0, dt, n), dt, cfg);
        const auto b = signal_image(tone(7.0, dt, n, 37.5), dt, cfg);
        double worst = 0.0;
        for (std::size_t i = 0; i < a.pixels.size(); ++i) worst = std::max(worst, double(std::abs(a.pixels[i] - b.pixels[i])));
        CHECK(worst < 1e-6);
    }
    SUBCASE("time shift moves the columns") {
        // Gaussian burst; shifting it by 200 samples shifts the image by width * 200 / n columns.
        auto burst = [&](int center) {
            std::vector<double> x(n);
            for (int i = 0; i < n; ++i) {
                const double u = (i - center) * dt;
                x[i] = std::exp(-u * u / (2.0 * 0.3 * 0.3)) * std::sin(2.0 * kPi * 8.0 * i * dt);
            }
            return x;
        };
        ImageOptions opts;
        opts.width = 100;
        const auto a = signal_image(burst(800), dt, cfg, opts);
        const auto b = signal_image(burst(1000), dt, cfg, opts);
        const int shift = 10;
        double worst = 0.0;
        for (int r = 0; r < a.height; ++r) {
            for (int c = 20; c + shift < 80; ++c) worst = std::max(worst, double(std::abs(a.at(r, c) - b.at(r, c + shift))));
        }
        CHECK(worst < 0.02);
    }
    SUBCASE("file round trip") {
        const auto img = signal_image(tone(7.0, dt, n), dt, cfg, {}, "probe/tone");
        const auto path = (std::filesystem::temp_directory_path() / "sehs_tf_roundtrip.tfi").string();
        write_tf_image(path, img);
        const auto back = read_tf_image(path);
        std::remove(path.c_str());
        CHECK(back.height == img.height);
        CHECK(back.width == img.width);
        CHECK(back.source_id == "probe/tone");
        CHECK(back.band_hi == img.band_hi);
        CHECK(back.pixels == img.pixels);
    }
    SUBCASE("invalid configuration") {
        WsstConfig bad = cfg;
        bad.n_scales = 8;
        CHECK_THROWS_AS(wsst(tone(5.0, dt, n), dt, bad), DomainError);
        bad = cfg;
        bad.freq_bins = 16;
        CHECK_THROWS_AS(wsst(tone(5.0, dt, n), dt, bad), DomainError);
    }
}

TEST_CASE("healthy and DMN1 voltage images differ in their dominant row") {
    // Smooth road: the free bridge mode dominates the harvester voltage.
    const auto beam = vbi::BeamModel::reference();
    const auto healthy = vbi::assemble_beam(beam);
    const auto damaged = vbi::assemble_beam(beam, vbi::crack_for(vbi::DamageState::DMN1, beam));
    auto r = peh::build_reduced(peh::PehDesign{});
    r = peh::with_load_resistance(r, peh::select_load_resistance(r));
    const auto vehicles = vbi::sample_vehicle_params(3, {}, 5);
    const WsstConfig cfg;
    ImageOptions opts;
    opts.log_gain = 1.0;
    for (int i = 0; i < 3; ++i) {
        const auto road = vbi::generate_road_profile(vbi::RoadClass::NR, 25.0, 100 + i);
        const auto ph = vbi::simulate_passage(healthy, vehicles[i], road, 0.001, 12.5);
        const auto pd = vbi::simulate_passage(damaged, vehicles[i], road, 0.001, 12.5);
        const auto ih = signal_image(peh::simulate_voltage(r, ph).volts, ph.dt, cfg, opts);
        const auto id = signal_image(peh::simulate_voltage(r, pd).volts, pd.dt, cfg, opts);
        const int rh = dominant_row(ih.matrix());
        const int rd = dominant_row(id.matrix());
        CHECK(rh - rd >= 1);
        CHECK(std::abs(rh * 20.0 / 128 - 4.8) < 0.3);
    }
}
