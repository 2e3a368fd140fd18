#include "sehs/tf.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include <unsupported/Eigen/FFT>

#ifdef SEHS_HAVE_PNG
#include <png.h>
#endif

#include "sehs/errors.hpp"

namespace sehs::tf {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace

void WsstConfig::validate() const {
    if (!(morlet_center > 0.0)) throw DomainError("WsstConfig: Morlet center frequency must be positive");
    if (n_scales < 16) throw DomainError("WsstConfig: n_scales must be >= 16");
    if (!(gamma_threshold > 0.0 && gamma_threshold < 1.0)) throw DomainError("WsstConfig: gamma must lie in (0, 1)");
    if (freq_bins < 32) throw DomainError("WsstConfig: freq_bins must be >= 32");
    if (!(band_lo >= 0.0 && band_hi > band_lo)) throw DomainError("WsstConfig: invalid frequency band");
    if (!(min_freq > 0.0)) throw DomainError("WsstConfig: min_freq must be positive");
    if (!(top_factor >= 1.0)) throw DomainError("WsstConfig: top_factor must be >= 1");
    if (!(min_freq < top_factor * band_hi)) throw DomainError("WsstConfig: min_freq above the top scale frequency");
}

void ImageOptions::validate() const {
    if (height < 2 || width < 2) throw DomainError("ImageOptions: image must be at least 2 x 2");
    if (!(band_hi > band_lo && band_lo >= 0.0)) throw DomainError("ImageOptions: invalid frequency band");
    if (!(log_gain > 0.0)) throw DomainError("ImageOptions: log gain must be positive");
    if (global_reference < 0.0) throw DomainError("ImageOptions: global reference must be >= 0");
}

CwtResult cwt(const std::vector<double>& x, double dt, const WsstConfig& cfg, bool with_derivative) {
    cfg.validate();
    if (!(dt > 0.0)) throw DomainError("cwt: dt must be positive");
    const std::size_t n = x.size();
    if (n < 64) throw DomainError("cwt: signal must have at least 64 samples");
    const double duration = dt * static_cast<double>(n);
    if (duration < 2.0 / cfg.min_freq) {
        throw DomainError("cwt: record of " + std::to_string(duration) + " s cannot resolve " +
                          std::to_string(cfg.min_freq) + " Hz (need two periods)");
    }
    const double f_top = cfg.top_factor * cfg.band_hi;
    if (f_top >= 0.5 / dt) {
        throw DomainError("cwt: analysis band exceeds the Nyquist frequency");
    }

    const std::size_t pad = cfg.padding == Padding::Symmetric ? n / 2 : 0;
    const std::size_t np = next_pow2(2 * n);
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> padded(np, 0.0);
    for (std::size_t i = 0; i < n; ++i) padded[pad + i] = x[i];
    for (std::size_t i = 0; i < pad; ++i) {
        padded[pad - 1 - i] = x[i];
        padded[pad + n + i] = x[n - 1 - i];
    }
    std::vector<std::complex<double>> X;
    fft.fwd(X, padded);

    std::vector<double> omega(np);
    for (std::size_t k = 0; k < np; ++k) {
        const double kk = k <= np / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(np);
        omega[k] = 2.0 * kPi * kk / (static_cast<double>(np) * dt);
    }

    CwtResult out;
    out.dt = dt;
    const int ns = cfg.n_scales;
    out.coeffs.resize(ns, static_cast<Eigen::Index>(n));
    if (with_derivative) out.derivative.resize(ns, static_cast<Eigen::Index>(n));
    const double w0 = cfg.morlet_center;
    const double lmin = std::log(cfg.min_freq);
    const double lmax = std::log(f_top);
    std::vector<std::complex<double>> buf(np), res;
    for (int s = 0; s < ns; ++s) {
        const double f = std::exp(lmin + (lmax - lmin) * s / (ns - 1));
        const double a = w0 / (2.0 * kPi * f);
        out.freqs.push_back(f);
        out.scales.push_back(a);
        // Peak of the analytic Morlet spectrum scaled to 2 so a unit cosine gives |W| = 1 (L1).
        const double norm = cfg.norm == WaveletNorm::L2 ? std::sqrt(a) : 1.0;
        for (std::size_t k = 0; k < np; ++k) {
            const double u = a * omega[k];
            buf[k] = u > 0.0 ? X[k] * (2.0 * norm * std::exp(-0.5 * (u - w0) * (u - w0))) : 0.0;
        }
        fft.inv(res, buf);
        for (std::size_t i = 0; i < n; ++i) out.coeffs(s, static_cast<Eigen::Index>(i)) = res[pad + i];
        if (with_derivative) {
            for (std::size_t k = 0; k < np; ++k) buf[k] *= std::complex<double>(0.0, omega[k]);
            fft.inv(res, buf);
            for (std::size_t i = 0; i < n; ++i) out.derivative(s, static_cast<Eigen::Index>(i)) = res[pad + i];
        }
    }
    return out;
}

int TfMatrix::bin_of(double f) const {
    if (bin_width <= 0.0) return -1;
    const double pos = (f - band_lo) / bin_width;
    if (pos < 0.0) return -1;
    const auto k = static_cast<int>(std::floor(pos));
    return k < n_bins() ? k : -1;
}

TfMatrix wsst(const std::vector<double>& x, double dt, const WsstConfig& cfg) {
    const CwtResult w = cwt(x, dt, cfg, true);
    TfMatrix out;
    out.dt = dt;
    out.band_lo = cfg.band_lo;
    out.bin_width = cfg.bin_width();
    const double f_top = cfg.top_factor * cfg.band_hi;
    const int bins = std::max(cfg.freq_bins, static_cast<int>(std::ceil((f_top - cfg.band_lo) / out.bin_width)));
    const auto n = w.coeffs.cols();
    out.values = Eigen::MatrixXcd::Zero(bins, n);

    const double wmax = w.coeffs.cwiseAbs().maxCoeff();
    if (wmax == 0.0) {
        return out;
    }
    const double threshold = cfg.gamma_threshold * wmax;
    // Log-spaced scales: da / a is the constant step in log a.
    const double dlog = std::abs(std::log(w.scales.front() / w.scales.back())) / (cfg.n_scales - 1);
    for (int s = 0; s < cfg.n_scales; ++s) {
        for (Eigen::Index b = 0; b < n; ++b) {
            const std::complex<double> c = w.coeffs(s, b);
            if (std::abs(c) <= threshold) continue;
            const double f_inst = std::imag(w.derivative(s, b) / c) / (2.0 * kPi);
            const int k = out.bin_of(f_inst);
            if (k < 0) continue;
            out.values(k, b) += c * dlog;
        }
    }
    return out;
}

Eigen::MatrixXd TfImage::matrix() const {
    Eigen::MatrixXd m(height, width);
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c) m(r, c) = at(r, c);
    return m;
}

TfImage to_image(const TfMatrix& tfm, const ImageOptions& opt) {
    opt.validate();
    TfImage img;
    img.height = opt.height;
    img.width = opt.width;
    img.band_lo = opt.band_lo;
    img.band_hi = opt.band_hi;
    img.duration = tfm.dt * static_cast<double>(std::max<Eigen::Index>(tfm.values.cols() - 1, 0));
    img.pixels.assign(static_cast<std::size_t>(opt.height) * opt.width, 0.0f);

    if (tfm.bin_width <= 0.0 || tfm.values.cols() < 2) {
        throw DomainError("to_image: empty time-frequency matrix");
    }
    const double eps = 1e-9 * tfm.bin_width;
    if (opt.band_lo < tfm.band_lo - eps || opt.band_hi > tfm.band_lo + tfm.n_bins() * tfm.bin_width + eps) {
        throw DomainError("to_image: matrix does not cover the requested band");
    }
    const int r0 = static_cast<int>(std::lround((opt.band_lo - tfm.band_lo) / tfm.bin_width));
    const int r1 = std::min(tfm.n_bins(), static_cast<int>(std::lround((opt.band_hi - tfm.band_lo) / tfm.bin_width)));
    const int rows = r1 - r0;
    if (rows < 2) {
        throw DomainError("to_image: band covers fewer than two frequency bins");
    }
    Eigen::MatrixXd mag = tfm.values.middleRows(r0, rows).cwiseAbs();
    const double all_max = tfm.values.cwiseAbs().maxCoeff();
    const double band_max = mag.maxCoeff();
    if (all_max == 0.0 || band_max <= opt.degenerate_ratio * all_max) {
        img.degenerate = true;
        return img;
    }
    // Reference is the maximum of the whole matrix, guard band included, so a
    // record whose energy sits above the band does not get stretched to full scale.
    const double ref = opt.global_reference > 0.0 ? opt.global_reference : all_max;
    const double denom = std::log1p(opt.log_gain);
    mag = ((mag / ref).cwiseMin(1.0) * opt.log_gain).array().log1p() / denom;
    if (opt.global_reference <= 0.0) {
        const double lo = mag.minCoeff();
        const double hi = 1.0;
        if (hi - lo > 1e-12) {
            mag = (mag.array() - lo) / (hi - lo);
        } else {
            mag.setZero();
        }
    }

    const auto cols = mag.cols();
    for (int i = 0; i < opt.height; ++i) {
        const double y = static_cast<double>(i) * (rows - 1) / (opt.height - 1);
        const int y0 = std::min(static_cast<int>(y), rows - 2);
        const double fy = y - y0;
        for (int j = 0; j < opt.width; ++j) {
            const double xx = static_cast<double>(j) * static_cast<double>(cols - 1) / (opt.width - 1);
            const auto x0 = std::min(static_cast<Eigen::Index>(xx), cols - 2);
            const double fx = xx - static_cast<double>(x0);
            const double v = (1 - fy) * ((1 - fx) * mag(y0, x0) + fx * mag(y0, x0 + 1)) +
                             fy * ((1 - fx) * mag(y0 + 1, x0) + fx * mag(y0 + 1, x0 + 1));
            img.pixels[static_cast<std::size_t>(i) * opt.width + j] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    }
    return img;
}

TfImage signal_image(const std::vector<double>& signal, double dt, const WsstConfig& config, ImageOptions options,
                     const std::string& source_id) {
    options.band_lo = config.band_lo;
    options.band_hi = config.band_hi;
    TfImage img = to_image(wsst(signal, dt, config), options);
    img.source_id = source_id;
    return img;
}

void write_tf_image(const std::string& path, const TfImage& image) {
    nlohmann::json h;
    h["height"] = image.height;
    h["width"] = image.width;
    h["band"] = {image.band_lo, image.band_hi};
    h["duration"] = image.duration;
    h["source"] = image.source_id;
    h["degenerate"] = image.degenerate;
    h["dtype"] = "float32le";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DomainError("write_tf_image: cannot open " + path);
    out << h.dump() << '\n';
    for (float v : image.pixels) {
        std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
        if constexpr (std::endian::native == std::endian::big) {
            bits = ((bits & 0xFFu) << 24) | ((bits & 0xFF00u) << 8) | ((bits >> 8) & 0xFF00u) | (bits >> 24);
        }
        out.write(reinterpret_cast<const char*>(&bits), 4);
    }
    if (!out) throw DomainError("write_tf_image: write failed for " + path);
}

TfImage read_tf_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DomainError("read_tf_image: cannot open " + path);
    std::string line;
    std::getline(in, line);
    nlohmann::json h;
    try {
        h = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
        throw DomainError("read_tf_image: bad header in " + path + ": " + e.what());
    }
    TfImage img;
    img.height = h.at("height").get<int>();
    img.width = h.at("width").get<int>();
    img.band_lo = h.at("band").at(0).get<double>();
    img.band_hi = h.at("band").at(1).get<double>();
    img.duration = h.value("duration", 0.0);
    img.source_id = h.value("source", std::string());
    img.degenerate = h.value("degenerate", false);
    if (img.height <= 0 || img.width <= 0) throw DomainError("read_tf_image: bad dimensions in " + path);
    img.pixels.resize(static_cast<std::size_t>(img.height) * img.width);
    for (float& v : img.pixels) {
        std::uint32_t bits = 0;
        in.read(reinterpret_cast<char*>(&bits), 4);
        if constexpr (std::endian::native == std::endian::big) {
            bits = ((bits & 0xFFu) << 24) | ((bits & 0xFF00u) << 8) | ((bits >> 8) & 0xFF00u) | (bits >> 24);
        }
        v = std::bit_cast<float>(bits);
    }
    if (!in) throw DomainError("read_tf_image: truncated pixel data in " + path);
    return img;
}

void write_png(const std::string& path, const TfImage& image) {
#ifdef SEHS_HAVE_PNG
    std::vector<std::uint8_t> buf(image.pixels.size());
    for (int r = 0; r < image.height; ++r) {
        for (int c = 0; c < image.width; ++c) {
            const float v = std::clamp(image.at(r, c), 0.0f, 1.0f);
            buf[static_cast<std::size_t>(image.height - 1 - r) * image.width + c] =
                static_cast<std::uint8_t>(std::lround(255.0f * v));
        }
    }
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(image.width);
    png.height = static_cast<png_uint_32>(image.height);
    png.format = PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&png, path.c_str(), 0, buf.data(), 0, nullptr)) {
        throw DomainError("write_png: " + std::string(png.message));
    }
#else
    (void)path;
    (void)image;
    throw DomainError("write_png: built without PNG support");
#endif
}

}  // namespace sehs::tf
