#pragma once

// Continuous wavelet and synchrosqueezed transforms, and rasterization of the
// result into fixed-size grayscale images.

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sehs::tf {

/// a^{-1/2} (energy) or a^{-1} (amplitude) scale normalization of the wavelet.
enum class WaveletNorm { L2, L1 };

/// Extension of the record before the FFT convolution.
enum class Padding { Zero, Symmetric };

struct WsstConfig {
    double morlet_center = 6.0;      // omega_0 of the analytic Morlet
    int n_scales = 128;
    double gamma_threshold = 1e-4;   // relative to max |W|
    int freq_bins = 128;             // linear bins over [band_lo, band_hi]
    double band_lo = 0.0;            // [Hz]
    double band_hi = 20.0;           // [Hz]
    double min_freq = 2.0;           // lowest scale frequency [Hz]
    double top_factor = 1.25;        // highest scale frequency = top_factor * band_hi
    WaveletNorm norm = WaveletNorm::L2;
    Padding padding = Padding::Zero;  // Symmetric mirrors n/2 samples on each side

    double bin_width() const { return (band_hi - band_lo) / freq_bins; }
    void validate() const;
};

struct CwtResult {
    Eigen::MatrixXcd coeffs;       // scales x time
    Eigen::MatrixXcd derivative;   // d/db of coeffs (empty unless requested)
    std::vector<double> scales;    // [s], ascending frequency order
    std::vector<double> freqs;     // omega_0 / (2 pi a) [Hz]
    double dt = 0.0;
};

/// FFT-based CWT with the analytic Morlet, log-spaced scales from min_freq to
/// top_factor * band_hi.
CwtResult cwt(const std::vector<double>& signal, double dt, const WsstConfig& config, bool with_derivative = false);

/// Synchrosqueezed transform: bins x time. Rows are linear frequency bins of
/// width config.bin_width() starting at band_lo and extending to the top scale
/// frequency, so the analysis band is the first config.freq_bins rows.
struct TfMatrix {
    Eigen::MatrixXcd values;
    double band_lo = 0.0;
    double bin_width = 0.0;
    double dt = 0.0;

    int n_bins() const { return static_cast<int>(values.rows()); }
    double bin_center(int k) const { return band_lo + (k + 0.5) * bin_width; }
    /// Nearest bin to f, or -1 outside the matrix.
    int bin_of(double f) const;
    double energy() const { return values.squaredNorm(); }
};

TfMatrix wsst(const std::vector<double>& signal, double dt, const WsstConfig& config);

struct ImageOptions {
    int height = 128;
    int width = 128;
    double band_lo = 0.0;
    double band_hi = 20.0;
    double log_gain = 100.0;          // kappa in log1p(kappa m) / log1p(kappa)
    double global_reference = 0.0;    // > 0: divide by this instead of the per-image max
    double degenerate_ratio = 1e-6;   // in-band max below this fraction of the overall max

    void validate() const;
};

/// Grayscale image, row 0 = lowest frequency, row-major.
struct TfImage {
    int height = 0;
    int width = 0;
    std::vector<float> pixels;
    double band_lo = 0.0;
    double band_hi = 0.0;
    double duration = 0.0;
    std::string source_id;
    bool degenerate = false;

    float at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * width + col]; }
    Eigen::MatrixXd matrix() const;
};

TfImage to_image(const TfMatrix& matrix, const ImageOptions& options = {});

/// wsst + to_image with the band taken from `config`.
TfImage signal_image(const std::vector<double>& signal, double dt, const WsstConfig& config = {},
                     ImageOptions options = {}, const std::string& source_id = "");

/// One JSON header line followed by height*width little-endian float32.
void write_tf_image(const std::string& path, const TfImage& image);
TfImage read_tf_image(const std::string& path);

/// 8-bit grayscale PNG with low frequencies at the bottom. Throws if the
/// library was built without PNG support.
void write_png(const std::string& path, const TfImage& image);

}  // namespace sehs::tf
