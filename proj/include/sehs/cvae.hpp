#pragma once

// Convolutional variational autoencoder for unsupervised damage detection:
// healthy-only training on the ELBO, reconstruction-error damage index,
// percentile threshold and sensing accuracy.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sehs::cvae {

struct CvaeArch {
    int image_size = 128;                 // square, single channel
    std::vector<int> channels{8, 16, 32}; // encoder conv widths; decoder mirrors them
    int kernel = 3;                       // odd; stride 2, padding kernel / 2
    int latent = 16;
    double leaky_slope = 0.01;

    int n_conv() const { return static_cast<int>(channels.size()); }
    int bottleneck_side() const { return image_size >> n_conv(); }
    int bottleneck_size() const { return channels.back() * bottleneck_side() * bottleneck_side(); }
    int n_pixels() const { return image_size * image_size; }

    std::string to_json() const;
    static CvaeArch from_json(const std::string& text);
    void validate() const;
};

struct ElboTerms {
    double total = 0.0;
    double reconstruction = 0.0;  // mean squared pixel error
    double kl = 0.0;              // KL(N(mu, sigma^2) || N(0, I)), summed over latent dims
};

/// Per-sample ELBO; total = reconstruction + beta_kl * kl.
ElboTerms elbo_loss(const Eigen::VectorXd& x, const Eigen::VectorXd& x_rec, const Eigen::VectorXd& mu,
                    const Eigen::VectorXd& sigma, double beta_kl = 1.0);

enum class Sampling { Mean, Stochastic };

struct Reconstruction {
    Eigen::VectorXd image;
    Eigen::VectorXd mu;
    Eigen::VectorXd sigma;
};

class Cvae {
public:
    /// Fan-in scaled uniform initialization, deterministic under seed.
    Cvae(const CvaeArch& arch, std::uint64_t seed);

    const CvaeArch& arch() const { return arch_; }
    std::uint64_t seed() const { return seed_; }

    std::vector<double>& parameters() { return params_; }
    const std::vector<double>& parameters() const { return params_; }

    Reconstruction reconstruct(const Eigen::VectorXd& image, Sampling mode = Sampling::Mean,
                               std::uint64_t noise_seed = 0) const;

    /// y = mu + sigma * eps with the given eps (eps = 0 reproduces the mean mode).
    Reconstruction reconstruct_with_noise(const Eigen::VectorXd& image, const Eigen::VectorXd& eps) const;

    /// Batch-mean ELBO for fixed noise; accumulates the exact gradient into `grad` when given.
    ElboTerms batch_loss(const std::vector<const Eigen::VectorXd*>& batch, const std::vector<Eigen::VectorXd>& eps,
                         double beta_kl, std::vector<double>* grad = nullptr) const;

    void save(const std::string& path) const;
    static Cvae load(const std::string& path);

    struct Layer {
        enum Kind { Conv, TConv, Dense } kind;
        int in_ch, out_ch;        // channels, or features for dense layers
        int in_side, out_side;    // spatial sides (1 for dense)
        std::size_t w_offset, b_offset;
        int fan_in;
    };

private:
    struct Cache;
    void forward(const Eigen::VectorXd& image, const Eigen::VectorXd* eps, Cache& cache) const;

    CvaeArch arch_;
    std::uint64_t seed_;
    std::vector<double> params_;
    std::vector<Layer> encoder_;   // conv stack
    Layer mu_head_{}, logvar_head_{}, dec_dense_{};
    std::vector<Layer> decoder_;   // transpose convs, last one produces the image
};

struct TrainConfig {
    int epochs = 100;
    int batch_size = 32;
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double beta_kl = 1.0;
    std::uint64_t seed = 0;
};

struct TrainReport {
    std::vector<ElboTerms> epochs;  // mean over batches
    int batch_size = 0;
    double learning_rate = 0.0;
    double beta_kl = 1.0;
    std::uint64_t seed = 0;
};

/// Adam on the batch-mean ELBO; shuffling and noise streams drawn from config.seed.
TrainReport train(Cvae& model, const std::vector<Eigen::VectorXd>& images, const TrainConfig& config);

/// Mean squared error between the image and its mean-mode reconstruction.
double damage_index(const Cvae& model, const Eigen::VectorXd& image);

/// Linear-interpolation percentile (rank p/100 * (n - 1)).
double percentile(std::vector<double> values, double p);

struct DetectorCalibration {
    double threshold = 0.0;
    double percentile = 90.0;
    std::string calibration_id;
};

DetectorCalibration calibrate_threshold(const std::vector<double>& validation_di, double pct = 90.0,
                                        const std::string& calibration_id = "");
DetectorCalibration calibrate_threshold(const Cvae& model, const std::vector<Eigen::VectorXd>& validation,
                                        double pct = 90.0, const std::string& calibration_id = "");

enum class Label { Healthy, Damaged };

/// Damaged iff DI > Gamma.
Label classify(double di, double gamma);

double sensing_accuracy(const std::vector<Label>& predicted, const std::vector<Label>& truth);

}  // namespace sehs::cvae
