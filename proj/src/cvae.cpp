#include "sehs/cvae.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include "json.hpp"

#include "sehs/errors.hpp"

namespace sehs::cvae {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using ConstMap = Eigen::Map<const MatrixXd>;
using MutMap = Eigen::Map<MatrixXd>;

constexpr char kMagic[8] = {'S', 'E', 'H', 'S', 'C', 'V', 'A', 'E'};
constexpr std::uint32_t kVersion = 1;

// Columns are output positions (row-major oy * out + ox); rows are (c, ki, kj).
MatrixXd im2col(const MatrixXd& x, int side, int k) {
    const int ch = static_cast<int>(x.rows());
    const int out = side / 2;
    const int pad = k / 2;
    MatrixXd cols = MatrixXd::Zero(ch * k * k, out * out);
    for (int c = 0; c < ch; ++c) {
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                const int row = (c * k + ki) * k + kj;
                for (int oy = 0; oy < out; ++oy) {
                    const int iy = 2 * oy - pad + ki;
                    if (iy < 0 || iy >= side) continue;
                    for (int ox = 0; ox < out; ++ox) {
                        const int ix = 2 * ox - pad + kj;
                        if (ix < 0 || ix >= side) continue;
                        cols(row, oy * out + ox) = x(c, iy * side + ix);
                    }
                }
            }
        }
    }
    return cols;
}

// Adjoint of im2col.
MatrixXd col2im(const MatrixXd& cols, int ch, int side, int k) {
    const int out = side / 2;
    const int pad = k / 2;
    MatrixXd x = MatrixXd::Zero(ch, side * side);
    for (int c = 0; c < ch; ++c) {
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                const int row = (c * k + ki) * k + kj;
                for (int oy = 0; oy < out; ++oy) {
                    const int iy = 2 * oy - pad + ki;
                    if (iy < 0 || iy >= side) continue;
                    for (int ox = 0; ox < out; ++ox) {
                        const int ix = 2 * ox - pad + kj;
                        if (ix < 0 || ix >= side) continue;
                        x(c, iy * side + ix) += cols(row, oy * out + ox);
                    }
                }
            }
        }
    }
    return x;
}

MatrixXd leaky(const MatrixXd& z, double slope) {
    return z.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
}

void leaky_backward(MatrixXd& grad, const MatrixXd& pre, double slope) {
    grad = grad.binaryExpr(pre, [slope](double g, double z) { return z > 0.0 ? g : slope * g; });
}

std::uint32_t to_le32(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        v = ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
    }
    return v;
}

std::uint64_t to_le64(std::uint64_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        std::uint64_t r = 0;
        for (int i = 0; i < 8; ++i) r = (r << 8) | ((v >> (8 * i)) & 0xFFu);
        return r;
    }
    return v;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string CvaeArch::to_json() const {
    nlohmann::json j;
    j["image_size"] = image_size;
    j["channels"] = channels;
    j["kernel"] = kernel;
    j["latent"] = latent;
    j["leaky_slope"] = leaky_slope;
    return j.dump();
}

CvaeArch CvaeArch::from_json(const std::string& text) {
    CvaeArch a;
    try {
        const auto j = nlohmann::json::parse(text);
        a.image_size = j.at("image_size").get<int>();
        a.channels = j.at("channels").get<std::vector<int>>();
        a.kernel = j.at("kernel").get<int>();
        a.latent = j.at("latent").get<int>();
        a.leaky_slope = j.value("leaky_slope", 0.01);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("CVAE architecture JSON: ") + e.what());
    }
    a.validate();
    return a;
}

void CvaeArch::validate() const {
    if (channels.empty()) throw ConfigError("CVAE: at least one conv layer is required");
    for (int c : channels) {
        if (c < 1) throw ConfigError("CVAE: channel widths must be positive");
    }
    if (kernel < 1 || kernel % 2 == 0) throw ConfigError("CVAE: kernel must be odd and positive");
    if (latent < 2) throw ConfigError("CVAE: latent dimension must be >= 2");
    if (image_size < 2 || (image_size % (1 << n_conv())) != 0) {
        throw ConfigError("CVAE: image size must be divisible by 2^(number of conv layers)");
    }
    if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) throw ConfigError("CVAE: leaky slope must lie in [0, 1)");
}

ElboTerms elbo_loss(const VectorXd& x, const VectorXd& x_rec, const VectorXd& mu, const VectorXd& sigma,
                    double beta_kl) {
    if (x.size() != x_rec.size() || mu.size() != sigma.size() || x.size() == 0) {
        throw DomainError("elbo_loss: inconsistent shapes");
    }
    if ((sigma.array() <= 0.0).any()) {
        throw DomainError("elbo_loss: sigma must be positive");
    }
    ElboTerms t;
    t.reconstruction = (x - x_rec).squaredNorm() / static_cast<double>(x.size());
    const Eigen::ArrayXd s2 = sigma.array().square();
    t.kl = 0.5 * (mu.array().square() + s2 - 1.0 - s2.log()).sum();
    t.total = t.reconstruction + beta_kl * t.kl;
    return t;
}

// ---------------------------------------------------------------------------

struct Cvae::Cache {
    std::vector<MatrixXd> enc_cols;  // im2col of each conv input
    std::vector<MatrixXd> enc_pre;   // conv pre-activations
    VectorXd h;                      // flattened encoder output
    VectorXd mu, logvar, sigma, eps, y;
    VectorXd dec_pre;                // dense pre-activation
    std::vector<MatrixXd> dec_in;    // input of each transpose conv
    std::vector<MatrixXd> dec_pre_t; // transpose-conv pre-activations
    VectorXd recon;
};

Cvae::Cvae(const CvaeArch& arch, std::uint64_t seed) : arch_(arch), seed_(seed) {
    arch_.validate();
    const int k2 = arch_.kernel * arch_.kernel;
    const int n = arch_.n_conv();
    const int S = arch_.image_size;
    std::size_t offset = 0;
    auto add = [&](Layer::Kind kind, int in_ch, int out_ch, int in_side, int out_side) {
        Layer l{kind, in_ch, out_ch, in_side, out_side, 0, 0, 0};
        std::size_t wsize = 0;
        switch (kind) {
            case Layer::Conv:
                wsize = static_cast<std::size_t>(out_ch) * in_ch * k2;
                l.fan_in = in_ch * k2;
                break;
            case Layer::TConv:
                wsize = static_cast<std::size_t>(in_ch) * out_ch * k2;
                l.fan_in = in_ch * k2;
                break;
            case Layer::Dense:
                wsize = static_cast<std::size_t>(out_ch) * in_ch;
                l.fan_in = in_ch;
                break;
        }
        l.w_offset = offset;
        offset += wsize;
        l.b_offset = offset;
        offset += static_cast<std::size_t>(out_ch);
        return l;
    };
    for (int i = 0; i < n; ++i) {
        encoder_.push_back(add(Layer::Conv, i == 0 ? 1 : arch_.channels[i - 1], arch_.channels[i], S >> i, S >> (i + 1)));
    }
    const int F = arch_.bottleneck_size();
    mu_head_ = add(Layer::Dense, F, arch_.latent, 1, 1);
    logvar_head_ = add(Layer::Dense, F, arch_.latent, 1, 1);
    dec_dense_ = add(Layer::Dense, arch_.latent, F, 1, 1);
    for (int j = n - 1; j >= 0; --j) {
        decoder_.push_back(add(Layer::TConv, arch_.channels[j], j == 0 ? 1 : arch_.channels[j - 1], S >> (j + 1), S >> j));
    }
    params_.assign(offset, 0.0);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    auto init = [&](const Layer& l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(l.fan_in));
        for (std::size_t i = l.w_offset; i < l.b_offset + static_cast<std::size_t>(l.out_ch); ++i) {
            params_[i] = bound * uni(rng);
        }
    };
    for (const auto& l : encoder_) init(l);
    init(mu_head_);
    init(logvar_head_);
    init(dec_dense_);
    for (const auto& l : decoder_) init(l);
}

void Cvae::forward(const VectorXd& image, const VectorXd* eps, Cache& c) const {
    const int S = arch_.image_size;
    if (image.size() != static_cast<Eigen::Index>(S) * S) {
        throw DomainError("CVAE: image has " + std::to_string(image.size()) + " pixels, model expects " +
                          std::to_string(S * S));
    }
    const int k = arch_.kernel;
    const double slope = arch_.leaky_slope;
    const double* p = params_.data();

    MatrixXd x = image.transpose();
    c.enc_cols.clear();
    c.enc_pre.clear();
    for (const auto& l : encoder_) {
        c.enc_cols.push_back(im2col(x, l.in_side, k));
        const ConstMap W(p + l.w_offset, l.out_ch, l.in_ch * k * k);
        const Eigen::Map<const VectorXd> b(p + l.b_offset, l.out_ch);
        MatrixXd z = W * c.enc_cols.back();
        z.colwise() += b;
        c.enc_pre.push_back(z);
        x = leaky(z, slope);
    }
    c.h = Eigen::Map<const VectorXd>(x.data(), x.size());

    auto dense = [&](const Layer& l, const VectorXd& in) -> VectorXd {
        const ConstMap W(p + l.w_offset, l.out_ch, l.in_ch);
        const Eigen::Map<const VectorXd> b(p + l.b_offset, l.out_ch);
        return W * in + b;
    };
    c.mu = dense(mu_head_, c.h);
    c.logvar = dense(logvar_head_, c.h);
    c.sigma = (0.5 * c.logvar.array()).exp();
    c.eps = eps ? *eps : VectorXd::Zero(arch_.latent);
    if (c.eps.size() != arch_.latent) throw DomainError("CVAE: noise vector has the wrong dimension");
    c.y = c.mu + c.sigma.cwiseProduct(c.eps);

    c.dec_pre = dense(dec_dense_, c.y);
    const auto& first = decoder_.front();
    MatrixXd a = leaky(c.dec_pre, slope);
    x = Eigen::Map<const MatrixXd>(a.data(), first.in_ch, first.in_side * first.in_side);
    c.dec_in.clear();
    c.dec_pre_t.clear();
    for (std::size_t j = 0; j < decoder_.size(); ++j) {
        const auto& l = decoder_[j];
        c.dec_in.push_back(x);
        const ConstMap W(p + l.w_offset, l.in_ch, l.out_ch * k * k);
        const Eigen::Map<const VectorXd> b(p + l.b_offset, l.out_ch);
        MatrixXd z = col2im(W.transpose() * x, l.out_ch, l.out_side, k);
        z.colwise() += b;
        c.dec_pre_t.push_back(z);
        if (j + 1 < decoder_.size()) {
            x = leaky(z, slope);
        } else {
            x = z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
        }
    }
    c.recon = Eigen::Map<const VectorXd>(x.data(), x.size());
}

Reconstruction Cvae::reconstruct_with_noise(const VectorXd& image, const VectorXd& eps) const {
    Cache c;
    forward(image, &eps, c);
    return {c.recon, c.mu, c.sigma};
}

Reconstruction Cvae::reconstruct(const VectorXd& image, Sampling mode, std::uint64_t noise_seed) const {
    Cache c;
    if (mode == Sampling::Mean) {
        forward(image, nullptr, c);
    } else {
        std::mt19937_64 rng(noise_seed);
        std::normal_distribution<double> nd;
        VectorXd eps(arch_.latent);
        for (int i = 0; i < arch_.latent; ++i) eps(i) = nd(rng);
        forward(image, &eps, c);
    }
    return {c.recon, c.mu, c.sigma};
}

ElboTerms Cvae::batch_loss(const std::vector<const VectorXd*>& batch, const std::vector<VectorXd>& eps,
                           double beta_kl, std::vector<double>* grad) const {
    if (batch.empty() || batch.size() != eps.size()) {
        throw DomainError("CVAE batch_loss: batch and noise lists must be non-empty and equal length");
    }
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    const int k = arch_.kernel;
    const double slope = arch_.leaky_slope;
    const double* p = params_.data();
    if (grad) grad->assign(params_.size(), 0.0);

    ElboTerms sum;
    Cache c;
    for (std::size_t s = 0; s < batch.size(); ++s) {
        forward(*batch[s], &eps[s], c);
        const ElboTerms t = elbo_loss(*batch[s], c.recon, c.mu, c.sigma, beta_kl);
        sum.total += t.total * inv_b;
        sum.reconstruction += t.reconstruction * inv_b;
        sum.kl += t.kl * inv_b;
        if (!grad) continue;
        double* g = grad->data();

        const double P = static_cast<double>(c.recon.size());
        VectorXd dz = (2.0 * inv_b / P) * (c.recon - *batch[s]).cwiseProduct(
                                              c.recon.cwiseProduct(VectorXd::Ones(c.recon.size()) - c.recon));
        MatrixXd dy = Eigen::Map<const MatrixXd>(dz.data(), 1, dz.size());
        for (int j = static_cast<int>(decoder_.size()) - 1; j >= 0; --j) {
            const auto& l = decoder_[j];
            if (j + 1 < static_cast<int>(decoder_.size())) {
                leaky_backward(dy, c.dec_pre_t[j], slope);
            }
            const MatrixXd dcols = im2col(dy, l.out_side, k);
            MutMap(g + l.w_offset, l.in_ch, l.out_ch * k * k).noalias() += c.dec_in[j] * dcols.transpose();
            Eigen::Map<VectorXd>(g + l.b_offset, l.out_ch) += dy.rowwise().sum();
            const ConstMap W(p + l.w_offset, l.in_ch, l.out_ch * k * k);
            dy = W * dcols;
        }
        MatrixXd dpre = Eigen::Map<const MatrixXd>(dy.data(), dy.size(), 1);
        leaky_backward(dpre, c.dec_pre, slope);
        const VectorXd dd = dpre.col(0);
        auto dense_backward = [&](const Layer& l, const VectorXd& in, const VectorXd& dout) -> VectorXd {
            MutMap(g + l.w_offset, l.out_ch, l.in_ch).noalias() += dout * in.transpose();
            Eigen::Map<VectorXd>(g + l.b_offset, l.out_ch) += dout;
            return ConstMap(p + l.w_offset, l.out_ch, l.in_ch).transpose() * dout;
        };
        const VectorXd dlat = dense_backward(dec_dense_, c.y, dd);

        const VectorXd dmu = dlat + (beta_kl * inv_b) * c.mu;
        const VectorXd dlogvar =
            0.5 * dlat.cwiseProduct(c.eps).cwiseProduct(c.sigma) +
            (0.5 * beta_kl * inv_b) * (c.sigma.array().square() - 1.0).matrix();
        VectorXd dh = dense_backward(mu_head_, c.h, dmu);
        dh += dense_backward(logvar_head_, c.h, dlogvar);

        const auto& last = encoder_.back();
        MatrixXd dx = Eigen::Map<const MatrixXd>(dh.data(), last.out_ch, last.out_side * last.out_side);
        for (int i = static_cast<int>(encoder_.size()) - 1; i >= 0; --i) {
            const auto& l = encoder_[i];
            leaky_backward(dx, c.enc_pre[i], slope);
            MutMap(g + l.w_offset, l.out_ch, l.in_ch * k * k).noalias() += dx * c.enc_cols[i].transpose();
            Eigen::Map<VectorXd>(g + l.b_offset, l.out_ch) += dx.rowwise().sum();
            if (i > 0) {
                const ConstMap W(p + l.w_offset, l.out_ch, l.in_ch * k * k);
                dx = col2im(W.transpose() * dx, l.in_ch, l.in_side, k);
            }
        }
    }
    return sum;
}

void Cvae::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DomainError("Cvae::save: cannot open " + path);
    const std::string js = arch_.to_json();
    out.write(kMagic, 8);
    const std::uint32_t ver = to_le32(kVersion);
    out.write(reinterpret_cast<const char*>(&ver), 4);
    const std::uint64_t seed = to_le64(seed_);
    out.write(reinterpret_cast<const char*>(&seed), 8);
    const std::uint32_t len = to_le32(static_cast<std::uint32_t>(js.size()));
    out.write(reinterpret_cast<const char*>(&len), 4);
    out.write(js.data(), static_cast<std::streamsize>(js.size()));
    const std::uint64_t count = to_le64(params_.size());
    out.write(reinterpret_cast<const char*>(&count), 8);
    for (double v : params_) {
        const std::uint32_t bits = to_le32(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
        out.write(reinterpret_cast<const char*>(&bits), 4);
    }
    if (!out) throw DomainError("Cvae::save: write failed for " + path);
}

Cvae Cvae::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DomainError("Cvae::load: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0) throw ConfigError("Cvae::load: not a CVAE checkpoint: " + path);
    std::uint32_t ver = 0;
    in.read(reinterpret_cast<char*>(&ver), 4);
    if (to_le32(ver) != kVersion) throw ConfigError("Cvae::load: unsupported checkpoint version");
    std::uint64_t seed = 0;
    in.read(reinterpret_cast<char*>(&seed), 8);
    std::uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 4);
    std::string js(to_le32(len), '\0');
    in.read(js.data(), static_cast<std::streamsize>(js.size()));
    Cvae model(CvaeArch::from_json(js), to_le64(seed));
    std::uint64_t count = 0;
    in.read(reinterpret_cast<char*>(&count), 8);
    if (to_le64(count) != model.params_.size()) throw ConfigError("Cvae::load: weight count does not match architecture");
    for (double& v : model.params_) {
        std::uint32_t bits = 0;
        in.read(reinterpret_cast<char*>(&bits), 4);
        v = std::bit_cast<float>(to_le32(bits));
    }
    if (!in) throw ConfigError("Cvae::load: truncated checkpoint " + path);
    return model;
}

// ---------------------------------------------------------------------------

TrainReport train(Cvae& model, const std::vector<VectorXd>& images, const TrainConfig& cfg) {
    if (cfg.epochs < 1 || cfg.batch_size < 1 || !(cfg.learning_rate > 0.0)) {
        throw ConfigError("train: epochs, batch size and learning rate must be positive");
    }
    if (images.size() <= static_cast<std::size_t>(cfg.batch_size)) {
        throw DomainError("train: need at least two batches of images");
    }
    auto& w = model.parameters();
    std::vector<double> m(w.size(), 0.0), v(w.size(), 0.0), grad;
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> nd;
    std::vector<std::size_t> order(images.size());
    std::iota(order.begin(), order.end(), 0);
    const int latent = model.arch().latent;

    TrainReport rep;
    rep.batch_size = cfg.batch_size;
    rep.learning_rate = cfg.learning_rate;
    rep.beta_kl = cfg.beta_kl;
    rep.seed = cfg.seed;
    long step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        ElboTerms acc;
        int n_batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            std::vector<const VectorXd*> batch;
            std::vector<VectorXd> eps;
            for (std::size_t i = start; i < end; ++i) {
                batch.push_back(&images[order[i]]);
                VectorXd e(latent);
                for (int d = 0; d < latent; ++d) e(d) = nd(rng);
                eps.push_back(std::move(e));
            }
            const ElboTerms t = model.batch_loss(batch, eps, cfg.beta_kl, &grad);
            if (!std::isfinite(t.total)) {
                throw TrainingError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                        std::to_string(n_batches),
                                    epoch, n_batches);
            }
            ++step;
            const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step));
            for (std::size_t i = 0; i < w.size(); ++i) {
                m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * grad[i];
                v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * grad[i] * grad[i];
                w[i] -= cfg.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.adam_eps);
            }
            acc.total += t.total;
            acc.reconstruction += t.reconstruction;
            acc.kl += t.kl;
            ++n_batches;
        }
        acc.total /= n_batches;
        acc.reconstruction /= n_batches;
        acc.kl /= n_batches;
        rep.epochs.push_back(acc);
    }
    return rep;
}

double damage_index(const Cvae& model, const VectorXd& image) {
    const Reconstruction r = model.reconstruct(image, Sampling::Mean);
    return (image - r.image).squaredNorm() / static_cast<double>(image.size());
}

double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw DomainError("percentile: empty set");
    if (!(p >= 0.0 && p <= 100.0)) throw DomainError("percentile: p must lie in [0, 100]");
    std::sort(values.begin(), values.end());
    const double rank = p / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

DetectorCalibration calibrate_threshold(const std::vector<double>& di, double pct, const std::string& id) {
    if (di.empty()) throw DomainError("calibrate_threshold: empty validation set");
    DetectorCalibration cal;
    cal.threshold = percentile(di, pct);
    cal.percentile = pct;
    cal.calibration_id = id;
    return cal;
}

DetectorCalibration calibrate_threshold(const Cvae& model, const std::vector<VectorXd>& validation, double pct,
                                        const std::string& id) {
    std::vector<double> di;
    di.reserve(validation.size());
    for (const auto& img : validation) di.push_back(damage_index(model, img));
    return calibrate_threshold(di, pct, id);
}

Label classify(double di, double gamma) { return di > gamma ? Label::Damaged : Label::Healthy; }

double sensing_accuracy(const std::vector<Label>& predicted, const std::vector<Label>& truth) {
    if (predicted.size() != truth.size()) throw DomainError("sensing_accuracy: label lists differ in length");
    if (predicted.empty()) throw DomainError("sensing_accuracy: no samples");
    std::size_t ok = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) ok += predicted[i] == truth[i] ? 1 : 0;
    return static_cast<double>(ok) / static_cast<double>(predicted.size());
}

}  // namespace sehs::cvae
