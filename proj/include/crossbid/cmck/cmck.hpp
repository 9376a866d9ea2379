#pragma once

#include <deque>
#include <string>
#include <vector>

#include "crossbid/nn/adam.hpp"
#include "crossbid/nn/mlp.hpp"

namespace crossbid::cmck {

using nn::Adam;
using nn::Mat;
using nn::Mlp;
using nn::MlpSpec;
using nn::ParamGrad;
using Vec = Eigen::VectorXd;

/// Soft subspace orthogonality: squared Frobenius norm of the cross-Gram
/// matrix of two latent batches (columns are per-row latents).
inline double loss_orth(const Mat& z_p, const Mat& z_k, Mat* dz_p = nullptr, Mat* dz_k = nullptr) {
    CB_REQUIRE(z_p.rows() == z_k.rows(), "loss_orth: latent width mismatch");
    Mat gram = z_p * z_k.transpose();
    if (dz_p) *dz_p = 2.0 * gram * z_k;
    if (dz_k) *dz_k = 2.0 * gram.transpose() * z_p;
    return gram.squaredNorm();
}

/// Scaled MSE reconstruction loss over all elements:
/// (1/n)|c - c~|^2 - (1/n^2)((c - c~) . 1)^2, invariant to constant offsets.
inline double loss_smse(const Mat& c, const Mat& c_hat, Mat* dc_hat = nullptr) {
    CB_REQUIRE(c.rows() == c_hat.rows() && c.cols() == c_hat.cols(), "loss_smse: shape mismatch");
    const double n = static_cast<double>(c.size());
    CB_REQUIRE(n > 0, "loss_smse: empty input");
    Mat e = c - c_hat;
    const double sum = e.sum();
    const double loss = e.squaredNorm() / n - (sum * sum) / (n * n);
    if (dc_hat) *dc_hat = (-2.0 / n) * e + Mat::Constant(c.rows(), c.cols(), 2.0 * sum / (n * n));
    return loss;
}

struct CmckConfig {
    int row_dim = 0;                   // context row width F_c
    int latent_dim = 16;               // d_z
    int window = 64;                   // context rows feeding z*
    double eta = 1.0;                  // reconstruction weight
    std::vector<int> hidden = {128, 128};
    std::string policy_encoder = "spec"; // spec | com | both
    double lr = 2e-4;
    int batch_rows = 64;               // rows per sampled context
    bool normalize_latents = true;     // unit-normalize rows before L_o (anti-collapse)
};

/// Common/specific encoders with a shared decoder, plus the frozen mean-pool
/// aggregator that turns a context window into the policy latent z*.
class KnowledgeEncoders {
public:
    KnowledgeEncoders() = default;

    KnowledgeEncoders(const CmckConfig& cfg, Rng& rng) : cfg_(cfg) {
        CB_REQUIRE(cfg.row_dim > 0, "KnowledgeEncoders: row_dim must be set");
        com_ = Mlp(MlpSpec::make(cfg.row_dim, cfg.hidden, cfg.latent_dim, nn::Act::Tanh,
                                 nn::Act::Identity));
        spec_ = Mlp(MlpSpec::make(cfg.row_dim, cfg.hidden, cfg.latent_dim, nn::Act::Tanh,
                                  nn::Act::Identity));
        dec_ = Mlp(MlpSpec::make(cfg.latent_dim, cfg.hidden, cfg.row_dim, nn::Act::Tanh,
                                 nn::Act::Identity));
        com_.init(rng);
        spec_.init(rng);
        dec_.init(rng);
        copt_ = Adam(opt_cfg(), com_.num_params());
        sopt_ = Adam(opt_cfg(), spec_.num_params());
        dopt_ = Adam(opt_cfg(), dec_.num_params());
    }

    const CmckConfig& config() const { return cfg_; }
    int latent_dim() const { return cfg_.latent_dim; }
    Mlp& com() { return com_; }
    Mlp& spec() { return spec_; }
    Mlp& dec() { return dec_; }
    const Mlp& com() const { return com_; }
    const Mlp& spec() const { return spec_; }
    const Mlp& dec() const { return dec_; }

    Mat encode_com(const Mat& rows) const { return com_.forward(rows); }
    Mat encode_spec(const Mat& rows) const { return spec_.forward(rows); }

    /// c~_k = D(E_com(c_p) + E_spec(c_k)), rows paired by index.
    Mat reconstruct(const Mat& c_p, const Mat& c_k) const {
        CB_REQUIRE(c_p.cols() > 0 && c_k.cols() > 0, "reconstruct: empty context");
        CB_REQUIRE(c_p.cols() == c_k.cols(), "reconstruct: row counts must match");
        return dec_.forward(encode_com(c_p) + encode_spec(c_k));
    }

    /// Latents feeding the aggregator, per the configured policy encoder.
    Mat policy_latents(const Mat& rows) const {
        if (cfg_.policy_encoder == "spec") return encode_spec(rows);
        if (cfg_.policy_encoder == "com") return encode_com(rows);
        if (cfg_.policy_encoder == "both") {
            Mat z(2 * cfg_.latent_dim, rows.cols());
            z.topRows(cfg_.latent_dim) = encode_spec(rows);
            z.bottomRows(cfg_.latent_dim) = encode_com(rows);
            return z;
        }
        detail::raise("unknown policy encoder: ", cfg_.policy_encoder);
    }

    /// E_g: mean pooling over the window followed by a fixed averaging
    /// projection back to d_z (identity for a single encoder, halved sum for
    /// "both"). z* has width d_z regardless of window length; an empty
    /// window yields the zero vector (cold start).
    Vec aggregate(const Mat& window_rows) const {
        if (window_rows.cols() == 0) return Vec::Zero(cfg_.latent_dim);
        Mat z = policy_latents(window_rows);
        Vec mean = z.rowwise().mean();
        return project(mean);
    }

    Vec project(const Vec& pooled) const {
        if (pooled.size() == cfg_.latent_dim) return pooled;
        CB_REQUIRE(pooled.size() == 2 * cfg_.latent_dim, "aggregate: bad pooled width");
        return 0.5 * (pooled.head(cfg_.latent_dim) + pooled.tail(cfg_.latent_dim));
    }

    Adam& com_opt() { return copt_; }
    Adam& spec_opt() { return sopt_; }
    Adam& dec_opt() { return dopt_; }

    std::uint64_t param_hash() const {
        auto h = [](const Mlp& m) {
            Vec t = m.theta();
            return fnv_bytes(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(double));
        };
        return h(com_) ^ (h(spec_) * 3) ^ (h(dec_) * 7);
    }

private:
    static std::uint64_t fnv_bytes(const char* p, std::size_t n) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (std::size_t i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(p[i]);
            h *= 0x100000001b3ULL;
        }
        return h;
    }

    nn::OptimizerConfig opt_cfg() const {
        nn::OptimizerConfig oc;
        oc.lr = cfg_.lr;
        return oc;
    }

    CmckConfig cfg_;
    Mlp com_, spec_, dec_;
    Adam copt_, sopt_, dopt_;
};

struct TaskInferParts {
    double total = 0.0;
    double orth = 0.0;
    double recon = 0.0;
};

/// Task-inference objective over pre-sampled context pairs: for each channel
/// p with its sampled partner k, the orthogonality term on (optionally
/// unit-normalized) latents plus eta * L_smse of the cross reconstruction,
/// summed over channels. The orthogonality term divides the raw Frobenius
/// value by the number of row pairs so that its scale is batch-size-free and
/// commensurate with the reconstruction term.
inline TaskInferParts task_infer_loss(const KnowledgeEncoders& enc,
                                      const std::vector<Mat>& c_ps, const std::vector<Mat>& c_ks,
                                      double eta, ParamGrad* g_com, ParamGrad* g_spec,
                                      ParamGrad* g_dec) {
    CB_REQUIRE(eta >= 0.0, "train_task_infer: eta must be nonnegative");
    CB_REQUIRE(c_ps.size() == c_ks.size() && !c_ps.empty(), "task_infer_loss: bad context pairing");
    TaskInferParts parts;
    const bool want_grads = g_com != nullptr;
    const bool norm = enc.config().normalize_latents;

    for (std::size_t pair = 0; pair < c_ps.size(); ++pair) {
        const Mat& c_p = c_ps[pair];
        const Mat& c_k = c_ks[pair];
        const Eigen::Index n = c_p.cols();
        CB_REQUIRE(n > 0 && c_k.cols() == n, "task_infer_loss: empty or mismatched contexts");
        const double pair_scale = 1.0 / static_cast<double>(n * n);

        Mlp::Cache com_cache, spec_cache, dec_cache;
        Mat z_p = enc.com().forward(c_p, com_cache);
        Mat z_k = enc.spec().forward(c_k, spec_cache);

        // unit-normalize latent rows before the orthogonality loss so the
        // loss cannot be minimized by shrinking the latents
        Mat zp_hat = z_p, zk_hat = z_k;
        Vec np = Vec::Ones(n), nk = Vec::Ones(n);
        if (norm) {
            for (Eigen::Index c = 0; c < n; ++c) {
                np[c] = std::max(z_p.col(c).norm(), 1e-8);
                nk[c] = std::max(z_k.col(c).norm(), 1e-8);
                zp_hat.col(c) /= np[c];
                zk_hat.col(c) /= nk[c];
            }
        }
        Mat dzp_hat, dzk_hat;
        parts.orth += pair_scale * loss_orth(zp_hat, zk_hat, want_grads ? &dzp_hat : nullptr,
                                             want_grads ? &dzk_hat : nullptr);

        Mat h = z_p + z_k;
        Mat c_hat = enc.dec().forward(h, dec_cache);
        Mat dc_hat;
        parts.recon += loss_smse(c_k, c_hat, want_grads ? &dc_hat : nullptr);

        if (want_grads) {
            Mat dh = enc.dec().backward(dec_cache, eta * dc_hat, *g_dec);

            Mat dz_p = dh, dz_k = dh;
            for (Eigen::Index c = 0; c < n; ++c) {
                Vec gp = pair_scale * dzp_hat.col(c);
                Vec gk = pair_scale * dzk_hat.col(c);
                if (norm) {
                    // normalization VJP: d/dx (x/|x|) applied columnwise
                    dz_p.col(c) += (gp - zp_hat.col(c) * zp_hat.col(c).dot(gp)) / np[c];
                    dz_k.col(c) += (gk - zk_hat.col(c) * zk_hat.col(c).dot(gk)) / nk[c];
                } else {
                    dz_p.col(c) += gp;
                    dz_k.col(c) += gk;
                }
            }
            enc.com().backward(com_cache, dz_p, *g_com);
            enc.spec().backward(spec_cache, dz_k, *g_spec);
        }
    }
    parts.total = parts.orth + eta * parts.recon;
    CB_REQUIRE(std::isfinite(parts.total), "train_task_infer: non-finite loss");
    return parts;
}

/// Phase-1 training: for each step and each channel p, sample a context from
/// p and one from a different channel k, take one optimizer step on
/// L_o + eta * L_r. Returns the per-step loss trace.
inline std::vector<TaskInferParts> train_task_infer(KnowledgeEncoders& enc,
                                                    const std::vector<Mat>& channel_rows,
                                                    double eta, int steps, Rng& rng) {
    const int P = static_cast<int>(channel_rows.size());
    CB_REQUIRE(P >= 2, "train_task_infer: need at least two channels");
    std::vector<TaskInferParts> trace;
    const int nb = enc.config().batch_rows;

    auto sample_rows = [&](const Mat& rows, int count) {
        Mat out(rows.rows(), count);
        for (int i = 0; i < count; ++i)
            out.col(i) = rows.col(rng.uniform_int(static_cast<int>(rows.cols())));
        return out;
    };

    std::vector<int> populated;
    for (int p = 0; p < P; ++p)
        if (channel_rows[p].cols() > 0) populated.push_back(p);
    CB_REQUIRE(populated.size() >= 2,
               "train_task_infer: need context rows from at least two channels");

    for (int step = 0; step < steps; ++step) {
        std::vector<Mat> c_ps, c_ks;
        for (int p : populated) {
            int k = p;
            while (k == p)
                k = populated[rng.uniform_int(static_cast<int>(populated.size()))];
            c_ps.push_back(sample_rows(channel_rows[p], nb));
            c_ks.push_back(sample_rows(channel_rows[k], nb));
        }
        ParamGrad g_com = enc.com().zero_grad();
        ParamGrad g_spec = enc.spec().zero_grad();
        ParamGrad g_dec = enc.dec().zero_grad();
        trace.push_back(task_infer_loss(enc, c_ps, c_ks, eta, &g_com, &g_spec, &g_dec));
        enc.com_opt().step(enc.com(), g_com);
        enc.spec_opt().step(enc.spec(), g_spec);
        enc.dec_opt().step(enc.dec(), g_dec);
    }
    return trace;
}

/// Extends an observation with the aggregated context latent (phase-2 use;
/// the encoders are frozen by contract).
inline Vec augment_state(const Vec& obs, const Mat& window_rows, const KnowledgeEncoders& enc) {
    Vec z = enc.aggregate(window_rows);
    Vec out(obs.size() + z.size());
    out << obs, z;
    return out;
}

/// Sliding z* table over an ordered channel stream: entry i is the aggregate
/// of rows [max(0, i - window), i), i.e. the latent available just before
/// stream position i. Encoders are frozen, so latents are computed once.
inline std::vector<Vec> sliding_zstars(const KnowledgeEncoders& enc, const Mat& stream_rows,
                                       int window) {
    const Eigen::Index n = stream_rows.cols();
    std::vector<Vec> out(static_cast<std::size_t>(n) + 1);
    const int dz = enc.latent_dim();
    if (n == 0) {
        out[0] = Vec::Zero(dz);
        return out;
    }
    Mat lat = enc.policy_latents(stream_rows);
    Vec running = Vec::Zero(lat.rows());
    out[0] = Vec::Zero(dz);
    for (Eigen::Index i = 0; i < n; ++i) {
        running += lat.col(i);
        if (i >= window) running -= lat.col(i - window);
        const double len = std::min<double>(i + 1, window);
        out[static_cast<std::size_t>(i) + 1] = enc.project(running / len);
    }
    return out;
}

/// Rolling evaluation-time context: completed transitions stream in, z* is
/// always available in O(1).
class ContextWindow {
public:
    ContextWindow() = default;
    ContextWindow(const KnowledgeEncoders* enc, int window) : enc_(enc), window_(window) {}

    void push(const Vec& row) {
        Mat one(row.size(), 1);
        one.col(0) = row;
        Vec lat = enc_->policy_latents(one).col(0);
        if (running_.size() != lat.size()) running_ = Vec::Zero(lat.size());
        running_ += lat;
        lats_.push_back(std::move(lat));
        if (static_cast<int>(lats_.size()) > window_) {
            running_ -= lats_.front();
            lats_.pop_front();
        }
    }

    Vec zstar() const {
        if (lats_.empty()) return Vec::Zero(enc_->latent_dim());
        return enc_->project(running_ / static_cast<double>(lats_.size()));
    }

private:
    const KnowledgeEncoders* enc_ = nullptr;
    int window_ = 64;
    std::deque<Vec> lats_;
    Vec running_;
};

} // namespace crossbid::cmck
