#pragma once

#include <Eigen/Core>
#include <cmath>
#include <string>
#include <vector>

#include "crossbid/core/error.hpp"
#include "crossbid/core/rng.hpp"

namespace crossbid::nn {

using Mat = Eigen::MatrixXd; // columns are samples
using Vec = Eigen::VectorXd;

enum class Act { Identity, Relu, Tanh, Sigmoid, Softmax };

inline const char* act_name(Act a) {
    switch (a) {
        case Act::Identity: return "identity";
        case Act::Relu: return "relu";
        case Act::Tanh: return "tanh";
        case Act::Sigmoid: return "sigmoid";
        case Act::Softmax: return "softmax";
    }
    return "?";
}

inline Act act_from_name(const std::string& s) {
    if (s == "identity") return Act::Identity;
    if (s == "relu") return Act::Relu;
    if (s == "tanh") return Act::Tanh;
    if (s == "sigmoid") return Act::Sigmoid;
    if (s == "softmax") return Act::Softmax;
    detail::raise("unknown activation: ", s);
}

/// Fixed-topology fully connected net: layer widths plus an activation per
/// affine layer. The last entry of `acts` is the output activation.
struct MlpSpec {
    std::vector<int> widths; // [in, h1, ..., out]
    std::vector<Act> acts;   // size widths.size()-1

    static MlpSpec make(int in, const std::vector<int>& hidden, int out,
                        Act hidden_act = Act::Tanh, Act out_act = Act::Identity) {
        MlpSpec s;
        s.widths.push_back(in);
        for (int h : hidden) s.widths.push_back(h);
        s.widths.push_back(out);
        s.acts.assign(s.widths.size() - 1, hidden_act);
        s.acts.back() = out_act;
        s.validate();
        return s;
    }

    void validate() const {
        CB_REQUIRE(widths.size() >= 3, "MlpSpec: need at least one hidden layer");
        CB_REQUIRE(acts.size() == widths.size() - 1, "MlpSpec: one activation per layer");
        for (int w : widths) CB_REQUIRE(w > 0, "MlpSpec: widths must be positive");
    }

    int input_dim() const { return widths.front(); }
    int output_dim() const { return widths.back(); }
    std::size_t layers() const { return widths.size() - 1; }

    bool operator==(const MlpSpec& o) const { return widths == o.widths && acts == o.acts; }
};

/// Parameter gradients in the same shape as the net; accumulated across
/// multiple backward passes when a loss touches the net more than once.
struct ParamGrad {
    std::vector<Mat> dW;
    std::vector<Vec> db;

    void setZero() {
        for (auto& m : dW) m.setZero();
        for (auto& v : db) v.setZero();
    }
    ParamGrad& operator+=(const ParamGrad& o) {
        for (std::size_t l = 0; l < dW.size(); ++l) {
            dW[l] += o.dW[l];
            db[l] += o.db[l];
        }
        return *this;
    }
    void scale(double s) {
        for (auto& m : dW) m *= s;
        for (auto& v : db) v *= s;
    }
};

class Mlp {
public:
    Mlp() = default;

    explicit Mlp(MlpSpec spec) : spec_(std::move(spec)) {
        spec_.validate();
        W_.resize(spec_.layers());
        b_.resize(spec_.layers());
        for (std::size_t l = 0; l < spec_.layers(); ++l) {
            W_[l] = Mat::Zero(spec_.widths[l + 1], spec_.widths[l]);
            b_[l] = Vec::Zero(spec_.widths[l + 1]);
        }
    }

    /// Fan-in-scaled uniform init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    void init(Rng& rng) {
        for (std::size_t l = 0; l < W_.size(); ++l) {
            const double s = 1.0 / std::sqrt(static_cast<double>(W_[l].cols()));
            for (Eigen::Index j = 0; j < W_[l].cols(); ++j)
                for (Eigen::Index i = 0; i < W_[l].rows(); ++i)
                    W_[l](i, j) = rng.uniform(-s, s);
            b_[l].setZero();
        }
    }

    const MlpSpec& spec() const { return spec_; }
    int input_dim() const { return spec_.input_dim(); }
    int output_dim() const { return spec_.output_dim(); }

    struct Cache {
        std::vector<Mat> post; // post[0] = input, post[l+1] = activation output of layer l
        std::vector<Mat> pre;  // pre[l] = affine output of layer l
    };

    Mat forward(const Mat& x) const {
        Cache scratch;
        return forward(x, scratch);
    }

    Mat forward(const Mat& x, Cache& cache) const {
        CB_REQUIRE(x.rows() == input_dim(), "Mlp::forward: input width ", x.rows(),
                   " does not match spec input ", input_dim());
        cache.post.assign(1, x);
        cache.pre.clear();
        Mat h = x;
        for (std::size_t l = 0; l < W_.size(); ++l) {
            Mat z = (W_[l] * h).colwise() + b_[l];
            cache.pre.push_back(z);
            h = apply_act(z, spec_.acts[l]);
            cache.post.push_back(h);
        }
        return h;
    }

    /// Reverse-mode VJP. Accumulates parameter gradients into `g` (which must
    /// be shaped via `zero_grad()`), returns the gradient w.r.t. the input.
    Mat backward(const Cache& cache, const Mat& dy, ParamGrad& g) const {
        CB_REQUIRE(dy.rows() == output_dim() && dy.cols() == cache.post.back().cols(),
                   "Mlp::backward: output gradient shape mismatch");
        Mat delta = dy;
        for (int l = static_cast<int>(W_.size()) - 1; l >= 0; --l) {
            delta = act_vjp(cache.pre[l], cache.post[l + 1], spec_.acts[l], delta);
            g.dW[l].noalias() += delta * cache.post[l].transpose();
            g.db[l] += delta.rowwise().sum();
            if (l > 0)
                delta = (W_[l].transpose() * delta).eval();
            else
                delta = (W_[0].transpose() * delta).eval();
        }
        return delta;
    }

    ParamGrad zero_grad() const {
        ParamGrad g;
        g.dW.resize(W_.size());
        g.db.resize(b_.size());
        for (std::size_t l = 0; l < W_.size(); ++l) {
            g.dW[l] = Mat::Zero(W_[l].rows(), W_[l].cols());
            g.db[l] = Vec::Zero(b_[l].size());
        }
        return g;
    }

    Eigen::Index num_params() const {
        Eigen::Index n = 0;
        for (std::size_t l = 0; l < W_.size(); ++l) n += W_[l].size() + b_[l].size();
        return n;
    }

    /// Flat parameter vector; layout is per layer W (column-major) then b.
    Vec theta() const {
        Vec v(num_params());
        Eigen::Index k = 0;
        for (std::size_t l = 0; l < W_.size(); ++l) {
            v.segment(k, W_[l].size()) = Eigen::Map<const Vec>(W_[l].data(), W_[l].size());
            k += W_[l].size();
            v.segment(k, b_[l].size()) = b_[l];
            k += b_[l].size();
        }
        return v;
    }

    void set_theta(const Vec& v) {
        CB_REQUIRE(v.size() == num_params(), "set_theta: size mismatch");
        Eigen::Index k = 0;
        for (std::size_t l = 0; l < W_.size(); ++l) {
            Eigen::Map<Vec>(W_[l].data(), W_[l].size()) = v.segment(k, W_[l].size());
            k += W_[l].size();
            b_[l] = v.segment(k, b_[l].size());
            k += b_[l].size();
        }
    }

    static Vec flatten(const ParamGrad& g) {
        Eigen::Index n = 0;
        for (std::size_t l = 0; l < g.dW.size(); ++l) n += g.dW[l].size() + g.db[l].size();
        Vec v(n);
        Eigen::Index k = 0;
        for (std::size_t l = 0; l < g.dW.size(); ++l) {
            v.segment(k, g.dW[l].size()) = Eigen::Map<const Vec>(g.dW[l].data(), g.dW[l].size());
            k += g.dW[l].size();
            v.segment(k, g.db[l].size()) = g.db[l];
            k += g.db[l].size();
        }
        return v;
    }

    // direct access for serialization
    const std::vector<Mat>& weights() const { return W_; }
    const std::vector<Vec>& biases() const { return b_; }
    std::vector<Mat>& weights() { return W_; }
    std::vector<Vec>& biases() { return b_; }

private:
    static Mat apply_act(const Mat& z, Act a) {
        switch (a) {
            case Act::Identity: return z;
            case Act::Relu: return z.cwiseMax(0.0);
            case Act::Tanh: return z.array().tanh().matrix();
            case Act::Sigmoid: return (1.0 / (1.0 + (-z.array()).exp())).matrix();
            case Act::Softmax: {
                Mat out(z.rows(), z.cols());
                for (Eigen::Index c = 0; c < z.cols(); ++c) {
                    Vec col = z.col(c);
                    const double m = col.maxCoeff();
                    Vec e = (col.array() - m).exp();
                    out.col(c) = e / e.sum();
                }
                return out;
            }
        }
        detail::raise("unreachable activation");
    }

    static Mat act_vjp(const Mat& pre, const Mat& post, Act a, const Mat& dy) {
        switch (a) {
            case Act::Identity: return dy;
            case Act::Relu: return (pre.array() > 0.0).cast<double>() * dy.array();
            case Act::Tanh: return ((1.0 - post.array().square()) * dy.array()).matrix();
            case Act::Sigmoid: return (post.array() * (1.0 - post.array()) * dy.array()).matrix();
            case Act::Softmax: {
                Mat out(post.rows(), post.cols());
                for (Eigen::Index c = 0; c < post.cols(); ++c) {
                    const double dot = post.col(c).dot(dy.col(c));
                    out.col(c) = post.col(c).array() * (dy.col(c).array() - dot);
                }
                return out;
            }
        }
        detail::raise("unreachable activation");
    }

    MlpSpec spec_;
    std::vector<Mat> W_;
    std::vector<Vec> b_;
};

/// target <- tau*online + (1-tau)*target, elementwise over parameters.
inline void soft_update(Mlp& target, const Mlp& online, double tau) {
    CB_REQUIRE(tau >= 0.0 && tau <= 1.0, "soft_update: tau must be in [0,1], got ", tau);
    CB_REQUIRE(target.spec() == online.spec(), "soft_update: shape mismatch");
    for (std::size_t l = 0; l < target.weights().size(); ++l) {
        target.weights()[l] = tau * online.weights()[l] + (1.0 - tau) * target.weights()[l];
        target.biases()[l] = tau * online.biases()[l] + (1.0 - tau) * target.biases()[l];
    }
}

} // namespace crossbid::nn
