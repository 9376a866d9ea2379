#include <catch2/catch_amalgamated.hpp>

#include <cstdio>

#include "crossbid/nn/adam.hpp"
#include "crossbid/nn/checkpoint.hpp"
#include "crossbid/nn/finite_diff.hpp"
#include "crossbid/nn/mlp.hpp"

using namespace crossbid;
using namespace crossbid::nn;

namespace {

Mlp random_net(const MlpSpec& spec, std::uint64_t seed) {
    Mlp net(spec);
    Rng rng(seed);
    net.init(rng);
    return net;
}

// mean squared error over columns; returns loss and the output gradient
double mse_forward_backward(const Mlp& net, const Mat& x, const Mat& y, ParamGrad* g) {
    Mlp::Cache cache;
    Mat pred = net.forward(x, cache);
    Mat diff = pred - y;
    const double loss = diff.squaredNorm() / diff.cols();
    if (g) {
        Mat dy = 2.0 * diff / diff.cols();
        net.backward(cache, dy, *g);
    }
    return loss;
}

} // namespace

TEST_CASE("forward: identity-composed layers reproduce the input") {
    MlpSpec spec = MlpSpec::make(3, {3}, 3, Act::Identity, Act::Identity);
    Mlp net(spec);
    net.weights()[0].setIdentity();
    net.weights()[1].setIdentity();
    Mat x(3, 5);
    Rng rng(11);
    for (int i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    REQUIRE((net.forward(x) - x).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("forward: zero weights and biases give zero output") {
    Mlp net(MlpSpec::make(4, {8}, 2, Act::Tanh, Act::Identity));
    Mat x = Mat::Random(4, 3);
    REQUIRE(net.forward(x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward: batch of two equals concatenated batches of one") {
    Mlp net = random_net(MlpSpec::make(5, {16, 16}, 3, Act::Tanh, Act::Sigmoid), 42);
    Mat x = Mat::Random(5, 2);
    Mat both = net.forward(x);
    Mat first = net.forward(x.col(0));
    Mat second = net.forward(x.col(1));
    REQUIRE((both.col(0) - first.col(0)).norm() < 1e-14);
    REQUIRE((both.col(1) - second.col(0)).norm() < 1e-14);
}

TEST_CASE("forward: input width mismatch is rejected") {
    Mlp net = random_net(MlpSpec::make(5, {8}, 2), 1);
    Mat bad = Mat::Random(4, 2);
    REQUIRE_THROWS_AS(net.forward(bad), Error);
}

TEST_CASE("grad: quadratic parameter penalty has gradient theta") {
    // loss = 0.5 * ||theta||^2 evaluated directly on the flat parameters
    Mlp net = random_net(MlpSpec::make(2, {4}, 1), 7);
    Vec theta = net.theta();
    auto loss = [&]() { return 0.5 * net.theta().squaredNorm(); };
    Vec fd = finite_diff_grad(net, loss, 1e-5);
    REQUIRE(rel_err(fd, theta) < 1e-6);
}

TEST_CASE("grad: constant loss has zero gradient") {
    Mlp net = random_net(MlpSpec::make(3, {4}, 2), 3);
    ParamGrad g = net.zero_grad();
    Mat x = Mat::Random(3, 4);
    Mlp::Cache cache;
    net.forward(x, cache);
    net.backward(cache, Mat::Zero(2, 4), g);
    REQUIRE(Mlp::flatten(g).norm() == 0.0);
}

TEST_CASE("grad: backprop matches central finite differences on a 2-layer net") {
    for (Act hidden : {Act::Tanh, Act::Sigmoid}) {
        Mlp net = random_net(MlpSpec::make(4, {8, 8}, 3, hidden, Act::Identity), 13);
        Mat x = Mat::Random(4, 6);
        Mat y = Mat::Random(3, 6);
        ParamGrad g = net.zero_grad();
        mse_forward_backward(net, x, y, &g);
        Vec analytic = Mlp::flatten(g);
        Vec fd = finite_diff_grad(net, [&]() { return mse_forward_backward(net, x, y, nullptr); });
        REQUIRE(rel_err(analytic, fd) < 1e-3);
    }
}

TEST_CASE("grad: softmax output layer backprop matches finite differences") {
    Mlp net = random_net(MlpSpec::make(3, {6}, 4, Act::Tanh, Act::Softmax), 17);
    Mat x = Mat::Random(3, 5);
    Mat y = Mat::Random(4, 5);
    ParamGrad g = net.zero_grad();
    mse_forward_backward(net, x, y, &g);
    Vec fd = finite_diff_grad(net, [&]() { return mse_forward_backward(net, x, y, nullptr); });
    REQUIRE(rel_err(Mlp::flatten(g), fd) < 1e-3);
}

TEST_CASE("step: zero learning rate leaves parameters unchanged") {
    Mlp net = random_net(MlpSpec::make(2, {4}, 1), 5);
    Vec before = net.theta();
    OptimizerConfig cfg;
    cfg.lr = 0.0;
    Adam adam(cfg, net.num_params());
    ParamGrad g = net.zero_grad();
    for (auto& m : g.dW) m.setConstant(1.0);
    adam.step(net, g);
    REQUIRE((net.theta() - before).norm() == 0.0);
}

TEST_CASE("step: converges to the quadratic bowl optimum at 3") {
    Mlp net(MlpSpec::make(1, {1}, 1, Act::Identity, Act::Identity));
    OptimizerConfig cfg;
    cfg.lr = 0.05;
    Adam adam(cfg, net.num_params());
    for (int it = 0; it < 600; ++it) {
        Vec theta = net.theta();
        Vec grad = theta.array() - 3.0; // d/dtheta of 0.5*||theta - 3||^2
        ParamGrad g = net.zero_grad();
        Eigen::Index k = 0;
        for (std::size_t l = 0; l < g.dW.size(); ++l) {
            for (Eigen::Index i = 0; i < g.dW[l].size(); ++i) g.dW[l].data()[i] = grad[k++];
            for (Eigen::Index i = 0; i < g.db[l].size(); ++i) g.db[l][i] = grad[k++];
        }
        adam.step(net, g);
    }
    REQUIRE((net.theta().array() - 3.0).abs().maxCoeff() < 1e-2);
}

TEST_CASE("step: loss is non-increasing over 100 steps on a convex quadratic") {
    Mlp net = random_net(MlpSpec::make(1, {1}, 1, Act::Identity, Act::Identity), 23);
    OptimizerConfig cfg;
    cfg.lr = 0.01;
    Adam adam(cfg, net.num_params());
    auto loss_of = [&]() { return 0.5 * (net.theta().array() - 3.0).square().sum(); };
    double prev = loss_of();
    double worst_increase = 0.0;
    for (int it = 0; it < 100; ++it) {
        Vec grad = net.theta().array() - 3.0;
        ParamGrad g = net.zero_grad();
        Eigen::Index k = 0;
        for (std::size_t l = 0; l < g.dW.size(); ++l) {
            for (Eigen::Index i = 0; i < g.dW[l].size(); ++i) g.dW[l].data()[i] = grad[k++];
            for (Eigen::Index i = 0; i < g.db[l].size(); ++i) g.db[l][i] = grad[k++];
        }
        adam.step(net, g);
        worst_increase = std::max(worst_increase, loss_of() - prev);
        prev = loss_of();
    }
    REQUIRE(worst_increase <= 1e-12);
}

TEST_CASE("step: applied update norm is bounded by lr * clip_norm") {
    Mlp net = random_net(MlpSpec::make(3, {8}, 2), 29);
    OptimizerConfig cfg;
    cfg.lr = 0.01;
    cfg.clip_norm = 1.0;
    Adam adam(cfg, net.num_params());
    Vec before = net.theta();
    ParamGrad g = net.zero_grad();
    // gradient with norm 10
    Vec dir = Vec::Ones(net.num_params()).normalized() * 10.0;
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < g.dW.size(); ++l) {
        for (Eigen::Index i = 0; i < g.dW[l].size(); ++i) g.dW[l].data()[i] = dir[k++];
        for (Eigen::Index i = 0; i < g.db[l].size(); ++i) g.db[l][i] = dir[k++];
    }
    adam.step(net, g);
    REQUIRE((net.theta() - before).norm() <= cfg.lr * cfg.clip_norm + 1e-12);
}

TEST_CASE("step: non-finite gradient is rejected") {
    Mlp net = random_net(MlpSpec::make(2, {4}, 1), 31);
    Adam adam(OptimizerConfig{}, net.num_params());
    ParamGrad g = net.zero_grad();
    g.dW[0](0, 0) = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS_AS(adam.step(net, g), Error);
}

TEST_CASE("soft_update endpoint and midpoint behavior") {
    Mlp online = random_net(MlpSpec::make(2, {4}, 1), 37);
    Mlp target(online.spec());

    Mlp t1 = target;
    soft_update(t1, online, 1.0);
    REQUIRE((t1.theta() - online.theta()).norm() == 0.0);

    Mlp t0 = target;
    soft_update(t0, online, 0.0);
    REQUIRE((t0.theta() - target.theta()).norm() == 0.0);

    Mlp th(online.spec());
    // target = 0 net; online set to 2 everywhere -> expect 1 everywhere
    Mlp two(online.spec());
    two.set_theta(Vec::Constant(two.num_params(), 2.0));
    soft_update(th, two, 0.5);
    REQUIRE((th.theta().array() - 1.0).abs().maxCoeff() < 1e-15);
}

TEST_CASE("reproducibility: fixed seed gives bit-identical parameters after training") {
    auto run = [&]() {
        Mlp net = random_net(MlpSpec::make(3, {8}, 2), 99);
        Adam adam(OptimizerConfig{}, net.num_params());
        Rng rng(123);
        for (int it = 0; it < 50; ++it) {
            Mat x(3, 8), y(2, 8);
            for (int i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
            for (int i = 0; i < y.size(); ++i) y.data()[i] = rng.normal();
            ParamGrad g = net.zero_grad();
            mse_forward_backward(net, x, y, &g);
            adam.step(net, g);
        }
        return net.theta();
    };
    Vec a = run();
    Vec b = run();
    REQUIRE(a.size() == b.size());
    REQUIRE(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0);
}

TEST_CASE("checkpoint: round trip preserves parameters and optimizer state") {
    Mlp net = random_net(MlpSpec::make(4, {8}, 2, Act::Tanh, Act::Sigmoid), 55);
    Adam adam(OptimizerConfig{}, net.num_params());
    Mat x = Mat::Random(4, 4), y = Mat::Random(2, 4);
    for (int i = 0; i < 3; ++i) {
        ParamGrad g = net.zero_grad();
        mse_forward_backward(net, x, y, &g);
        adam.step(net, g);
    }

    const std::string path = "ckpt_roundtrip.bin";
    Checkpoint ck;
    ck.add("net", net, adam);
    ck.meta()["stage"] = "unit-test";
    ck.save(path);

    Checkpoint back = Checkpoint::load(path);
    Mlp restored;
    Adam radam(adam.config(), net.num_params());
    back.restore("net", restored, &radam);
    REQUIRE((restored.theta() - net.theta()).norm() == 0.0);
    REQUIRE((radam.m() - adam.m()).norm() == 0.0);
    REQUIRE((radam.v() - adam.v()).norm() == 0.0);
    REQUIRE(radam.step_count() == adam.step_count());
    REQUIRE(back.meta().at("stage") == "unit-test");
    std::remove(path.c_str());
}

TEST_CASE("checkpoint: corrupt magic and missing nets are rejected") {
    const std::string path = "ckpt_bad.bin";
    {
        BinWriter w(path);
        w.raw("NOPE", 4);
        w.u32(1);
        w.close();
    }
    REQUIRE_THROWS_AS(Checkpoint::load(path), Error);
    std::remove(path.c_str());

    Checkpoint empty;
    REQUIRE_THROWS_AS(empty.restore("absent"), Error);
}
