#include <catch2/catch_amalgamated.hpp>

#include "crossbid/cmck/cmck.hpp"
#include "crossbid/nn/finite_diff.hpp"

using namespace crossbid;
using namespace crossbid::cmck;
using nn::Mat;
using nn::ParamGrad;

namespace {

CmckConfig small_cfg(int row_dim, int dz = 4) {
    CmckConfig cfg;
    cfg.row_dim = row_dim;
    cfg.latent_dim = dz;
    cfg.hidden = {16, 16};
    cfg.batch_rows = 16;
    cfg.lr = 3e-3;
    return cfg;
}

} // namespace

TEST_CASE("loss_orth: hand values on width-1 latents") {
    // latents are columns; the spec's [[1],[0]] column vectors are width-1
    // latents over two rows
    Mat zp(1, 2), zk(1, 2);
    zp << 1.0, 0.0;
    zk << 0.0, 1.0;
    REQUIRE(loss_orth(zp, zk) == 0.0);

    zk = zp;
    REQUIRE(loss_orth(zp, zk) == 1.0);

    Mat za(1, 2), zb(1, 2);
    za << 1.0, 1.0;
    zb << 1.0, -1.0;
    REQUIRE(loss_orth(za, zb) == 0.0);
}

TEST_CASE("loss_smse: hand values and constant-offset invariance") {
    Mat c(2, 1), ch(2, 1);
    c << 1.0, 1.0;
    ch << 0.0, 0.0;
    REQUIRE(loss_smse(c, ch) == Catch::Approx(0.0)); // (1/2)*2 - (1/4)*4 = 0

    c << 1.0, 0.0;
    REQUIRE(loss_smse(c, ch) == Catch::Approx(0.25)); // 0.5 - 0.25

    Mat same = Mat::Random(3, 4);
    REQUIRE(loss_smse(same, same) == 0.0);

    // invariance: adding a constant to every element of (c - c~) is free
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        Mat a = Mat::Random(3, 5), b = Mat::Random(3, 5);
        const double off = rng.uniform(-3.0, 3.0);
        const double l0 = loss_smse(a, b);
        const double l1 = loss_smse(a, b + Mat::Constant(3, 5, off));
        REQUIRE(l0 == Catch::Approx(l1).margin(1e-9));
    }
}

TEST_CASE("reconstruct: zero-initialized decoder emits its bias rows") {
    CmckConfig cfg = small_cfg(6);
    Rng rng(3);
    KnowledgeEncoders enc(cfg, rng);
    enc.dec().set_theta(nn::Vec::Zero(enc.dec().num_params()));
    Mat cp = Mat::Random(6, 5), ck = Mat::Random(6, 5);
    Mat rec = enc.reconstruct(cp, ck);
    REQUIRE(rec.cwiseAbs().maxCoeff() == 0.0); // zero biases -> zero rows

    Mat empty(6, 0);
    REQUIRE_THROWS_AS(enc.reconstruct(empty, ck), Error);
    Mat mismatched = Mat::Random(6, 3);
    REQUIRE_THROWS_AS(enc.reconstruct(cp, mismatched), Error);
}

TEST_CASE("train_task_infer: offset channels reconstruct below 0.05 smse") {
    // two channels whose rows differ by a constant feature offset
    const int F = 6, n = 400;
    Rng data(11);
    Mat rows_a(F, n), rows_b(F, n);
    for (int c = 0; c < n; ++c)
        for (int r = 0; r < F; ++r) {
            const double base = data.normal(0.0, 0.7);
            rows_a(r, c) = base;
            rows_b(r, c) = base + 1.5;
        }
    CmckConfig cfg = small_cfg(F, 6);
    cfg.hidden = {32, 32};
    Rng rng(5);
    KnowledgeEncoders enc(cfg, rng);
    Rng train(9);
    auto trace = train_task_infer(enc, {rows_a, rows_b}, 1.0, 6000, train);
    // evaluate reconstruction on fresh pairings
    Mat cp = rows_a.leftCols(64), ck = rows_b.leftCols(64);
    REQUIRE(loss_smse(ck, enc.reconstruct(cp, ck)) < 0.05);
}

TEST_CASE("train_task_infer: eta=0 without normalization collapses the orthogonality loss") {
    // the degenerate minimization the anti-collapse normalization exists to
    // prevent: with raw latents, shrinking drives |z_p^T z_k|_F below 1e-3
    const int F = 5;
    Rng data(13);
    Mat rows_a = Mat::Random(F, 200), rows_b = Mat::Random(F, 200);
    CmckConfig cfg = small_cfg(F);
    cfg.normalize_latents = false;
    Rng rng(17);
    KnowledgeEncoders enc(cfg, rng);
    Rng train(19);
    train_task_infer(enc, {rows_a, rows_b}, 0.0, 600, train);
    Mat zp = enc.encode_com(rows_a.leftCols(32));
    Mat zk = enc.encode_spec(rows_b.leftCols(32));
    REQUIRE(loss_orth(zp, zk) < 1e-3); // raw Frobenius value, per the degenerate route

    // with normalization on, the same training cannot collapse the latents
    CmckConfig cfg2 = small_cfg(F);
    Rng rng2(17);
    KnowledgeEncoders enc2(cfg2, rng2);
    Rng train2(19);
    train_task_infer(enc2, {rows_a, rows_b}, 0.0, 600, train2);
    Mat z2 = enc2.encode_com(rows_a.leftCols(32));
    double mean_norm = 0.0;
    for (int c = 0; c < 32; ++c) mean_norm += z2.col(c).norm() / 32.0;
    REQUIRE(mean_norm > 0.05); // latents keep usable scale
}

TEST_CASE("train_task_infer: a single channel is rejected") {
    CmckConfig cfg = small_cfg(4);
    Rng rng(3);
    KnowledgeEncoders enc(cfg, rng);
    Rng train(5);
    std::vector<Mat> one = {Mat::Random(4, 10)};
    REQUIRE_THROWS_AS(train_task_infer(enc, one, 1.0, 1, train), Error);
}

TEST_CASE("task_infer_loss: reported loss equals independently recomputed parts") {
    const int F = 5;
    CmckConfig cfg = small_cfg(F);
    Rng rng(23);
    KnowledgeEncoders enc(cfg, rng);
    Mat cp = Mat::Random(F, 12), ck = Mat::Random(F, 12);
    auto parts = task_infer_loss(enc, {cp}, {ck}, 1.7, nullptr, nullptr, nullptr);

    // independent recomputation
    Mat zp = enc.encode_com(cp), zk = enc.encode_spec(ck);
    Mat zp_hat = zp, zk_hat = zk;
    for (int c = 0; c < 12; ++c) {
        zp_hat.col(c) /= std::max(zp.col(c).norm(), 1e-8);
        zk_hat.col(c) /= std::max(zk.col(c).norm(), 1e-8);
    }
    const double orth = loss_orth(zp_hat, zk_hat) / (12.0 * 12.0);
    const double rec = loss_smse(ck, enc.dec().forward(zp + zk));
    REQUIRE(parts.orth == Catch::Approx(orth).margin(1e-9));
    REQUIRE(parts.recon == Catch::Approx(rec).margin(1e-9));
    REQUIRE(parts.total == Catch::Approx(orth + 1.7 * rec).margin(1e-6));
}

TEST_CASE("task_infer_loss: gradients match finite differences for all three nets") {
    const int F = 4;
    CmckConfig cfg = small_cfg(F, 3);
    cfg.hidden = {10};
    Rng rng(29);
    KnowledgeEncoders enc(cfg, rng);
    Mat cp = Mat::Random(F, 6), ck = Mat::Random(F, 6);

    ParamGrad g_com = enc.com().zero_grad();
    ParamGrad g_spec = enc.spec().zero_grad();
    ParamGrad g_dec = enc.dec().zero_grad();
    task_infer_loss(enc, {cp}, {ck}, 1.3, &g_com, &g_spec, &g_dec);
    auto eval = [&]() { return task_infer_loss(enc, {cp}, {ck}, 1.3, nullptr, nullptr, nullptr).total; };

    REQUIRE(nn::rel_err(nn::Mlp::flatten(g_com), nn::finite_diff_grad(enc.com(), eval)) < 1e-3);
    REQUIRE(nn::rel_err(nn::Mlp::flatten(g_spec), nn::finite_diff_grad(enc.spec(), eval)) < 1e-3);
    REQUIRE(nn::rel_err(nn::Mlp::flatten(g_dec), nn::finite_diff_grad(enc.dec(), eval)) < 1e-3);
}

TEST_CASE("augment_state: cold start, fixed width, permutation invariance") {
    const int F = 6;
    CmckConfig cfg = small_cfg(F, 5);
    Rng rng(31);
    KnowledgeEncoders enc(cfg, rng);
    Rng noise(37);
    nn::Vec obs = nn::Vec::Random(9);

    // empty window -> zero latent appended
    Mat empty(F, 0);
    nn::Vec cold = augment_state(obs, empty, enc);
    REQUIRE(cold.size() == 9 + 5);
    REQUIRE(cold.tail(5).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((cold.head(9) - obs).norm() == 0.0);

    // width is d_z regardless of window length
    for (int len : {1, 7, 64}) {
        Mat win = Mat::Random(F, len);
        REQUIRE(enc.aggregate(win).size() == 5);
    }

    // permuting context rows leaves z* unchanged (mean pooling)
    Mat win = Mat::Random(F, 8);
    Mat perm(F, 8);
    std::vector<int> order = {3, 1, 7, 0, 6, 2, 5, 4};
    for (int i = 0; i < 8; ++i) perm.col(i) = win.col(order[i]);
    REQUIRE((enc.aggregate(win) - enc.aggregate(perm)).norm() < 1e-12);
}

TEST_CASE("sliding_zstars agrees with the rolling context window") {
    const int F = 5;
    CmckConfig cfg = small_cfg(F, 4);
    Rng rng(41);
    KnowledgeEncoders enc(cfg, rng);
    Mat stream = Mat::Random(F, 40);
    const int W = 8;
    auto table = sliding_zstars(enc, stream, W);
    REQUIRE(table.size() == 41);
    ContextWindow roll(&enc, W);
    REQUIRE((table[0] - roll.zstar()).norm() == 0.0);
    for (int i = 0; i < 40; ++i) {
        roll.push(stream.col(i));
        REQUIRE((table[i + 1] - roll.zstar()).norm() < 1e-9);
    }
}

TEST_CASE("phase separation: frozen encoders keep their parameter hash") {
    const int F = 6;
    CmckConfig cfg = small_cfg(F);
    Rng rng(43);
    KnowledgeEncoders enc(cfg, rng);
    Rng train(47);
    train_task_infer(enc, {Mat::Random(F, 50), Mat::Random(F, 50)}, 1.0, 20, train);
    const std::uint64_t before = enc.param_hash();
    // phase 2: only read paths
    Mat stream = Mat::Random(F, 30);
    sliding_zstars(enc, stream, 8);
    enc.aggregate(stream.leftCols(5));
    augment_state(nn::Vec::Random(4), stream.leftCols(9), enc);
    REQUIRE(enc.param_hash() == before);
}
