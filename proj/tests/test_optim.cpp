#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "focusnet/checkpoint.hpp"
#include "focusnet/optim.hpp"
#include "focusnet/ops.hpp"
#include "test_util.hpp"

using namespace focusnet;
using namespace focusnet::testutil;

TEST_CASE("dice loss hand examples") {
    SUBCASE("all-ones prediction against a half-full mask gives 2/7") {
        Tape<double> t;
        const int p = t.leaf(TensorD({4}, {1, 1, 1, 1}));
        const TensorD gt({4}, {1, 1, 0, 0});
        const int loss = ops::dice_loss(t, p, gt, 1.0);
        CHECK(t.val(loss).data[0] == doctest::Approx(2.0 / 7.0).epsilon(1e-7));
    }
    SUBCASE("binary-identical inputs give exactly zero") {
        Tape<double> t;
        const TensorD gt({6}, {1, 0, 1, 1, 0, 0});
        const int p = t.leaf(gt);
        CHECK(t.val(ops::dice_loss(t, p, gt, 1.0)).data[0] == 0.0);
        const int p2 = t.leaf(gt);
        CHECK(t.val(ops::dice_loss(t, p2, gt, 0.37)).data[0] == 0.0);
    }
    SUBCASE("all-zero prediction and mask give zero via smoothing") {
        Tape<double> t;
        const int p = t.leaf(TensorD::zeros({5}));
        CHECK(t.val(ops::dice_loss(t, p, TensorD::zeros({5}), 1.0)).data[0] == 0.0);
    }
    SUBCASE("random valid inputs stay in [0,1)") {
        RngState rng(50);
        for (int trial = 0; trial < 50; ++trial) {
            Tape<double> t;
            TensorD prob({32});
            for (auto& v : prob.data) v = rng.uniform();
            TensorD gt({32});
            for (auto& v : gt.data) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
            const double loss = t.val(ops::dice_loss(t, t.leaf(prob), gt, 1.0)).data[0];
            CHECK(loss >= 0.0);
            CHECK(loss < 1.0);
        }
    }
    SUBCASE("non-binary ground truth is rejected") {
        Tape<double> t;
        const int p = t.leaf(TensorD::zeros({2}));
        CHECK_THROWS_AS(ops::dice_loss(t, p, TensorD({2}, {0.5, 1.0}), 1.0), ParamError);
    }
}

TEST_CASE("adam closed-form first step") {
    std::map<std::string, TensorD> params;
    params["w"] = TensorD({1}, {0.0});
    GradientSet<double> grads;
    grads["w"] = TensorD({1}, {0.5});
    AdamState<double> state;
    adam_step(params, grads, state);
    CHECK(state.t == 1);
    // m-hat = g, v-hat = g^2, update = -lr * g / (|g| + eps)
    CHECK(params["w"].data[0] == doctest::Approx(-9.99999980e-4).epsilon(1e-9));
}

TEST_CASE("adam with zero gradients leaves parameters unchanged") {
    RngState rng(51);
    std::map<std::string, TensorF> params;
    params["a"] = random_tensor_f({3, 2}, rng);
    params["b"] = random_tensor_f({4}, rng);
    const auto before = params;
    GradientSet<float> grads;
    grads["a"] = TensorF::zeros({3, 2});
    grads["b"] = TensorF::zeros({4});
    AdamState<float> state;
    for (int i = 0; i < 7; ++i) adam_step(params, grads, state);
    CHECK(state.t == 7);
    CHECK(params["a"].data == before.at("a").data);
    CHECK(params["b"].data == before.at("b").data);
}

TEST_CASE("adam is deterministic and validates gradients") {
    RngState rng(52);
    std::map<std::string, TensorF> p1;
    p1["w"] = random_tensor_f({5}, rng);
    auto p2 = p1;
    GradientSet<float> grads;
    grads["w"] = random_tensor_f({5}, rng);
    AdamState<float> s1, s2;
    for (int i = 0; i < 3; ++i) {
        adam_step(p1, grads, s1);
        adam_step(p2, grads, s2);
    }
    CHECK(p1["w"].data == p2["w"].data);

    GradientSet<float> missing;
    CHECK_THROWS_AS(adam_step(p1, missing, s1), ParamError);
    GradientSet<float> wrong;
    wrong["w"] = TensorF::zeros({4});
    CHECK_THROWS_AS(adam_step(p1, wrong, s1), ShapeError);
}

TEST_CASE("plateau schedule hand simulations") {
    SUBCASE("five stalls halve the rate exactly once") {
        PlateauState s;
        CHECK_FALSE(plateau_update(s, 0.5));  // establishes the best
        for (int i = 0; i < 4; ++i) {
            CHECK_FALSE(plateau_update(s, 0.4995));
            CHECK(s.lr == 1e-3);
        }
        CHECK(plateau_update(s, 0.4995));  // fifth consecutive stall
        CHECK(s.lr == 0.5e-3);
        CHECK(s.counter == 0);
    }
    SUBCASE("strict improvement keeps the rate fixed") {
        PlateauState s;
        double loss = 1.0;
        for (int i = 0; i < 30; ++i) {
            CHECK_FALSE(plateau_update(s, loss));
            CHECK(s.lr == 1e-3);
            loss -= 0.01;
        }
    }
    SUBCASE("improvement below min_delta counts as a stall") {
        PlateauState s;
        plateau_update(s, 1.0);
        const double loss = 1.0 - 0.0009765625;  // improves by 2^-10, under min_delta
        for (int i = 0; i < 4; ++i) CHECK_FALSE(plateau_update(s, loss));
        CHECK(plateau_update(s, loss));
        CHECK(s.lr == 0.5e-3);
    }
    SUBCASE("rate is non-increasing and each cut is a factor of two") {
        PlateauState s;
        RngState rng(53);
        double prev_lr = s.lr;
        for (int i = 0; i < 100; ++i) {
            const bool changed = plateau_update(s, rng.uniform(0.3, 0.6));
            CHECK(s.lr <= prev_lr);
            if (changed) CHECK(s.lr == doctest::Approx(prev_lr * 0.5));
            prev_lr = s.lr;
        }
    }
}

TEST_CASE("arch config text round trip") {
    ArchConfig cfg = tiny_config(64, 3);
    cfg.dropout_rate = 0.15;
    const ArchConfig back = arch_config_from_text(arch_config_to_text(cfg));
    CHECK(back == cfg);
    CHECK_THROWS_AS(arch_config_from_text("bogus_key = 3\n"), CheckpointError);
}

TEST_CASE("checkpoint round trip is bit-identical") {
    const ArchConfig cfg = tiny_config(16, 1);
    RngState rng(54);
    CheckpointRecord rec;
    rec.model = build<float>(cfg, rng);
    for (auto& [name, state] : rec.model.bn) {
        for (auto& v : state.running_mean.data) v = static_cast<float>(rng.uniform(-1, 1));
        for (auto& v : state.running_var.data) v = static_cast<float>(rng.uniform(0.5, 2.0));
    }
    rec.norm_mean = {0.25f};
    rec.norm_std = {0.125f};
    rec.best_val_loss = 0.123456789012345;
    rec.epoch = 17;

    const std::string path = (std::filesystem::temp_directory_path() / "ckpt_test.bin").string();
    save_checkpoint(rec, path);
    const CheckpointRecord back = load_checkpoint(path);

    CHECK(back.model.cfg == cfg);
    CHECK(back.best_val_loss == rec.best_val_loss);
    CHECK(back.epoch == rec.epoch);
    CHECK(back.norm_mean == rec.norm_mean);
    CHECK(back.norm_std == rec.norm_std);
    REQUIRE(back.model.params.size() == rec.model.params.size());
    for (const auto& [name, t] : rec.model.params) {
        CHECK(back.model.params.at(name).shape == t.shape);
        CHECK(back.model.params.at(name).data == t.data);
    }
    for (const auto& [name, state] : rec.model.bn) {
        CHECK(back.model.bn.at(name).running_mean.data == state.running_mean.data);
        CHECK(back.model.bn.at(name).running_var.data == state.running_var.data);
    }
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint corruption is diagnosed by kind") {
    const ArchConfig cfg = tiny_config(16, 1);
    RngState rng(55);
    CheckpointRecord rec;
    rec.model = build<float>(cfg, rng);
    const auto dir = std::filesystem::temp_directory_path();
    const std::string path = (dir / "ckpt_corrupt.bin").string();
    save_checkpoint(rec, path);

    SUBCASE("bad magic") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.write("JUNK", 4);
        f.close();
        try {
            load_checkpoint(path);
            FAIL("expected a checkpoint error");
        } catch (const CheckpointError& e) {
            CHECK(e.kind == CheckpointError::Kind::BadMagic);
        }
    }
    SUBCASE("truncation") {
        const auto full = std::filesystem::file_size(path);
        std::filesystem::resize_file(path, full - 10);
        try {
            load_checkpoint(path);
            FAIL("expected a checkpoint error");
        } catch (const CheckpointError& e) {
            CHECK(e.kind == CheckpointError::Kind::Truncated);
            CHECK(std::string(e.what()).find("truncated") != std::string::npos);
        }
    }
    SUBCASE("bad version") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(4);
        const char ver[4] = {9, 0, 0, 0};
        f.write(ver, 4);
        f.close();
        try {
            load_checkpoint(path);
            FAIL("expected a checkpoint error");
        } catch (const CheckpointError& e) {
            CHECK(e.kind == CheckpointError::Kind::BadVersion);
        }
    }
    std::filesystem::remove(path);
}
