#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "focusnet/data.hpp"
#include "focusnet/pnm.hpp"
#include "test_util.hpp"

using namespace focusnet;
using namespace focusnet::testutil;

namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

SegmentationSample make_sample(int channels, int size, RngState& rng, const std::string& id) {
    SegmentationSample s;
    s.id = id;
    s.image = TensorF({channels, size, size});
    for (auto& v : s.image.data) v = static_cast<float>(rng.uniform());
    s.mask = TensorF({1, size, size});
    for (auto& v : s.mask.data) v = rng.bernoulli(0.4) ? 1.0f : 0.0f;
    return s;
}

bool mask_is_binary(const TensorF& mask) {
    for (float v : mask.data) {
        if (v != 0.0f && v != 1.0f) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("pnm round trip") {
    const fs::path dir = scratch_dir("pnm_test");
    SUBCASE("grayscale") {
        PnmImage img;
        img.width = 3;
        img.height = 2;
        img.channels = 1;
        img.pixels = {0, 64, 128, 192, 255, 7};
        const std::string path = (dir / "g.pgm").string();
        write_pnm(img, path);
        const PnmImage back = read_pnm(path);
        CHECK(back.width == 3);
        CHECK(back.height == 2);
        CHECK(back.channels == 1);
        CHECK(back.pixels == img.pixels);
    }
    SUBCASE("rgb") {
        PnmImage img;
        img.width = 2;
        img.height = 2;
        img.channels = 3;
        img.pixels = {255, 0, 0, 0, 255, 0, 0, 0, 255, 10, 20, 30};
        const std::string path = (dir / "c.ppm").string();
        write_pnm(img, path);
        const PnmImage back = read_pnm(path);
        CHECK(back.channels == 3);
        CHECK(back.pixels == img.pixels);
    }
    SUBCASE("header comments are skipped") {
        const std::string path = (dir / "comment.pgm").string();
        std::ofstream os(path, std::ios::binary);
        os << "P5\n# a comment line\n2 1\n# another\n255\n";
        os.put(static_cast<char>(42));
        os.put(static_cast<char>(200));
        os.close();
        const PnmImage img = read_pnm(path);
        CHECK(img.width == 2);
        CHECK(img.pixels == std::vector<std::uint8_t>{42, 200});
    }
    SUBCASE("rejects unsupported input") {
        const std::string ascii = (dir / "ascii.pgm").string();
        std::ofstream(ascii) << "P2\n1 1\n255\n0\n";
        CHECK_THROWS_AS(read_pnm(ascii), DataError);

        const std::string wide = (dir / "wide.pgm").string();
        std::ofstream(wide, std::ios::binary) << "P5\n1 1\n65535\n\0\0";
        CHECK_THROWS_AS(read_pnm(wide), DataError);

        const std::string trunc = (dir / "trunc.pgm").string();
        std::ofstream(trunc, std::ios::binary) << "P5\n4 4\n255\nxy";
        CHECK_THROWS_AS(read_pnm(trunc), DataError);

        CHECK_THROWS_AS(read_pnm((dir / "missing.pgm").string()), DataError);
    }
    fs::remove_all(dir);
}

TEST_CASE("dataset write and load round trip") {
    const fs::path dir = scratch_dir("dataset_test");
    RngState rng(70);
    DatasetManifest manifest;
    manifest.channels = 1;
    manifest.samples.push_back(make_sample(1, 8, rng, "beta"));
    manifest.samples.push_back(make_sample(1, 8, rng, "alpha"));
    write_dataset(manifest, dir.string());

    const DatasetManifest back = load_dataset(dir.string());
    REQUIRE(back.size() == 2);
    CHECK(back.samples[0].id == "alpha");  // sorted by stem
    CHECK(back.samples[1].id == "beta");
    CHECK(back.channels == 1);
    for (const auto& s : back.samples) {
        CHECK(mask_is_binary(s.mask));
        for (float v : s.image.data) {
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
        }
    }
    // Masks survive the 0/255 byte round trip exactly.
    for (const auto& loaded : back.samples) {
        const auto orig = std::find_if(manifest.samples.begin(), manifest.samples.end(),
                                       [&](const auto& s) { return s.id == loaded.id; });
        REQUIRE(orig != manifest.samples.end());
        CHECK(orig->mask.data == loaded.mask.data);
    }
    fs::remove_all(dir);
}

TEST_CASE("load_dataset error reporting") {
    const fs::path dir = scratch_dir("dataset_err");
    CHECK_THROWS_AS(load_dataset(dir.string()), DataError);

    fs::create_directories(dir / "images");
    fs::create_directories(dir / "masks");
    PnmImage img;
    img.width = 4;
    img.height = 4;
    img.channels = 1;
    img.pixels.assign(16, 100);
    write_pnm(img, (dir / "images" / "lonely.pgm").string());
    try {
        load_dataset(dir.string());
        FAIL("expected a pairing error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("lonely") != std::string::npos);
    }
    fs::remove_all(dir);
}

TEST_CASE("mask pixels binarize at 128") {
    const fs::path dir = scratch_dir("dataset_bin");
    fs::create_directories(dir / "images");
    fs::create_directories(dir / "masks");
    PnmImage img;
    img.width = 4;
    img.height = 1;
    img.channels = 1;
    img.pixels = {0, 100, 200, 255};
    write_pnm(img, (dir / "images" / "a.pgm").string());
    PnmImage msk = img;
    msk.pixels = {0, 127, 128, 255};
    write_pnm(msk, (dir / "masks" / "a.pgm").string());

    const DatasetManifest m = load_dataset(dir.string());
    CHECK(m.samples[0].mask.data == std::vector<float>{0, 0, 1, 1});
    CHECK(m.samples[0].image.data[3] == 1.0f);
    CHECK(m.samples[0].image.data[0] == 0.0f);
    fs::remove_all(dir);
}

TEST_CASE("resize behavior") {
    RngState rng(71);
    SUBCASE("same size is the identity") {
        const SegmentationSample s = make_sample(1, 8, rng, "s");
        const SegmentationSample r = resize_sample(s, 8);
        CHECK(r.image.data == s.image.data);
        CHECK(r.mask.data == s.mask.data);
    }
    SUBCASE("constant image stays constant at any size") {
        SegmentationSample s = make_sample(1, 6, rng, "c");
        for (auto& v : s.image.data) v = 0.375f;
        for (int target : {3, 4, 12}) {
            const SegmentationSample r = resize_sample(s, target);
            CHECK(r.image.dim(1) == target);
            for (float v : r.image.data) CHECK(v == doctest::Approx(0.375).epsilon(1e-6));
            CHECK(mask_is_binary(r.mask));
        }
    }
    SUBCASE("2x2 to 1x1 averages the four pixels") {
        SegmentationSample s;
        s.id = "avg";
        s.image = TensorF({1, 2, 2}, {0.0f, 0.0f, 2.0f, 2.0f});
        s.mask = TensorF({1, 2, 2}, {1, 1, 1, 1});
        const SegmentationSample r = resize_sample(s, 1);
        CHECK(r.image.data[0] == doctest::Approx(1.0));
        CHECK(r.mask.data[0] == 1.0f);
    }
    SUBCASE("mask stays binary through fractional resizes") {
        const SegmentationSample s = make_sample(3, 7, rng, "m");
        const SegmentationSample r = resize_sample(s, 5);
        CHECK(r.image.dim(0) == 3);
        CHECK(mask_is_binary(r.mask));
    }
}

TEST_CASE("normalization") {
    RngState rng(72);
    DatasetManifest train;
    train.channels = 3;
    for (int i = 0; i < 4; ++i) {
        train.samples.push_back(make_sample(3, 8, rng, "t" + std::to_string(i)));
    }
    SUBCASE("formula example") {
        NormalizationStats stats;
        stats.mean = {0.4};
        stats.stddev = {0.2};
        SegmentationSample s = make_sample(1, 2, rng, "f");
        s.image.data = {0.6f, 0.4f, 0.2f, 0.8f};
        const SegmentationSample n = normalize(s, stats);
        CHECK(n.image.data[0] == doctest::Approx(1.0));
        CHECK(n.image.data[1] == doctest::Approx(0.0));
        CHECK(n.image.data[2] == doctest::Approx(-1.0));
        CHECK(n.mask.data == s.mask.data);
    }
    SUBCASE("self-consistency after normalizing the split") {
        const NormalizationStats stats = compute_stats(train);
        CHECK_FALSE(stats.clamped);
        DatasetManifest normed = train;
        for (auto& s : normed.samples) s = normalize(s, stats);
        const NormalizationStats again = compute_stats(normed);
        for (std::size_t c = 0; c < again.mean.size(); ++c) {
            CHECK(std::abs(again.mean[c]) < 1e-5);
            CHECK(std::abs(again.stddev[c] - 1.0) < 1e-5);
        }
    }
    SUBCASE("constant channel clamps and maps to zero") {
        DatasetManifest flat;
        flat.channels = 1;
        SegmentationSample s = make_sample(1, 4, rng, "flat");
        for (auto& v : s.image.data) v = 0.5f;
        flat.samples.push_back(s);
        const NormalizationStats stats = compute_stats(flat);
        CHECK(stats.clamped);
        CHECK(stats.stddev[0] == 1e-6);
        const SegmentationSample n = normalize(s, stats);
        for (float v : n.image.data) CHECK(v == 0.0f);
    }
    SUBCASE("stats file round trip") {
        const NormalizationStats stats = compute_stats(train);
        const fs::path dir = scratch_dir("stats_test");
        const std::string path = (dir / "stats.txt").string();
        save_stats(stats, path);
        const NormalizationStats back = load_stats(path);
        REQUIRE(back.mean.size() == stats.mean.size());
        for (std::size_t c = 0; c < stats.mean.size(); ++c) {
            CHECK(back.mean[c] == doctest::Approx(stats.mean[c]).epsilon(1e-12));
            CHECK(back.stddev[c] == doctest::Approx(stats.stddev[c]).epsilon(1e-12));
        }
        fs::remove_all(dir);
    }
    SUBCASE("channel count mismatch") {
        NormalizationStats stats;
        stats.mean = {0.5};
        stats.stddev = {0.5};
        CHECK_THROWS_AS(normalize(train.samples[0], stats), ShapeError);
    }
}

TEST_CASE("augmentation") {
    RngState rng(73);
    AugmentationConfig identity;
    identity.hflip_prob = 0.0;
    identity.vflip_prob = 0.0;
    identity.zoom_lo = 1.0;
    identity.zoom_hi = 1.0;
    identity.channel_shift = 0.0;

    SUBCASE("identity settings reproduce the sample exactly") {
        const SegmentationSample s = make_sample(3, 8, rng, "id");
        RngState arng(1);
        const SegmentationSample a = augment(s, identity, arng);
        CHECK(a.image.data == s.image.data);
        CHECK(a.mask.data == s.mask.data);
    }
    SUBCASE("double horizontal flip is the identity") {
        AugmentationConfig flip = identity;
        flip.hflip_prob = 1.0;
        const SegmentationSample s = make_sample(1, 8, rng, "fl");
        RngState r1(2), r2(3);
        const SegmentationSample once = augment(s, flip, r1);
        const SegmentationSample twice = augment(once, flip, r2);
        CHECK(once.image.data != s.image.data);
        CHECK(twice.image.data == s.image.data);
        CHECK(twice.mask.data == s.mask.data);
    }
    SUBCASE("double vertical flip is the identity") {
        AugmentationConfig flip = identity;
        flip.vflip_prob = 1.0;
        const SegmentationSample s = make_sample(1, 8, rng, "fv");
        RngState r1(4), r2(5);
        const SegmentationSample twice = augment(augment(s, flip, r1), flip, r2);
        CHECK(twice.image.data == s.image.data);
        CHECK(twice.mask.data == s.mask.data);
    }
    SUBCASE("channel shifts only move the image, bounded and clamped") {
        AugmentationConfig shift = identity;
        shift.channel_shift = 0.1;
        shift.shift_fraction = 1.0;
        const SegmentationSample s = make_sample(3, 8, rng, "cs");
        RngState arng(6);
        const SegmentationSample a = augment(s, shift, arng);
        CHECK(a.mask.data == s.mask.data);
        for (std::size_t i = 0; i < s.image.data.size(); ++i) {
            CHECK(a.image.data[i] >= 0.0f);
            CHECK(a.image.data[i] <= 1.0f);
            CHECK(std::abs(a.image.data[i] - s.image.data[i]) <= 0.1f + 1e-6f);
        }
    }
    SUBCASE("masks and dimensions survive 1000 random draws") {
        AugmentationConfig cfg;  // defaults: flips 0.5, zoom [0.8,1.2], shift 0.1
        const SegmentationSample s = make_sample(3, 12, rng, "pr");
        RngState arng(7);
        for (int i = 0; i < 1000; ++i) {
            const SegmentationSample a = augment(s, cfg, arng);
            REQUIRE(a.image.shape == s.image.shape);
            REQUIRE(a.mask.shape == s.mask.shape);
            REQUIRE(mask_is_binary(a.mask));
        }
    }
    SUBCASE("invalid settings are rejected") {
        AugmentationConfig bad = identity;
        bad.zoom_lo = 1.1;
        bad.zoom_hi = 1.3;  // range must contain 1.0
        CHECK_THROWS_AS(bad.validate(), ParamError);
        bad = identity;
        bad.hflip_prob = 1.5;
        CHECK_THROWS_AS(bad.validate(), ParamError);
    }
}

TEST_CASE("expand_dataset reaches the augmentation target") {
    RngState rng(74);
    DatasetManifest manifest;
    manifest.channels = 1;
    for (int i = 0; i < 267; ++i) {
        manifest.samples.push_back(make_sample(1, 16, rng, "orig" + std::to_string(i)));
    }
    AugmentationConfig cfg;
    RngState e1(8);
    const DatasetManifest big = expand_dataset(manifest, cfg, 1700, e1);
    REQUIRE(big.size() == 1700);
    for (std::size_t i = 0; i < manifest.samples.size(); ++i) {
        CHECK(big.samples[i].id == manifest.samples[i].id);
        CHECK(big.samples[i].image.data == manifest.samples[i].image.data);
    }
    CHECK(big.samples[267].id.find("_aug") != std::string::npos);

    RngState e2(8);
    const DatasetManifest again = expand_dataset(manifest, cfg, 1700, e2);
    for (std::size_t i = 0; i < big.samples.size(); ++i) {
        REQUIRE(again.samples[i].id == big.samples[i].id);
        REQUIRE(again.samples[i].image.data == big.samples[i].image.data);
    }

    RngState e3(9);
    const DatasetManifest same = expand_dataset(manifest, cfg, 267, e3);
    CHECK(same.size() == 267);
    CHECK_THROWS_AS(expand_dataset(manifest, cfg, 100, e3), ParamError);
}

TEST_CASE("split is seeded, disjoint and exhaustive") {
    RngState rng(75);
    DatasetManifest manifest;
    manifest.channels = 1;
    for (int i = 0; i < 10; ++i) {
        manifest.samples.push_back(make_sample(1, 8, rng, "s" + std::to_string(i)));
    }
    auto [train, val] = split(manifest, 0.8, 42);
    CHECK(train.size() == 8);
    CHECK(val.size() == 2);

    std::set<std::string> ids;
    for (const auto& s : train.samples) ids.insert(s.id);
    for (const auto& s : val.samples) ids.insert(s.id);
    CHECK(ids.size() == 10);

    auto [t2, v2] = split(manifest, 0.8, 42);
    for (std::size_t i = 0; i < train.samples.size(); ++i) {
        CHECK(t2.samples[i].id == train.samples[i].id);
    }

    CHECK_THROWS_AS(split(manifest, 0.0, 1), ParamError);
    CHECK_THROWS_AS(split(manifest, 1.0, 1), ParamError);
    DatasetManifest single;
    single.samples.push_back(manifest.samples[0]);
    CHECK_THROWS_AS(split(single, 0.8, 1), ParamError);
}

TEST_CASE("synthetic scenes") {
    SUBCASE("masks equal the analytic ellipse predicate") {
        RngState rng(76);
        for (int trial = 0; trial < 5; ++trial) {
            const auto ellipses = random_ellipses(32, rng);
            const SegmentationSample s = render_scene(ellipses, 32, 1, rng, "scene");
            for (int y = 0; y < 32; ++y) {
                for (int x = 0; x < 32; ++x) {
                    bool inside = false;
                    for (const auto& e : ellipses) inside = inside || ellipse_contains(e, x, y);
                    REQUIRE(s.mask.at3(0, y, x) == (inside ? 1.0f : 0.0f));
                }
            }
        }
    }
    SUBCASE("generator contract") {
        RngState rng(77);
        const DatasetManifest data = synth_generate(4, 16, rng, 1);
        REQUIRE(data.size() == 4);
        CHECK(data.channels == 1);
        for (const auto& s : data.samples) {
            CHECK(mask_is_binary(s.mask));
            float acc = 0;
            for (float v : s.mask.data) acc += v;
            CHECK(acc > 0.0f);  // at least one ellipse pixel
            for (float v : s.image.data) {
                CHECK(v >= 0.0f);
                CHECK(v <= 1.0f);
            }
        }
    }
    SUBCASE("same seed reproduces the dataset") {
        RngState r1(78), r2(78);
        const DatasetManifest a = synth_generate(3, 16, r1, 3);
        const DatasetManifest b = synth_generate(3, 16, r2, 3);
        for (std::size_t i = 0; i < a.samples.size(); ++i) {
            REQUIRE(a.samples[i].image.data == b.samples[i].image.data);
            REQUIRE(a.samples[i].mask.data == b.samples[i].mask.data);
        }
    }
    SUBCASE("parameter validation") {
        RngState rng(79);
        CHECK_THROWS_AS(synth_generate(0, 16, rng, 1), ParamError);
        CHECK_THROWS_AS(synth_generate(4, 8, rng, 1), ParamError);
        CHECK_THROWS_AS(synth_generate(4, 16, rng, 2), ParamError);
    }
}
