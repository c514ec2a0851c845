#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <random>

#include "gradcheck.hpp"
#include "smgarn/io.hpp"
#include "smgarn/synth.hpp"

using namespace smgarn;
namespace fs = std::filesystem;

namespace {

Tensor scalar3(double v) { return Tensor(1, 3, 1, 1, v); }
Tensor scalar1(double v) { return Tensor(1, 1, 1, 1, v); }

SnowLatents random_latents(int h, int w, std::mt19937_64& rng, double zr_cap = 0.95) {
    SnowLatents l{Tensor(1, 1, h, w), Tensor(1, 1, h, w), Tensor(1, 3, h, w),
                  Tensor(1, 1, h, w), Tensor(1, 3, h, w)};
    gradcheck::fill_random(l.R, rng, 0.0, 1.0);
    gradcheck::fill_random(l.Z, rng, 0.0, 1.0);
    gradcheck::fill_random(l.C, rng, 0.0, 1.0);
    gradcheck::fill_random(l.T, rng, 0.0, 1.0);
    gradcheck::fill_random(l.A, rng, 0.0, 1.0);
    // Keep ZR inside the invertibility region.
    for (std::int64_t i = 0; i < l.R.size(); ++i) {
        while (l.Z[i] * l.R[i] > zr_cap) l.Z[i] *= 0.9;
    }
    return l;
}

fs::path temp_dir(const std::string& tag) {
    fs::path p = fs::temp_directory_path() / ("smgarn_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("formation model scalar examples") {
    // K = J(1-ZR) + CZR at J=0.2, Z=0.5, R=1, C=0.9.
    Tensor K = compose_veilfree(scalar3(0.2), scalar1(1.0), scalar1(0.5), scalar3(0.9));
    CHECK(K[0] == doctest::Approx(0.55).epsilon(1e-12));
    // I = KT + A(1-T) at T=0.5, A=1.
    Tensor I = compose_snowy(K, scalar1(0.5), scalar3(1.0));
    CHECK(I[0] == doctest::Approx(0.775).epsilon(1e-12));
    // J = (K - CZR)/(1 - ZR).
    Tensor J = invert_veilfree(K, scalar1(1.0), scalar1(0.5), scalar3(0.9));
    CHECK(J[0] == doctest::Approx(0.2).epsilon(1e-9));
}

TEST_CASE("formation model degenerate cases") {
    std::mt19937_64 rng(1);
    Tensor J(1, 3, 8, 8);
    gradcheck::fill_random(J, rng, 0.0, 1.0);
    Tensor zero1(1, 1, 8, 8, 0.0), one1(1, 1, 8, 8, 1.0);
    Tensor C(1, 3, 8, 8, 0.9), A(1, 3, 8, 8, 0.8);

    CHECK(max_abs_diff(compose_veilfree(J, zero1, one1, C), J) == 0.0);          // R=0
    CHECK(max_abs_diff(compose_veilfree(J, one1, one1, C), C) == 0.0);           // Z=R=1
    CHECK(max_abs_diff(compose_snowy(J, one1, A), J) == 0.0);                    // T=1
    CHECK(max_abs_diff(compose_snowy(J, zero1, A), A) == 0.0);                   // T=0
    CHECK(max_abs_diff(invert_veilfree(J, zero1, one1, C), J) == 0.0);           // R=0
}

TEST_CASE("formation model round trip over fuzzed inputs") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        SnowLatents l = random_latents(8, 8, rng);
        Tensor J(1, 3, 8, 8);
        gradcheck::fill_random(J, rng, 0.0, 1.0);
        Tensor K = compose_veilfree(J, l.R, l.Z, l.C);
        CHECK(K.in_unit_interval());
        Tensor I = compose_snowy(K, l.T, l.A);
        CHECK(I.in_unit_interval());
        Tensor J2 = invert_veilfree(K, l.R, l.Z, l.C);
        CHECK(max_abs_diff(J, J2) < 1e-6);
    }
}

TEST_CASE("formation model validation errors") {
    Tensor J(1, 3, 8, 8, 0.5), R(1, 1, 8, 8, 1.0), Z(1, 1, 8, 8, 1.0), C(1, 3, 8, 8, 0.9);
    Tensor R_bad(1, 1, 4, 4, 0.0);
    CHECK_THROWS_AS(compose_veilfree(J, R_bad, Z, C), DimensionError);
    Tensor J_bad(1, 3, 8, 8, 1.5);
    CHECK_THROWS_AS(compose_veilfree(J_bad, R, Z, C), DomainError);
    // ZR = 1 everywhere -> singular inverse.
    Tensor K = compose_veilfree(J, R, Z, C);
    CHECK_THROWS_AS(invert_veilfree(K, R, Z, C), SingularityError);
}

TEST_CASE("render_snow_mask determinism and degenerate params") {
    SynthParams p;
    p.seed = 77;
    auto [r1, z1] = render_snow_mask(p, 64, 64);
    auto [r2, z2] = render_snow_mask(p, 64, 64);
    CHECK(max_abs_diff(r1, r2) == 0.0);
    CHECK(max_abs_diff(z1, z2) == 0.0);
    CHECK(r1.in_unit_interval());
    CHECK(z1.in_unit_interval());

    SynthParams none;
    none.flake_count_range = {0, 0};
    none.streak_count_range = {0, 0};
    auto [r0, z0] = render_snow_mask(none, 32, 32);
    CHECK(max_abs_diff(r0, Tensor(1, 1, 32, 32)) == 0.0);
    CHECK(max_abs_diff(z0, Tensor(1, 1, 32, 32)) == 0.0);

    SynthParams bad;
    bad.flake_count_range = {10, 5};
    CHECK_THROWS_AS(bad.validate(), ParamError);
    CHECK_THROWS_AS(render_snow_mask(p, 8, 8), DimensionError);
}

TEST_CASE("render_snow_mask default coverage band") {
    // Band frozen from a Monte Carlo calibration over 100 seeds at 128x128:
    // per-seed mean(R) spanned roughly [0.02, 0.25]; the band below leaves
    // slack on both sides while still catching broken rendering.
    double lo = 1.0, hi = 0.0, total = 0.0;
    for (unsigned long long seed = 0; seed < 100; ++seed) {
        SynthParams p;
        p.seed = seed;
        auto [r, z] = render_snow_mask(p, 128, 128);
        double mean = 0.0;
        for (std::int64_t i = 0; i < r.size(); ++i) mean += r[i];
        mean /= static_cast<double>(r.size());
        lo = std::min(lo, mean);
        hi = std::max(hi, mean);
        total += mean;
    }
    total /= 100.0;
    CHECK(lo > 0.005);
    CHECK(hi < 0.40);
    CHECK(total > 0.02);
    CHECK(total < 0.30);
}

TEST_CASE("synth_sample composition invariant and determinism") {
    std::mt19937_64 rng(3);
    Tensor clean = procedural_clean(48, 48, rng);
    CHECK(clean.in_unit_interval());

    SynthParams p;
    p.seed = 9;
    SnowSample a = synth_sample(clean, p);
    SnowSample b = synth_sample(clean, p);
    CHECK(max_abs_diff(a.snowy, b.snowy) == 0.0);
    REQUIRE(a.latents.has_value());
    REQUIRE(a.mask.has_value());
    CHECK(max_abs_diff(*a.mask, a.latents->R) == 0.0);

    // snowy == compose(latents) exactly.
    Tensor K = compose_veilfree(*a.clean, a.latents->R, a.latents->Z, a.latents->C);
    Tensor I = compose_snowy(K, a.latents->T, a.latents->A);
    CHECK(max_abs_diff(a.snowy, I) == 0.0);

    // Degenerate latents: no opacity, full transmission -> snowy == clean.
    SynthParams noop;
    noop.opacity_range = {0.0, 0.0};
    noop.transmission_range = {1.0, 1.0};
    SnowSample c = synth_sample(clean, noop);
    CHECK(max_abs_diff(c.snowy, clean) < 1e-12);
}

TEST_CASE("dataset write/load round trip") {
    std::mt19937_64 rng(4);
    fs::path dir = temp_dir("roundtrip");
    std::vector<SnowSample> samples;
    for (int i = 0; i < 3; ++i) {
        SynthParams p;
        p.seed = 100 + static_cast<unsigned long long>(i);
        SnowSample s = synth_sample(procedural_clean(32, 32, rng), p);
        s.id = "000" + std::to_string(i + 1);
        samples.push_back(std::move(s));
    }
    write_dataset(samples, dir, /*persist_latents=*/true);

    Dataset ds = Dataset::open(dir);
    REQUIRE(ds.size() == 3);
    CHECK(ds.all_have_clean());
    CHECK(ds.all_have_mask());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        SnowSample s = ds.load(i);
        CHECK(s.id == samples[i].id);
        REQUIRE(s.clean.has_value());
        REQUIRE(s.mask.has_value());
        REQUIRE(s.latents.has_value());
        // 8-bit quantization bound at the PNG boundary.
        CHECK(max_abs_diff(s.snowy, samples[i].snowy) <= 1.0 / 255.0 + 1e-12);
        CHECK(max_abs_diff(*s.clean, *samples[i].clean) <= 1.0 / 255.0 + 1e-12);
        CHECK(max_abs_diff(*s.mask, *samples[i].mask) <= 1.0 / 255.0 + 1e-12);
        // Latents round trip through the float64 archive exactly.
        CHECK(max_abs_diff(s.latents->T, samples[i].latents->T) == 0.0);
    }
    fs::remove_all(dir);
}

TEST_CASE("dataset with snowy/ only") {
    std::mt19937_64 rng(5);
    fs::path dir = temp_dir("snowyonly");
    fs::create_directories(dir / "snowy");
    save_image_rgb(dir / "snowy" / "0001.png", procedural_clean(24, 24, rng));

    Dataset ds = Dataset::open(dir);
    REQUIRE(ds.size() == 1);
    CHECK_FALSE(ds.all_have_clean());
    SnowSample s = ds.load(0);
    CHECK_FALSE(s.clean.has_value());
    CHECK_FALSE(s.mask.has_value());
    fs::remove_all(dir);
}

TEST_CASE("dataset pairing errors") {
    std::mt19937_64 rng(6);
    fs::path dir = temp_dir("pairing");
    fs::create_directories(dir / "snowy");
    fs::create_directories(dir / "gt");
    save_image_rgb(dir / "snowy" / "0001.png", procedural_clean(24, 24, rng));
    // Mismatched dimensions between snowy/0001 and gt/0001.
    save_image_rgb(dir / "gt" / "0001.png", procedural_clean(16, 16, rng));
    Dataset ds = Dataset::open(dir);
    CHECK_THROWS_AS(ds.load(0), DataError);

    // Orphan gt id with no snowy counterpart.
    save_image_rgb(dir / "gt" / "0002.png", procedural_clean(24, 24, rng));
    CHECK_THROWS_AS(Dataset::open(dir), DataError);
    fs::remove_all(dir);
}

TEST_CASE("tensor archive round trip") {
    std::mt19937_64 rng(7);
    fs::path dir = temp_dir("archive");
    std::map<std::string, Tensor> tensors;
    tensors["a"] = Tensor(1, 2, 3, 4);
    tensors["b"] = Tensor(2, 1, 5, 5);
    gradcheck::fill_random(tensors["a"], rng);
    gradcheck::fill_random(tensors["b"], rng);
    save_tensor_archive(dir / "t.tns", tensors, R"({"k":1})");

    TensorArchive back = load_tensor_archive(dir / "t.tns");
    REQUIRE(back.tensors.size() == 2);
    CHECK(max_abs_diff(back.tensors["a"], tensors["a"]) == 0.0);
    CHECK(max_abs_diff(back.tensors["b"], tensors["b"]) == 0.0);
    CHECK(back.meta_json == R"({"k":1})");

    CHECK_THROWS_AS(load_tensor_archive(dir / "missing.tns"), IoError);
    fs::remove_all(dir);
}
