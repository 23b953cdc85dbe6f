#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <cstring>

#include "ledt/synthetic_world.hpp"

using namespace ledt;

namespace {

WorldConfig small_config() {
    WorldConfig c;
    c.samples_per_category = 8;
    return c;
}

bool bit_equal(const Mat& a, const Mat& b) {
    return a.rows == b.rows && a.cols == b.cols &&
           std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_SUITE("synthetic_world") {

TEST_CASE("construction is a pure function of the seed") {
    const WorldConfig c = small_config();
    const WorldSpec w1 = make_world(c, 99);
    const WorldSpec w2 = make_world(c, 99);
    CHECK(bit_equal(w1.gen, w2.gen));
    CHECK(bit_equal(w1.basis, w2.basis));
    CHECK(bit_equal(w1.embed, w2.embed));
    CHECK(bit_equal(w1.category_means[0], w2.category_means[0]));
    const WorldSpec w3 = make_world(c, 100);
    CHECK_FALSE(bit_equal(w1.gen, w3.gen));
}

TEST_CASE("the encoder inverts the generator") {
    const WorldSpec w = make_world(small_config(), 7);
    const int flat = w.cfg.latent_layers * w.cfg.latent_dim;
    CHECK(max_abs_diff(matmul(w.enc, w.gen), identity(flat)) < 1e-8);
}

TEST_CASE("attribute directions are orthonormal") {
    const WorldSpec w = make_world(small_config(), 7);
    CHECK(max_abs_diff(matmul(w.basis, transpose(w.basis)), identity(w.cfg.true_attrs)) < 1e-10);
}

TEST_CASE("encode_image inverts generate_image") {
    const WorldSpec w = make_world(small_config(), 13);
    Rng rng(77);
    const LatentCode latent = randn(rng, w.cfg.latent_layers, w.cfg.latent_dim);
    const Mat img = generate_image(w, latent);
    CHECK(max_abs_diff(encode_image(w, img), latent) < 1e-8);
}

TEST_CASE("Mat and Var generator paths agree bitwise") {
    const WorldSpec w = make_world(small_config(), 13);
    Rng rng(78);
    const LatentCode latent = randn(rng, w.cfg.latent_layers, w.cfg.latent_dim);
    const Mat img = generate_image(w, latent);
    const ad::Var img_v = generate_image(w, ad::constant(latent));
    CHECK(bit_equal(img, img_v->value));
    const Mat emb = perceptual_embed(w, img);
    const ad::Var emb_v = perceptual_embed(w, img_v);
    CHECK(bit_equal(emb, emb_v->value));
}

TEST_CASE("perceptual embeddings have unit norm") {
    const WorldSpec w = make_world(small_config(), 13);
    Rng rng(79);
    const Mat img = randn(rng, 1, w.cfg.image_dim);
    const Mat e = perceptual_embed(w, img);
    CHECK(frob_norm(e) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("dataset sampling is deterministic and order independent") {
    const WorldSpec w = make_world(small_config(), 5);
    const Rng rng(1234);
    const auto d1 = sample_dataset(w, 8, rng);
    const auto d2 = sample_dataset(w, 8, rng);
    REQUIRE(d1.size() == d2.size());
    REQUIRE(d1.size() == static_cast<std::size_t>(8 * w.n_categories()));
    for (std::size_t i = 0; i < d1.size(); ++i) {
        CHECK(d1[i].category == d2[i].category);
        CHECK(bit_equal(d1[i].image, d2[i].image));
        CHECK(bit_equal(d1[i].latent, d2[i].latent));
    }
}

TEST_CASE("sampled latents decompose as mean plus basis combination") {
    const WorldSpec w = make_world(small_config(), 5);
    const auto data = sample_dataset(w, 8, Rng(1234));
    const int flat = w.cfg.latent_layers * w.cfg.latent_dim;
    for (const Sample& s : data) {
        const Mat expect =
            add(w.category_means[static_cast<std::size_t>(s.category)],
                reshape(matmul(s.true_coeffs, w.basis), w.cfg.latent_layers, w.cfg.latent_dim));
        CHECK(max_abs_diff(s.latent, expect) <= 1e-12);
        CHECK(s.true_coeffs.cols == w.cfg.true_attrs);
        (void)flat;
    }
}

TEST_CASE("images are the generated latent plus bounded observation noise") {
    WorldConfig c = small_config();
    const WorldSpec w = make_world(c, 5);
    const auto data = sample_dataset(w, 32, Rng(99));
    double mean_sq = 0.0;
    for (const Sample& s : data) {
        const Mat clean = generate_image(w, s.latent);
        mean_sq += sum_sq(sub(s.image, clean)) / (c.image_dim * static_cast<double>(data.size()));
    }
    // per-pixel variance should track noise_sigma^2 (10% tolerance at this n)
    CHECK(std::sqrt(mean_sq) == doctest::Approx(c.noise_sigma).epsilon(0.1));
}

TEST_CASE("zero noise gives exactly the generated image") {
    WorldConfig c = small_config();
    c.noise_sigma = 0.0;
    const WorldSpec w = make_world(c, 5);
    const auto data = sample_dataset(w, 4, Rng(99));
    for (const Sample& s : data) CHECK(bit_equal(s.image, generate_image(w, s.latent)));
}

TEST_CASE("tags reflect the category and the strong coefficients") {
    const WorldSpec w = make_world(small_config(), 5);
    const auto data = sample_dataset(w, 8, Rng(1234));
    for (const Sample& s : data) {
        REQUIRE_FALSE(s.tags.empty());
        CHECK(s.tags[0] == category_token(s.category));
        std::size_t want = 1;
        for (int a = 0; a < w.cfg.true_attrs; ++a) {
            const double v = s.true_coeffs(0, a);
            if (std::abs(v) >= 0.25) {
                const std::string tok = attribute_token(a, v > 0);
                CHECK(std::find(s.tags.begin(), s.tags.end(), tok) != s.tags.end());
                ++want;
            }
        }
        CHECK(s.tags.size() == want);
    }
}

TEST_CASE("attribute tokens cycle through the non-category groups") {
    CHECK(attribute_token(0, true) == "color_0_hi");
    CHECK(attribute_token(0, false) == "color_0_lo");
    CHECK(attribute_token(1, true) == "shape_1_hi");
    CHECK(attribute_token(2, true) == "env_2_hi");
    CHECK(attribute_token(3, true) == "color_3_hi");
    CHECK(category_token(4) == "category_4");
}

TEST_CASE("invalid world configurations are rejected") {
    WorldConfig c = small_config();
    c.image_dim = 8;  // smaller than latent_layers * latent_dim
    CHECK_THROWS_AS(make_world(c, 1), std::invalid_argument);
    WorldConfig c2 = small_config();
    c2.true_attrs = 0;
    CHECK_THROWS_AS(make_world(c2, 1), std::invalid_argument);
}

}  // TEST_SUITE
