#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ledt/autodiff.hpp"
#include "ledt/latent_space.hpp"
#include "ledt/mat.hpp"
#include "ledt/rng.hpp"

namespace ledt {

struct WorldConfig {
    int latent_layers = 4;       // L
    int latent_dim = 8;          // D
    int image_dim = 48;          // m, must be >= L*D
    int embed_dim = 16;          // D_e
    int true_attrs = 3;          // number of ground-truth attribute directions
    int n_seen = 8;
    int n_unseen = 2;
    int samples_per_category = 64;
    double noise_sigma = 0.05;
};

// A linear world with known ground truth. The generator is a full-column-rank
// linear map, the encoder its exact pseudoinverse, so encode(generate(w)) = w
// up to rounding. Attribute directions form an orthonormal basis; every
// sampled latent is category_mean + basis^T * coeffs with sparse coeffs.
struct WorldSpec {
    std::uint64_t seed = 0;
    WorldConfig cfg;
    std::vector<Mat> category_means;  // n_seen + n_unseen entries, each L x D
    Mat basis;                        // true_attrs x (L*D), orthonormal rows
    Mat gen;                          // image_dim x (L*D)
    Mat enc;                          // (L*D) x image_dim, pseudoinverse of gen
    Mat embed;                        // embed_dim x image_dim

    int n_categories() const { return cfg.n_seen + cfg.n_unseen; }
    bool is_unseen(int category) const { return category >= cfg.n_seen; }
};

struct Sample {
    int category = -1;
    LatentCode latent;             // L x D
    Mat true_coeffs;               // 1 x true_attrs
    Mat image;                     // 1 x image_dim
    std::vector<std::string> tags; // ground-truth cue words
};

WorldSpec make_world(const WorldConfig& cfg, std::uint64_t seed);

// per_category samples for every category (seen first, then unseen). Each
// sample uses a stream derived from (rng seed, global sample index), so the
// result is independent of generation order.
std::vector<Sample> sample_dataset(const WorldSpec& world, int per_category, const Rng& rng);

Mat generate_image(const WorldSpec& world, const LatentCode& latent);       // noiseless
ad::Var generate_image(const WorldSpec& world, const ad::Var& latent);
LatentCode encode_image(const WorldSpec& world, const Mat& image);
Mat perceptual_embed(const WorldSpec& world, const Mat& image);             // unit norm
ad::Var perceptual_embed(const WorldSpec& world, const ad::Var& image);

// Cue word for an attribute direction and sign; group cycles through
// color/shape/environment.
std::string attribute_token(int attr, bool positive);
std::string category_token(int category);

}  // namespace ledt
