#include "ledt/synthetic_world.hpp"

#include <cmath>
#include <stdexcept>

#include "ledt/linalg.hpp"

namespace ledt {

namespace {

enum : std::uint64_t {
    kTagMeans = 0x4d45414e,    // "MEAN"
    kTagBasis = 0x42415349,    // "BASI"
    kTagGen = 0x47454e52,      // "GENR"
    kTagEmbed = 0x454d4244,    // "EMBD"
    kTagSamples = 0x53414d50,  // "SAMP"
};

constexpr double kTagThreshold = 0.25;

}  // namespace

std::string attribute_token(int attr, bool positive) {
    static const char* groups[3] = {"color", "shape", "env"};
    return std::string(groups[attr % 3]) + "_" + std::to_string(attr) + (positive ? "_hi" : "_lo");
}

std::string category_token(int category) { return "category_" + std::to_string(category); }

WorldSpec make_world(const WorldConfig& cfg, std::uint64_t seed) {
    const int ld = cfg.latent_layers * cfg.latent_dim;
    if (cfg.latent_layers <= 0 || cfg.latent_dim <= 0 || cfg.embed_dim <= 0)
        throw std::invalid_argument("make_world: dimensions must be positive");
    if (cfg.image_dim < ld)
        throw std::invalid_argument("make_world: image_dim must be at least latent_layers*latent_dim");
    if (cfg.true_attrs <= 0 || cfg.true_attrs > ld)
        throw std::invalid_argument("make_world: true_attrs out of range");
    if (cfg.n_seen <= 0 || cfg.n_unseen < 0)
        throw std::invalid_argument("make_world: category counts out of range");

    WorldSpec w;
    w.seed = seed;
    w.cfg = cfg;
    const Rng root(seed);

    Rng mrng = root.derive(kTagMeans);
    for (int c = 0; c < cfg.n_seen + cfg.n_unseen; ++c)
        w.category_means.push_back(randn(mrng, cfg.latent_layers, cfg.latent_dim));

    Rng brng = root.derive(kTagBasis);
    w.basis = orthonormal_rows(randn(brng, cfg.true_attrs, ld));

    Rng grng = root.derive(kTagGen);
    w.gen = randn(grng, cfg.image_dim, ld, 1.0 / std::sqrt(static_cast<double>(ld)));
    w.enc = pinv_full_col_rank(w.gen);

    Rng erng = root.derive(kTagEmbed);
    w.embed = randn(erng, cfg.embed_dim, cfg.image_dim,
                    1.0 / std::sqrt(static_cast<double>(cfg.image_dim)));

    // Construction invariants: exact inversion and an orthonormal basis.
    if (max_abs_diff(matmul(w.enc, w.gen), identity(ld)) > 1e-8)
        throw std::runtime_error("make_world: encoder does not invert generator");
    if (max_abs_diff(matmul(w.basis, transpose(w.basis)), identity(cfg.true_attrs)) > 1e-10)
        throw std::runtime_error("make_world: attribute basis not orthonormal");
    return w;
}

std::vector<Sample> sample_dataset(const WorldSpec& world, int per_category, const Rng& rng) {
    if (per_category <= 0) throw std::invalid_argument("sample_dataset: per_category must be positive");
    const WorldConfig& cfg = world.cfg;
    const Rng base = rng.derive(kTagSamples);
    std::vector<Sample> out;
    out.reserve(static_cast<std::size_t>(world.n_categories()) * per_category);

    std::uint64_t index = 0;
    for (int c = 0; c < world.n_categories(); ++c) {
        for (int i = 0; i < per_category; ++i, ++index) {
            Rng srng = base.derive(index);
            Sample s;
            s.category = c;
            s.true_coeffs = Mat(1, cfg.true_attrs);
            for (int j = 0; j < cfg.true_attrs; ++j)
                s.true_coeffs(0, j) = srng.uniform() < 0.5 ? 0.0 : srng.uniform(-1.0, 1.0);

            const Mat delta = reshape(matmul(s.true_coeffs, world.basis),
                                      cfg.latent_layers, cfg.latent_dim);
            s.latent = add(world.category_means[c], delta);

            Mat img = generate_image(world, s.latent);
            for (double& v : img.data) v += srng.normal(0.0, cfg.noise_sigma);
            s.image = img;

            s.tags.push_back(category_token(c));
            for (int j = 0; j < cfg.true_attrs; ++j) {
                const double a = s.true_coeffs(0, j);
                if (std::fabs(a) >= kTagThreshold) s.tags.push_back(attribute_token(j, a > 0.0));
            }
            out.push_back(std::move(s));
        }
    }
    return out;
}

Mat generate_image(const WorldSpec& world, const LatentCode& latent) {
    if (latent.rows != world.cfg.latent_layers || latent.cols != world.cfg.latent_dim)
        throw std::invalid_argument("generate_image: latent shape mismatch");
    const Mat flat = reshape(latent, 1, latent.rows * latent.cols);
    return matmul(flat, transpose(world.gen));
}

ad::Var generate_image(const WorldSpec& world, const ad::Var& latent) {
    if (latent->value.rows != world.cfg.latent_layers || latent->value.cols != world.cfg.latent_dim)
        throw std::invalid_argument("generate_image: latent shape mismatch");
    const ad::Var flat = ad::reshape(latent, 1, latent->value.rows * latent->value.cols);
    return ad::matmul(flat, ad::constant(transpose(world.gen)));
}

LatentCode encode_image(const WorldSpec& world, const Mat& image) {
    if (image.rows != 1 || image.cols != world.cfg.image_dim)
        throw std::invalid_argument("encode_image: image shape mismatch");
    const Mat flat = matmul(image, transpose(world.enc));
    return reshape(flat, world.cfg.latent_layers, world.cfg.latent_dim);
}

Mat perceptual_embed(const WorldSpec& world, const Mat& image) {
    if (image.rows != 1 || image.cols != world.cfg.image_dim)
        throw std::invalid_argument("perceptual_embed: image shape mismatch");
    Mat e = matmul(image, transpose(world.embed));
    const double n = frob_norm(e);
    if (n == 0.0) throw std::runtime_error("perceptual_embed: zero-norm embedding");
    for (double& v : e.data) v /= n;  // same arithmetic as l2_normalize_rows
    return e;
}

ad::Var perceptual_embed(const WorldSpec& world, const ad::Var& image) {
    if (image->value.rows != 1 || image->value.cols != world.cfg.image_dim)
        throw std::invalid_argument("perceptual_embed: image shape mismatch");
    const ad::Var e = ad::matmul(image, ad::constant(transpose(world.embed)));
    return ad::l2_normalize_rows(e);
}

}  // namespace ledt
