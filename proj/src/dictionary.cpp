#include "ledt/dictionary.hpp"

#include <cmath>
#include <span>
#include <stdexcept>

#include "ledt/linalg.hpp"

namespace ledt {

Dictionary make_dictionary(int n_atoms, int latent_layers, int latent_dim, Rng& rng) {
    if (n_atoms <= 0 || latent_layers <= 0 || latent_dim <= 0)
        throw std::invalid_argument("make_dictionary: dimensions must be positive");
    Dictionary d;
    d.latent_layers = latent_layers;
    d.latent_dim = latent_dim;
    const int ld = latent_layers * latent_dim;
    d.atoms = randn(rng, n_atoms, ld, 1.0 / std::sqrt(static_cast<double>(ld)));
    return d;
}

Mat dictionary_atom(const Dictionary& dict, int j) {
    if (j < 0 || j >= dict.n_atoms()) throw std::invalid_argument("dictionary_atom: index out of range");
    return reshape(get_row(dict.atoms, j), dict.latent_layers, dict.latent_dim);
}

SparseEncoder make_sparse_encoder(int in_dim, int hidden, int out_dim, double shrink, Rng& rng) {
    if (in_dim <= 0 || hidden <= 0 || out_dim <= 0)
        throw std::invalid_argument("make_sparse_encoder: dimensions must be positive");
    if (shrink < 0.0) throw std::invalid_argument("make_sparse_encoder: negative shrink");
    SparseEncoder e;
    e.shrink = shrink;
    const int dims[6] = {in_dim, hidden, hidden, hidden, hidden, out_dim};
    for (int i = 0; i < 5; ++i) {
        e.weights.push_back(randn(rng, dims[i], dims[i + 1],
                                  std::sqrt(2.0 / static_cast<double>(dims[i]))));
        e.biases.emplace_back(1, dims[i + 1]);
    }
    return e;
}

EncoderVars lift_encoder(const SparseEncoder& enc) {
    EncoderVars v;
    v.leaky_slope = enc.leaky_slope;
    v.shrink = enc.shrink;
    for (const Mat& w : enc.weights) v.weights.push_back(ad::constant(w));
    for (const Mat& b : enc.biases) v.biases.push_back(ad::constant(b));
    return v;
}

ad::Var sparse_encode(const ad::Var& delta_flat, const EncoderVars& enc) {
    if (enc.weights.size() != 5 || enc.biases.size() != 5)
        throw std::invalid_argument("sparse_encode: encoder must have 5 layers");
    ad::Var h = delta_flat;
    for (std::size_t i = 0; i < enc.weights.size(); ++i) {
        h = ad::add_row(ad::matmul(h, enc.weights[i]), enc.biases[i]);
        if (i + 1 < enc.weights.size()) h = ad::leaky_relu(h, enc.leaky_slope);
    }
    if (enc.shrink > 0.0) h = ad::soft_threshold(h, enc.shrink);
    return h;
}

Mat sparse_encode(const LatentCode& delta, const SparseEncoder& enc) {
    const Mat flat = reshape(delta, 1, delta.rows * delta.cols);
    return sparse_encode(ad::constant(flat), lift_encoder(enc))->value;
}

ad::Var reconstruct(const ad::Var& code, const ad::Var& atoms, int latent_layers, int latent_dim) {
    return ad::reshape(ad::matmul(code, atoms), latent_layers, latent_dim);
}

LatentCode reconstruct(const Mat& code, const Dictionary& dict) {
    if (code.rows != 1 || code.cols != dict.n_atoms())
        throw std::invalid_argument("reconstruct: code must be 1 x n_atoms");
    return reconstruct(ad::constant(code), ad::constant(dict.atoms),
                       dict.latent_layers, dict.latent_dim)->value;
}

namespace {

Mat pairwise_mean(std::span<const Mat> s) {
    if (s.size() == 1) return s[0];
    const std::size_t mid = s.size() / 2;
    return add(pairwise_mean(s.subspan(0, mid)), pairwise_mean(s.subspan(mid)));
}

}  // namespace

EditDistribution fit_edit_distribution(const std::vector<Mat>& codes, bool diagonal) {
    if (codes.size() < 2) throw std::invalid_argument("fit_edit_distribution: need at least 2 codes");
    const int l = codes.front().cols;
    for (const Mat& c : codes) {
        if (c.rows != 1 || c.cols != l)
            throw std::invalid_argument("fit_edit_distribution: codes must share shape 1 x l");
        require_finite(c, "fit_edit_distribution");
    }

    EditDistribution dist;
    dist.diagonal = diagonal;
    const double n = static_cast<double>(codes.size());
    dist.mu = scale(pairwise_mean(codes), 1.0 / n);

    Mat sigma(l, l);
    for (const Mat& c : codes) {
        const Mat d = sub(c, dist.mu);
        for (int i = 0; i < l; ++i)
            for (int j = 0; j < l; ++j) sigma(i, j) += d(0, i) * d(0, j);
    }
    sigma = scale(sigma, 1.0 / (n - 1.0));

    if (diagonal) {
        for (int i = 0; i < l; ++i)
            for (int j = 0; j < l; ++j)
                if (i != j) sigma(i, j) = 0.0;
        for (int i = 0; i < l; ++i) sigma(i, i) = std::max(sigma(i, i), 0.0);
        dist.sigma = sigma;
        return dist;
    }

    // Symmetrize, then clip rounding-level negative eigenvalues to zero.
    sigma = scale(add(sigma, transpose(sigma)), 0.5);
    std::vector<double> w;
    Mat v;
    jacobi_eigh(sigma, w, v);
    Mat clipped(l, l);
    for (int i = 0; i < l; ++i)
        for (int j = i; j < l; ++j) {
            double s = 0.0;
            for (int k = 0; k < l; ++k) s += v(i, k) * std::max(w[k], 0.0) * v(j, k);
            clipped(i, j) = s;
            clipped(j, i) = s;
        }
    dist.sigma = clipped;
    return dist;
}

Mat sample_edit(const EditDistribution& dist, Rng& rng) {
    const int l = dist.mu.cols;
    if (dist.sigma.rows != l || dist.sigma.cols != l)
        throw std::invalid_argument("sample_edit: mu/sigma shape mismatch");
    const Mat f = psd_factor(dist.sigma, 1e-8);
    Mat z(l, 1);
    for (int i = 0; i < l; ++i) z(i, 0) = rng.normal();
    const Mat fz = matmul(f, z);
    Mat out = dist.mu;
    for (int i = 0; i < l; ++i) out(0, i) += fz(i, 0);
    return out;
}

double sparsity_fraction(const Mat& code) {
    if (code.size() == 0) throw std::invalid_argument("sparsity_fraction: empty code");
    std::size_t zeros = 0;
    for (double v : code.data)
        if (std::fabs(v) < 1e-6) ++zeros;
    return static_cast<double>(zeros) / static_cast<double>(code.size());
}

}  // namespace ledt
