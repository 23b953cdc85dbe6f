#pragma once

#include <vector>

#include "ledt/autodiff.hpp"
#include "ledt/latent_space.hpp"
#include "ledt/mat.hpp"
#include "ledt/rng.hpp"

namespace ledt {

// Attribute dictionary: l atoms, each an L x D latent direction, stored
// flattened as an l x (L*D) matrix so reconstruction is a single matmul.
struct Dictionary {
    Mat atoms;  // l x (L*D)
    int latent_layers = 0;
    int latent_dim = 0;

    int n_atoms() const { return atoms.rows; }
};

Dictionary make_dictionary(int n_atoms, int latent_layers, int latent_dim, Rng& rng);
Mat dictionary_atom(const Dictionary& dict, int j);  // L x D

// Sparse encoder: 5-layer perceptron with Leaky-ReLU (slope 0.01) on the
// hidden layers, flattened delta in, l coefficients out. The output passes
// through a fixed soft threshold so inactive coefficients are exact zeros;
// the L1 penalty alone leaves them at optimizer-step noise (~1e-3), which
// would never satisfy the |coeff| < 1e-6 near-zero definition.
struct SparseEncoder {
    std::vector<Mat> weights;  // 5 matrices
    std::vector<Mat> biases;   // 5 rows
    double leaky_slope = 0.01;
    double shrink = 0.05;
};

SparseEncoder make_sparse_encoder(int in_dim, int hidden, int out_dim, double shrink, Rng& rng);

struct EncoderVars {
    std::vector<ad::Var> weights;
    std::vector<ad::Var> biases;
    double leaky_slope = 0.01;
    double shrink = 0.05;
};
EncoderVars lift_encoder(const SparseEncoder& enc);  // constant leaves

ad::Var sparse_encode(const ad::Var& delta_flat, const EncoderVars& enc);  // 1 x l
Mat sparse_encode(const LatentCode& delta, const SparseEncoder& enc);

ad::Var reconstruct(const ad::Var& code, const ad::Var& atoms, int latent_layers, int latent_dim);
LatentCode reconstruct(const Mat& code, const Dictionary& dict);

// Gaussian fit over sparse codes: mean, unbiased covariance (divisor n-1),
// symmetrized and eigenvalue-clipped to PSD. diagonal keeps variances only.
struct EditDistribution {
    Mat mu;     // 1 x l
    Mat sigma;  // l x l, PSD
    bool diagonal = false;
};

EditDistribution fit_edit_distribution(const std::vector<Mat>& codes, bool diagonal);

// mu + F z with F F^T = sigma (eigen factor, so singular covariances are
// fine: sigma = 0 always returns mu).
Mat sample_edit(const EditDistribution& dist, Rng& rng);

double sparsity_fraction(const Mat& code);  // fraction of |coeff| < 1e-6

}  // namespace ledt
