#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ledt/autodiff.hpp"
#include "ledt/latent_space.hpp"
#include "ledt/mat.hpp"
#include "ledt/rng.hpp"
#include "ledt/synthetic_world.hpp"

namespace ledt {

inline const std::vector<std::string> kWordGroups = {"category", "color", "shape", "environment"};

struct Word {
    std::string token;
    std::string group;
};

// Closed vocabulary; tokens unique, at least one word per group.
struct Vocabulary {
    std::vector<Word> words;

    bool contains(const std::string& token) const;
};

void validate_vocabulary(const Vocabulary& v);
void save_vocabulary(const std::filesystem::path& path, const Vocabulary& v);
Vocabulary load_vocabulary(const std::filesystem::path& path);

// Vocabulary matching the synthetic world's ground-truth tags.
Vocabulary default_vocabulary(const WorldSpec& world);

// Deterministic unit-norm embedding per token: a Gaussian draw keyed by
// (seed, token hash). Pure in its arguments.
Mat token_embedding(const std::string& token, int dim, std::uint64_t seed);

struct PromptContext {
    std::vector<std::string> tokens;
    Mat embeddings;  // n_p x dim, unit-norm rows
};

PromptContext embed_prompt(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                           int dim, std::uint64_t seed);

// Cross-attention from latent rows onto prompt embeddings.
struct CrossAttnWeights {
    Mat wq;  // D x D_a
    Mat wk;  // D_e x D_a
    Mat wv;  // D_e x D
};

CrossAttnWeights make_cross_attention(int dim, int embed_dim, int attn_dim, Rng& rng);

struct CrossAttnVars {
    ad::Var wq, wk, wv;
};
CrossAttnVars lift_cross_attention(const CrossAttnWeights& w);  // constant leaves

// softmax_rows(Q K^T / sqrt(D_a)) V + x, Q from the latent rows, K and V
// from the prompt context.
ad::Var cross_attention(const ad::Var& x, const ad::Var& context, const CrossAttnVars& w,
                        bool scaled = true, Mat* attn_out = nullptr);
Mat cross_attention(const LatentCode& x, const PromptContext& ctx, const CrossAttnWeights& w,
                    bool scaled = true);

// 1 - cosine of the perceptual embeddings of the generated outputs. Zero
// exactly when the latents generate identical embeddings; range [0, 2].
ad::Var subject_loss(const ad::Var& edited_latent, const LatentCode& input_latent,
                     const WorldSpec& world);
double subject_loss(const LatentCode& edited_latent, const LatentCode& input_latent,
                    const WorldSpec& world);

// Mean over prompt words of 1 - cosine(embedding of generated output, word).
ad::Var word_loss(const ad::Var& edited_latent, const PromptContext& ctx, const WorldSpec& world);
double word_loss(const LatentCode& edited_latent, const PromptContext& ctx, const WorldSpec& world);

}  // namespace ledt
