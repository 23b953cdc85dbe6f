#include "ledt/prompt_semantics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace ledt {

bool Vocabulary::contains(const std::string& token) const {
    return std::any_of(words.begin(), words.end(),
                       [&](const Word& w) { return w.token == token; });
}

void validate_vocabulary(const Vocabulary& v) {
    std::set<std::string> seen;
    std::set<std::string> groups;
    for (const Word& w : v.words) {
        if (w.token.empty()) throw std::invalid_argument("vocabulary: empty token");
        if (!seen.insert(w.token).second)
            throw std::invalid_argument("vocabulary: duplicate token " + w.token);
        if (std::find(kWordGroups.begin(), kWordGroups.end(), w.group) == kWordGroups.end())
            throw std::invalid_argument("vocabulary: unknown group " + w.group);
        groups.insert(w.group);
    }
    for (const std::string& g : kWordGroups)
        if (!groups.count(g)) throw std::invalid_argument("vocabulary: missing group " + g);
}

void save_vocabulary(const std::filesystem::path& path, const Vocabulary& v) {
    nlohmann::json j = nlohmann::json::array();
    for (const Word& w : v.words) j.push_back({{"token", w.token}, {"group", w.group}});
    std::ofstream os(path);
    if (!os) throw std::runtime_error("save_vocabulary: cannot open " + path.string());
    os << j.dump(2) << "\n";
}

Vocabulary load_vocabulary(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_vocabulary: cannot open " + path.string());
    const nlohmann::json j = nlohmann::json::parse(is);
    if (!j.is_array()) throw std::runtime_error("load_vocabulary: expected a JSON array");
    Vocabulary v;
    for (const auto& e : j)
        v.words.push_back({e.at("token").get<std::string>(), e.at("group").get<std::string>()});
    validate_vocabulary(v);
    return v;
}

Vocabulary default_vocabulary(const WorldSpec& world) {
    Vocabulary v;
    for (int c = 0; c < world.n_categories(); ++c)
        v.words.push_back({category_token(c), "category"});
    static const char* group_of[3] = {"color", "shape", "environment"};
    for (int j = 0; j < world.cfg.true_attrs; ++j) {
        v.words.push_back({attribute_token(j, true), group_of[j % 3]});
        v.words.push_back({attribute_token(j, false), group_of[j % 3]});
    }
    // Groups not covered by the attribute cycle still need one word each.
    for (int g = world.cfg.true_attrs; g < 3; ++g)
        v.words.push_back({std::string(group_of[g]) + "_neutral", group_of[g]});
    validate_vocabulary(v);
    return v;
}

Mat token_embedding(const std::string& token, int dim, std::uint64_t seed) {
    if (dim <= 0) throw std::invalid_argument("token_embedding: dim must be positive");
    if (token.empty()) throw std::invalid_argument("token_embedding: empty token");
    Rng rng(splitmix64(seed ^ fnv1a64(token.data(), token.size())));
    Mat e = randn(rng, 1, dim);
    const double n = frob_norm(e);
    if (n == 0.0) throw std::runtime_error("token_embedding: degenerate draw");
    return scale(e, 1.0 / n);
}

PromptContext embed_prompt(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                           int dim, std::uint64_t seed) {
    if (tokens.empty()) throw std::invalid_argument("embed_prompt: empty token list");
    PromptContext ctx;
    ctx.tokens = tokens;
    ctx.embeddings = Mat(static_cast<int>(tokens.size()), dim);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (!vocab.contains(tokens[i]))
            throw std::invalid_argument("embed_prompt: unknown token " + tokens[i]);
        set_row(ctx.embeddings, static_cast<int>(i), token_embedding(tokens[i], dim, seed));
    }
    return ctx;
}

CrossAttnWeights make_cross_attention(int dim, int embed_dim, int attn_dim, Rng& rng) {
    if (dim <= 0 || embed_dim <= 0 || attn_dim <= 0)
        throw std::invalid_argument("make_cross_attention: dimensions must be positive");
    CrossAttnWeights w;
    w.wq = randn(rng, dim, attn_dim, 0.05);
    w.wk = randn(rng, embed_dim, attn_dim, 0.05);
    w.wv = randn(rng, embed_dim, dim, 0.05);
    return w;
}

CrossAttnVars lift_cross_attention(const CrossAttnWeights& w) {
    return {ad::constant(w.wq), ad::constant(w.wk), ad::constant(w.wv)};
}

ad::Var cross_attention(const ad::Var& x, const ad::Var& context, const CrossAttnVars& w,
                        bool scaled, Mat* attn_out) {
    const int da = w.wq->value.cols;
    if (w.wk->value.cols != da)
        throw std::invalid_argument("cross_attention: query/key dims disagree");
    if (context->value.cols != w.wk->value.rows)
        throw std::invalid_argument("cross_attention: prompt dim does not match keys");
    if (w.wv->value.cols != x->value.cols)
        throw std::invalid_argument("cross_attention: value dim must match latent dim");
    ad::Var q = ad::matmul(x, w.wq);
    ad::Var k = ad::matmul(context, w.wk);
    ad::Var v = ad::matmul(context, w.wv);
    ad::Var scores = ad::matmul(q, ad::transpose(k));
    if (scaled) scores = ad::scale(scores, 1.0 / std::sqrt(static_cast<double>(da)));
    ad::Var attn = ad::softmax_rows(scores);
    if (attn_out) *attn_out = attn->value;
    return ad::add(ad::matmul(attn, v), x);
}

Mat cross_attention(const LatentCode& x, const PromptContext& ctx, const CrossAttnWeights& w,
                    bool scaled) {
    return cross_attention(ad::constant(x), ad::constant(ctx.embeddings),
                           lift_cross_attention(w), scaled)->value;
}

ad::Var subject_loss(const ad::Var& edited_latent, const LatentCode& input_latent,
                     const WorldSpec& world) {
    // Cosine is scale invariant, so the raw (unnormalized) embeddings are
    // compared; identical latents then give exactly zero because both sides
    // follow the same arithmetic. cosine_all raises on zero-norm embeddings.
    const ad::Var img_out = generate_image(world, edited_latent);
    const Mat img_in = generate_image(world, input_latent);
    const ad::Var e_out = ad::matmul(img_out, ad::constant(transpose(world.embed)));
    const Mat e_in = matmul(img_in, transpose(world.embed));
    return ad::affine(ad::cosine_all(e_out, ad::constant(e_in)), -1.0, 1.0);
}

double subject_loss(const LatentCode& edited_latent, const LatentCode& input_latent,
                    const WorldSpec& world) {
    return subject_loss(ad::constant(edited_latent), input_latent, world)->value(0, 0);
}

ad::Var word_loss(const ad::Var& edited_latent, const PromptContext& ctx, const WorldSpec& world) {
    if (ctx.embeddings.rows == 0) throw std::invalid_argument("word_loss: empty prompt context");
    if (ctx.embeddings.cols != world.cfg.embed_dim)
        throw std::invalid_argument("word_loss: prompt dim does not match embedder");
    const ad::Var e_out = perceptual_embed(world, generate_image(world, edited_latent));
    // Rows of ctx are unit norm, e_out is normalized, so the matmul row holds
    // the per-word cosines.
    const ad::Var cosines = ad::matmul(e_out, ad::constant(transpose(ctx.embeddings)));
    return ad::affine(ad::mean_all(cosines), -1.0, 1.0);
}

double word_loss(const LatentCode& edited_latent, const PromptContext& ctx, const WorldSpec& world) {
    return word_loss(ad::constant(edited_latent), ctx, world)->value(0, 0);
}

}  // namespace ledt
