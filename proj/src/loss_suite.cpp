#include "ledt/loss_suite.hpp"

#include <functional>

#include "ledt/code_predictor.hpp"
#include "ledt/codebook.hpp"
#include "ledt/dictionary.hpp"
#include "ledt/gradcheck.hpp"
#include "ledt/prompt_semantics.hpp"
#include "ledt/synthetic_world.hpp"

namespace ledt {

namespace {

struct SuiteCase {
    std::string name;
    std::function<ad::Var(const ad::Var&)> loss;
    std::function<Mat(Rng&)> point;
};

}  // namespace

std::vector<GradCheckCase> run_gradcheck_suite(std::uint64_t seed, int points, double eps) {
    if (points < 1) throw std::invalid_argument("run_gradcheck_suite: points must be positive");

    const WorldConfig wc;  // desk-scale defaults
    const WorldSpec world = make_world(wc, seed ^ 0x9e3779b97f4a7c15ull);
    const int L = wc.latent_layers;
    const int D = wc.latent_dim;
    const int n_entries = 8;

    Rng setup(seed);
    Rng fix_rng = setup.derive(1);
    const Mat mean = randn(fix_rng, L, D);
    const Mat target_image = randn(fix_rng, 1, wc.image_dim);
    const Mat quantized = randn(fix_rng, L, D);
    const Mat fixed_delta = randn(fix_rng, L, D);
    const Mat predicted = randn(fix_rng, L, D);
    const Mat input_latent = randn(fix_rng, L, D);
    const Mat attn_x = randn(fix_rng, L, D);
    CodeSequence targets(static_cast<std::size_t>(L));
    for (auto& t : targets) t = static_cast<int>(fix_rng.below(n_entries));

    const Vocabulary vocab = default_vocabulary(world);
    std::vector<std::string> prompt_tokens = {category_token(0), attribute_token(0, true)};
    const PromptContext ctx = embed_prompt(prompt_tokens, vocab, wc.embed_dim, world.seed);

    Rng xw_rng = setup.derive(2);
    const CrossAttnWeights xw = make_cross_attention(D, wc.embed_dim, D, xw_rng);
    Rng blk_rng = setup.derive(3);
    const Mat wk_fixed = randn(blk_rng, D, D, 0.3);
    const Mat wv_fixed = randn(blk_rng, D, D, 0.3);

    std::vector<SuiteCase> cases;
    cases.push_back({"reconstruction_through_generator",
                     [&](const ad::Var& delta) {
                         const ad::Var img =
                             generate_image(world, ad::add(delta, ad::constant(mean)));
                         return ad::l2_norm(ad::sub(img, ad::constant(target_image)));
                     },
                     [&](Rng& r) { return randn(r, L, D); }});
    cases.push_back({"codebook_term_wrt_quantized",
                     [&](const ad::Var& q) {
                         return ad::sum_sq(ad::sub(ad::stopgrad(ad::constant(fixed_delta)), q));
                     },
                     [&](Rng& r) { return randn(r, L, D); }});
    cases.push_back({"commitment_term_wrt_delta",
                     [&](const ad::Var& d) {
                         return ad::scale(ad::sum_sq(ad::sub(d, ad::constant(quantized))), 0.25);
                     },
                     [&](Rng& r) { return randn(r, L, D); }});
    cases.push_back({"cross_entropy_wrt_logits",
                     [&](const ad::Var& logits) { return ad::cross_entropy_rows(logits, targets); },
                     [&](Rng& r) { return randn(r, L, n_entries); }});
    cases.push_back({"code_dict_wrt_delta",
                     [&](const ad::Var& d) {
                         return code_dict_loss(d, ad::constant(predicted));
                     },
                     [&](Rng& r) { return randn(r, L, D); }});
    cases.push_back({"subject_wrt_edited_latent",
                     [&](const ad::Var& w) { return subject_loss(w, input_latent, world); },
                     [&](Rng& r) { return randn(r, L, D); }});
    cases.push_back({"word_wrt_edited_latent",
                     [&](const ad::Var& w) { return word_loss(w, ctx, world); },
                     [&](Rng& r) { return randn(r, L, D); }});
    cases.push_back({"self_attention_wrt_wq",
                     [&](const ad::Var& wq) {
                         BlockVars blk{wq, ad::constant(wk_fixed), ad::constant(wv_fixed)};
                         return ad::sum_sq(attention_block(ad::constant(attn_x), blk, true));
                     },
                     [&](Rng& r) { return randn(r, D, D, 0.3); }});
    cases.push_back({"cross_attention_wrt_wk",
                     [&](const ad::Var& wk) {
                         CrossAttnVars w{ad::constant(xw.wq), wk, ad::constant(xw.wv)};
                         return ad::sum_sq(
                             cross_attention(ad::constant(attn_x), ad::constant(ctx.embeddings), w));
                     },
                     [&](Rng& r) { return randn(r, wc.embed_dim, D, 0.3); }});

    std::vector<GradCheckCase> out;
    out.reserve(cases.size());
    for (std::size_t ci = 0; ci < cases.size(); ++ci) {
        GradCheckCase res;
        res.name = cases[ci].name;
        res.points = points;
        const Rng case_rng = Rng(seed).derive(100 + ci);
        for (int p = 0; p < points; ++p) {
            Rng pr = case_rng.derive(static_cast<std::uint64_t>(p));
            const Mat point = cases[ci].point(pr);
            const double err = grad_check(cases[ci].loss, point, eps);
            if (err > res.worst) res.worst = err;
        }
        out.push_back(std::move(res));
    }
    return out;
}

}  // namespace ledt
