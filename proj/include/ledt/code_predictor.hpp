#pragma once

#include <vector>

#include "ledt/autodiff.hpp"
#include "ledt/codebook.hpp"
#include "ledt/mat.hpp"
#include "ledt/prompt_semantics.hpp"
#include "ledt/rng.hpp"

namespace ledt {

// Code prediction module: a stack of single-head self-attention blocks with
// residual connections (no layer norm, no positional encoding) followed by a
// logits head shared across the L positions. `scaled` applies the 1/sqrt(D)
// attention scaling; turning it off restores the bare Q K^T form.
struct AttentionBlock {
    Mat wq, wk, wv;  // each D x D
};

struct TransformerStack {
    std::vector<AttentionBlock> blocks;
    Mat head_w;  // D x N
    Mat head_b;  // 1 x N
    bool scaled = true;

    int dim() const { return head_w.rows; }
    int n_entries() const { return head_w.cols; }
};

TransformerStack make_transformer(int dim, int n_entries, int n_blocks, bool scaled, Rng& rng);

struct BlockVars {
    ad::Var wq, wk, wv;
};
struct TransformerVars {
    std::vector<BlockVars> blocks;
    ad::Var head_w, head_b;
    bool scaled = true;
};
TransformerVars lift_transformer(const TransformerStack& tf);  // constant leaves

// softmax_rows(Q K^T / sqrt(D)) V + x. attn_out, when given, receives the
// attention matrix value (row-stochastic).
ad::Var attention_block(const ad::Var& x, const BlockVars& blk, bool scaled, Mat* attn_out = nullptr);

// Optional prompt conditioning: cross-attention after every self-attention
// block, shared weights across insertions.
struct PromptConditioning {
    ad::Var context;  // n_p x D_e, constant or param
    CrossAttnVars weights;
    bool scaled = true;
};

ad::Var predict_logits(const ad::Var& edited, const TransformerVars& tf,
                       const PromptConditioning* prompt = nullptr);
Mat predict_logits(const LatentCode& edited, const TransformerStack& tf,
                   const PromptContext* ctx = nullptr, const CrossAttnWeights* xw = nullptr);

CodeSequence argmax_rows(const Mat& logits);  // ties -> lowest index

// Mean over the L positions of -log softmax(logits_row)[target].
ad::Var cross_entropy_loss(const ad::Var& logits, const CodeSequence& targets);

// | delta - sg(predicted) |_2: Frobenius distance with the predicted side
// stopped, so gradient reaches only the delta side.
ad::Var code_dict_loss(const ad::Var& delta, const ad::Var& predicted);

// Unit-weight sum of the two stage-2 scalars.
ad::Var stage2_loss(const ad::Var& cross_entropy, const ad::Var& code_dict);

}  // namespace ledt
