#include "ledt/code_predictor.hpp"

#include <cmath>
#include <stdexcept>

namespace ledt {

TransformerStack make_transformer(int dim, int n_entries, int n_blocks, bool scaled, Rng& rng) {
    if (dim <= 0 || n_entries <= 0 || n_blocks <= 0)
        throw std::invalid_argument("make_transformer: dimensions must be positive");
    TransformerStack tf;
    tf.scaled = scaled;
    for (int b = 0; b < n_blocks; ++b) {
        AttentionBlock blk;
        blk.wq = randn(rng, dim, dim, 0.01);
        blk.wk = randn(rng, dim, dim, 0.01);
        blk.wv = randn(rng, dim, dim, 0.01);
        tf.blocks.push_back(std::move(blk));
    }
    tf.head_w = randn(rng, dim, n_entries, 1.0 / std::sqrt(static_cast<double>(dim)));
    tf.head_b = Mat(1, n_entries);
    return tf;
}

TransformerVars lift_transformer(const TransformerStack& tf) {
    TransformerVars v;
    v.scaled = tf.scaled;
    for (const AttentionBlock& b : tf.blocks)
        v.blocks.push_back({ad::constant(b.wq), ad::constant(b.wk), ad::constant(b.wv)});
    v.head_w = ad::constant(tf.head_w);
    v.head_b = ad::constant(tf.head_b);
    return v;
}

ad::Var attention_block(const ad::Var& x, const BlockVars& blk, bool scaled, Mat* attn_out) {
    const int d = blk.wq->value.cols;
    ad::Var q = ad::matmul(x, blk.wq);
    ad::Var k = ad::matmul(x, blk.wk);
    ad::Var v = ad::matmul(x, blk.wv);
    ad::Var scores = ad::matmul(q, ad::transpose(k));
    if (scaled) scores = ad::scale(scores, 1.0 / std::sqrt(static_cast<double>(d)));
    ad::Var attn = ad::softmax_rows(scores);
    if (attn_out) *attn_out = attn->value;
    return ad::add(ad::matmul(attn, v), x);
}

ad::Var predict_logits(const ad::Var& edited, const TransformerVars& tf,
                       const PromptConditioning* prompt) {
    if (edited->value.cols != tf.head_w->value.rows)
        throw std::invalid_argument("predict_logits: latent dim does not match head");
    ad::Var x = edited;
    for (const BlockVars& blk : tf.blocks) {
        x = attention_block(x, blk, tf.scaled);
        if (prompt) x = cross_attention(x, prompt->context, prompt->weights, prompt->scaled);
    }
    return ad::add_row(ad::matmul(x, tf.head_w), tf.head_b);
}

Mat predict_logits(const LatentCode& edited, const TransformerStack& tf,
                   const PromptContext* ctx, const CrossAttnWeights* xw) {
    const TransformerVars tv = lift_transformer(tf);
    if (ctx != nullptr) {
        if (xw == nullptr)
            throw std::invalid_argument("predict_logits: prompt context without cross-attention weights");
        PromptConditioning pc{ad::constant(ctx->embeddings), lift_cross_attention(*xw), tf.scaled};
        return predict_logits(ad::constant(edited), tv, &pc)->value;
    }
    return predict_logits(ad::constant(edited), tv, nullptr)->value;
}

CodeSequence argmax_rows(const Mat& logits) {
    CodeSequence out(logits.rows);
    for (int i = 0; i < logits.rows; ++i) {
        int best = 0;
        for (int j = 1; j < logits.cols; ++j)
            if (logits(i, j) > logits(i, best)) best = j;
        out[i] = best;
    }
    return out;
}

ad::Var cross_entropy_loss(const ad::Var& logits, const CodeSequence& targets) {
    return ad::cross_entropy_rows(logits, targets);
}

ad::Var code_dict_loss(const ad::Var& delta, const ad::Var& predicted) {
    require_same_shape(delta->value, predicted->value, "code_dict_loss");
    return ad::l2_norm(ad::sub(delta, ad::stopgrad(predicted)));
}

ad::Var stage2_loss(const ad::Var& cross_entropy, const ad::Var& code_dict) {
    return ad::add(cross_entropy, code_dict);
}

}  // namespace ledt
