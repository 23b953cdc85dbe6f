#include "ledt/pipeline.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "ledt/adam.hpp"
#include "ledt/tensor_io.hpp"

namespace ledt {

namespace {

using nlohmann::json;

// Derivation tags for the independent random streams hanging off the run
// seed. Values are arbitrary but frozen: changing one changes every result
// downstream of that stream.
constexpr std::uint64_t kTagData = 0x44415441;
constexpr std::uint64_t kTagSplit = 0x53504c49;
constexpr std::uint64_t kTagDict = 0x44494354;
constexpr std::uint64_t kTagEnc = 0x454e4344;
constexpr std::uint64_t kTagCbInit = 0x43424e49;
constexpr std::uint64_t kTagTf = 0x5452464d;
constexpr std::uint64_t kTagXattn = 0x58415454;
constexpr std::uint64_t kTagS1Batch = 0x53314254;
constexpr std::uint64_t kTagS1Reinit = 0x53315249;
constexpr std::uint64_t kTagS2Batch = 0x53324254;
constexpr std::uint64_t kTagS2Edit = 0x53324544;
constexpr std::uint64_t kTagS2Prompt = 0x53325052;
constexpr std::uint64_t kTagEval = 0x4556414c;

// Warmup-hold-decay learning rate: linear ramp to lr_peak_mult * lr over the
// first 10% of steps, hold, then a cosine tail over the last 30% so late
// updates settle near the optimum. Floored to keep the optimizer's positivity
// contract on the final step.
double scheduled_lr(const RunConfig& cfg, int step, int total) {
    const double frac = static_cast<double>(step) / static_cast<double>(total);
    const double peak = cfg.lr_peak_mult * cfg.lr;
    const double lr = frac < 0.1 ? peak * (frac / 0.1)
                      : frac < 0.7
                          ? peak
                          : peak * 0.5 * (1.0 + std::cos(M_PI * (frac - 0.7) / 0.3));
    return std::max(lr, 1e-6 * cfg.lr);
}

// Collects the parameter matrices lifted into one step's graph so the
// optimizer update can be applied against their accumulated gradients.
struct GraphParams {
    std::vector<Mat*> slots;
    std::vector<ad::Var> vars;

    ad::Var lift(Mat& m) {
        vars.push_back(ad::param(m));
        slots.push_back(&m);
        return vars.back();
    }

    // Clip the joint gradient to this global L2 norm before the optimizer
    // update; keeps the high-rate phase of the schedule stable.
    static constexpr double kClipNorm = 1.0;

    void step(AdamState& st, const AdamConfig& cfg) {
        double sq = 0.0;
        for (const auto& v : vars)
            for (double g : v->grad.data) sq += g * g;
        if (sq > kClipNorm * kClipNorm) {
            const double scale = kClipNorm / std::sqrt(sq);
            for (auto& v : vars)
                for (double& g : v->grad.data) g *= scale;
        }
        std::vector<const Mat*> grads;
        grads.reserve(vars.size());
        for (const auto& v : vars) grads.push_back(&v->grad);
        adam_step(slots, grads, st, cfg);
    }
};

std::uint64_t hash_mat(const Mat& m, std::uint64_t h) {
    const std::uint32_t shape[2] = {static_cast<std::uint32_t>(m.rows),
                                    static_cast<std::uint32_t>(m.cols)};
    h = fnv1a64(shape, sizeof shape, h);
    if (!m.data.empty()) h = fnv1a64(m.data.data(), m.data.size() * sizeof(double), h);
    return h;
}

double median_of(std::vector<double> v) {
    if (v.empty()) throw std::runtime_error("median_of: empty sample");
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid - 1), v.end());
        m = 0.5 * (m + v[mid - 1]);
    }
    return m;
}

int pick_index(const std::vector<int>& pool, Rng& rng) {
    return pool[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(pool.size())))];
}

void require_trained(const PipelineState& s, const char* where) {
    if (!s.stage1_done || !s.stage2_done)
        throw std::runtime_error(std::string(where) + ": train both stages first");
}

Mat load_shaped(const std::filesystem::path& path, int rows, int cols) {
    Mat m = load_mat(path);
    if (m.rows != rows || m.cols != cols)
        throw std::runtime_error("load_state: " + path.string() + " has shape " +
                                 std::to_string(m.rows) + "x" + std::to_string(m.cols) +
                                 ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
    return m;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
    return std::string(buf);
}

std::uint64_t parse_hex64(const std::string& s, const char* where) {
    if (s.empty()) throw std::runtime_error(std::string(where) + ": empty checksum");
    char* end = nullptr;
    const std::uint64_t v = std::strtoull(s.c_str(), &end, 16);
    if (end == nullptr || *end != '\0')
        throw std::runtime_error(std::string(where) + ": bad checksum '" + s + "'");
    return v;
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw std::runtime_error("parse error in " + path.string() + ": " + e.what());
    }
    return j;
}

void write_json_file(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

void write_loss_csv(const std::filesystem::path& path, const LossLog& log) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "step,loss_name,value\n";
    char buf[128];
    for (const auto& row : log) {
        std::snprintf(buf, sizeof buf, "%d,%s,%.12g\n", row.step, row.name.c_str(), row.value);
        out << buf;
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

PipelineData build_data(const WorldSpec& world, const RunConfig& cfg) {
    PipelineData d;
    const Rng base(cfg.seed);
    d.dataset = sample_dataset(world, cfg.world.samples_per_category, base.derive(kTagData));

    std::vector<std::vector<int>> by_cat(static_cast<std::size_t>(world.cfg.n_seen));
    for (int i = 0; i < static_cast<int>(d.dataset.size()); ++i) {
        const int c = d.dataset[static_cast<std::size_t>(i)].category;
        if (!world.is_unseen(c)) by_cat[static_cast<std::size_t>(c)].push_back(i);
    }

    const Rng split_base = base.derive(kTagSplit);
    for (int c = 0; c < world.cfg.n_seen; ++c) {
        auto& idx = by_cat[static_cast<std::size_t>(c)];
        Rng r = split_base.derive(static_cast<std::uint64_t>(c));
        for (int i = static_cast<int>(idx.size()) - 1; i > 0; --i) {
            const int j = static_cast<int>(r.below(static_cast<std::uint64_t>(i + 1)));
            std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
        }
        const int n_hold =
            static_cast<int>(std::floor(cfg.holdout_fraction * static_cast<double>(idx.size())));
        for (int i = 0; i < static_cast<int>(idx.size()); ++i)
            (i < n_hold ? d.holdout_idx : d.train_idx).push_back(idx[static_cast<std::size_t>(i)]);
    }
    std::sort(d.train_idx.begin(), d.train_idx.end());
    std::sort(d.holdout_idx.begin(), d.holdout_idx.end());

    d.seen_stats.reserve(static_cast<std::size_t>(world.cfg.n_seen));
    for (int c = 0; c < world.cfg.n_seen; ++c) {
        std::vector<LatentCode> latents;
        for (int i : d.train_idx) {
            const Sample& s = d.dataset[static_cast<std::size_t>(i)];
            if (s.category == c) latents.push_back(s.latent);
        }
        if (latents.empty())
            throw std::runtime_error("build_data: category " + std::to_string(c) +
                                     " has no training samples");
        d.seen_stats.push_back(class_mean(latents, c));
    }
    return d;
}

PipelineState init_state(const RunConfig& cfg, const WorldSpec& world) {
    validate_config(cfg);
    const int L = world.cfg.latent_layers;
    const int D = world.cfg.latent_dim;

    PipelineState s;
    const Rng base(cfg.seed);
    Rng dict_rng = base.derive(kTagDict);
    s.dict = make_dictionary(cfg.dict_atoms, L, D, dict_rng);
    Rng enc_rng = base.derive(kTagEnc);
    s.enc = make_sparse_encoder(L * D, cfg.mlp_hidden, cfg.dict_atoms, cfg.shrink_threshold,
                                enc_rng);
    // Placeholder codebook; train_stage1 reseeds it from first-batch deltas.
    Rng cb_rng = base.derive(kTagCbInit);
    s.cb = make_codebook(randn(cb_rng, cfg.codebook_size, D));
    Rng tf_rng = base.derive(kTagTf);
    s.tf = make_transformer(D, cfg.codebook_size, cfg.tf_blocks, cfg.scaled_attention, tf_rng);
    Rng x_rng = base.derive(kTagXattn);
    s.xattn = make_cross_attention(D, world.cfg.embed_dim, cfg.cross_attn_dim, x_rng);
    s.edit_dist.mu = Mat(1, cfg.dict_atoms);
    s.edit_dist.sigma = Mat(cfg.dict_atoms, cfg.dict_atoms);
    s.edit_dist.diagonal = cfg.diagonal_covariance;
    s.vocab = default_vocabulary(world);
    return s;
}

std::uint64_t stage1_checksum(const PipelineState& s) {
    std::uint64_t h = fnv1a64(nullptr, 0);
    h = hash_mat(s.dict.atoms, h);
    for (const Mat& w : s.enc.weights) h = hash_mat(w, h);
    for (const Mat& b : s.enc.biases) h = hash_mat(b, h);
    h = hash_mat(s.cb.entries, h);
    return h;
}

void train_stage1(PipelineState& s, const RunConfig& cfg, const WorldSpec& world,
                  const PipelineData& data, LossLog* log) {
    if (data.train_idx.empty()) throw std::runtime_error("train_stage1: empty training split");
    const int L = world.cfg.latent_layers;
    const int D = world.cfg.latent_dim;

    const Rng base(cfg.seed);
    Rng batch_rng = base.derive(kTagS1Batch);
    Rng reinit_rng = base.derive(kTagS1Reinit);
    Rng cb_rng = base.derive(kTagCbInit);

    // Seed the codebook from the delta row statistics of the first batch
    // (peeked with a copy of the batch stream, so step 1 replays the same
    // batch and the whole run stays a function of the seed).
    {
        Rng peek = batch_rng;
        Mat rows(cfg.batch_size * L, D);
        for (int b = 0; b < cfg.batch_size; ++b) {
            const Sample& smp = data.dataset[static_cast<std::size_t>(pick_index(data.train_idx, peek))];
            const Mat delta = factorize(smp.latent, data.seen_stats[static_cast<std::size_t>(smp.category)]);
            for (int r = 0; r < L; ++r) set_row(rows, b * L + r, get_row(delta, r));
        }
        Mat mean_row(1, D);
        for (int r = 0; r < rows.rows; ++r)
            for (int c = 0; c < D; ++c) mean_row(0, c) += rows(r, c) / rows.rows;
        double var = 0.0;
        for (int r = 0; r < rows.rows; ++r)
            for (int c = 0; c < D; ++c) {
                const double d = rows(r, c) - mean_row(0, c);
                var += d * d / (rows.rows * D);
            }
        const double sdev = std::max(std::sqrt(var), 1e-3);
        Mat entries(cfg.codebook_size, D);
        for (int i = 0; i < entries.rows; ++i)
            for (int c = 0; c < D; ++c) entries(i, c) = mean_row(0, c) + sdev * cb_rng.normal();
        s.cb = make_codebook(std::move(entries));
    }

    AdamState opt;
    AdamConfig acfg;
    acfg.lr = cfg.lr;

    // Rolling pool of recent reconstruction rows, used to revive dead
    // codebook entries.
    std::vector<Mat> pool;
    std::size_t pool_next = 0;
    constexpr std::size_t kPoolCap = 512;

    for (int step = 1; step <= cfg.steps_stage1; ++step) {
        acfg.lr = scheduled_lr(cfg, step, cfg.steps_stage1);
        GraphParams gp;
        const ad::Var atoms = gp.lift(s.dict.atoms);
        EncoderVars ev;
        ev.leaky_slope = s.enc.leaky_slope;
        ev.shrink = s.enc.shrink;
        for (Mat& w : s.enc.weights) ev.weights.push_back(gp.lift(w));
        for (Mat& b : s.enc.biases) ev.biases.push_back(gp.lift(b));
        const ad::Var entries = gp.lift(s.cb.entries);

        ad::Var total = ad::constant(Mat(1, 1));
        double rec_sum = 0.0, cb_sum = 0.0, l1_sum = 0.0;
        for (int b = 0; b < cfg.batch_size; ++b) {
            const Sample& smp =
                data.dataset[static_cast<std::size_t>(pick_index(data.train_idx, batch_rng))];
            const CategoryStats& st = data.seen_stats[static_cast<std::size_t>(smp.category)];
            const Mat delta = factorize(smp.latent, st);

            const ad::Var code =
                sparse_encode(ad::constant(reshape(delta, 1, L * D)), ev);
            const ad::Var recon = reconstruct(code, atoms, L, D);

            QuantizeResult q = quantize(recon->value, s.cb);
            const ad::Var quant = ad::gather_rows(entries, q.codes);
            const CodebookLoss cl = codebook_loss(recon, quant, cfg.beta);

            // Reconstruction through the generator with the quantized delta
            // forwarded and the gradient routed straight through to the
            // encoder side.
            const ad::Var st_q = ad::straight_through(q.quantized, recon);
            const ad::Var edited = ad::add(st_q, ad::constant(st.mean));
            const ad::Var img = generate_image(world, edited);
            const ad::Var rec = ad::l2_norm(ad::sub(img, ad::constant(smp.image)));
            const ad::Var l1 = ad::l1_norm(code);

            const ad::Var item =
                ad::add(rec, ad::add(cl.total, ad::scale(l1, cfg.lambda_sparsity)));
            total = ad::add(total, item);
            rec_sum += rec->value(0, 0);
            cb_sum += cl.total->value(0, 0);
            l1_sum += l1->value(0, 0);

            for (int r = 0; r < L; ++r) {
                Mat row = get_row(recon->value, r);
                if (pool.size() < kPoolCap) {
                    pool.push_back(std::move(row));
                } else {
                    pool[pool_next] = std::move(row);
                    pool_next = (pool_next + 1) % kPoolCap;
                }
            }
        }
        total = ad::scale(total, 1.0 / cfg.batch_size);
        const double total_val = total->value(0, 0);
        if (!std::isfinite(total_val))
            throw std::runtime_error("train_stage1: non-finite loss at step " +
                                     std::to_string(step));
        ad::backward(total);
        gp.step(opt, acfg);

        if (cfg.reinit_interval > 0 && step % cfg.reinit_interval == 0 && !pool.empty()) {
            Mat pm(static_cast<int>(pool.size()), D);
            for (int r = 0; r < pm.rows; ++r) set_row(pm, r, pool[static_cast<std::size_t>(r)]);
            reinit_dead(s.cb, pm, reinit_rng, cfg.min_usage);
        }

        if (log != nullptr) {
            const double inv = 1.0 / cfg.batch_size;
            log->push_back({step, "recon", rec_sum * inv});
            log->push_back({step, "codebook", cb_sum * inv});
            log->push_back({step, "sparsity_l1", l1_sum * inv});
            log->push_back({step, "total", total_val});
        }
    }

    s.stage1_done = true;
    s.stage1_sum = stage1_checksum(s);
}

PromptContext prompt_from_tags(const std::vector<std::string>& tags, const Vocabulary& vocab,
                               const WorldSpec& world, Rng& rng) {
    if (tags.empty()) throw std::invalid_argument("prompt_from_tags: sample has no tags");
    const int n = static_cast<int>(tags.size());
    const int max_k = std::min(3, n);
    const int k = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_k)));
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    for (int i = 0; i < k; ++i) {
        const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - i)));
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    std::vector<std::string> picked;
    picked.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) picked.push_back(tags[static_cast<std::size_t>(order[i])]);
    return embed_prompt(picked, vocab, world.cfg.embed_dim, world.seed);
}

void train_stage2(PipelineState& s, const RunConfig& cfg, const WorldSpec& world,
                  const PipelineData& data, LossLog* log) {
    if (!s.stage1_done) throw std::runtime_error("train_stage2: stage 1 not trained");
    if (stage1_checksum(s) != s.stage1_sum)
        throw std::runtime_error("train_stage2: stage-1 parameters changed since freeze");
    if (data.train_idx.empty()) throw std::runtime_error("train_stage2: empty training split");
    const int L = world.cfg.latent_layers;
    const int D = world.cfg.latent_dim;

    // Stage-2 trainables always start from their seeded initialization, so
    // retraining a loaded checkpoint reproduces a fresh run instead of
    // silently warm-starting from whatever the checkpoint held.
    {
        const Rng base(cfg.seed);
        Rng tf_rng = base.derive(kTagTf);
        s.tf = make_transformer(D, cfg.codebook_size, cfg.tf_blocks, cfg.scaled_attention,
                                tf_rng);
        Rng x_rng = base.derive(kTagXattn);
        s.xattn = make_cross_attention(D, world.cfg.embed_dim, cfg.cross_attn_dim, x_rng);
        s.stage2_done = false;
    }

    // The edit distribution is fit over the frozen encoder's codes for every
    // training delta; it drives sampling in both inference modes.
    {
        std::vector<Mat> codes;
        codes.reserve(data.train_idx.size());
        for (int i : data.train_idx) {
            const Sample& smp = data.dataset[static_cast<std::size_t>(i)];
            const Mat delta = factorize(smp.latent, data.seen_stats[static_cast<std::size_t>(smp.category)]);
            codes.push_back(sparse_encode(delta, s.enc));
        }
        s.edit_dist = fit_edit_distribution(codes, cfg.diagonal_covariance);
    }

    if (cfg.with_cpm) {
        const Rng base(cfg.seed);
        Rng pick_rng = base.derive(kTagS2Batch);
        Rng edit_rng = base.derive(kTagS2Edit);
        Rng prompt_rng = base.derive(kTagS2Prompt);

        AdamState opt;
        AdamConfig acfg;

        for (int step = 1; step <= cfg.steps_stage2; ++step) {
            acfg.lr = scheduled_lr(cfg, step, cfg.steps_stage2);
            GraphParams gp;
            TransformerVars tv;
            tv.scaled = s.tf.scaled;
            for (AttentionBlock& blk : s.tf.blocks)
                tv.blocks.push_back({gp.lift(blk.wq), gp.lift(blk.wk), gp.lift(blk.wv)});
            tv.head_w = gp.lift(s.tf.head_w);
            tv.head_b = gp.lift(s.tf.head_b);

            CrossAttnVars xv;
            if (cfg.with_psm) {
                xv.wq = gp.lift(s.xattn.wq);
                xv.wk = gp.lift(s.xattn.wk);
                xv.wv = gp.lift(s.xattn.wv);
            }

            ad::Var total = ad::constant(Mat(1, 1));
            double ce_sum = 0.0, cd_sum = 0.0, sub_sum = 0.0, word_sum = 0.0;
            for (int b = 0; b < cfg.batch_size; ++b) {
                const Sample& smp =
                    data.dataset[static_cast<std::size_t>(pick_index(data.train_idx, pick_rng))];
                const CategoryStats& st = data.seen_stats[static_cast<std::size_t>(smp.category)];
                const Mat delta = factorize(smp.latent, st);

                // Training pair: apply a sampled edit on top of the sample's
                // own delta; ground-truth codes come from the frozen
                // quantizer on the edited delta.
                const Mat n_hat = sample_edit(s.edit_dist, edit_rng);
                const Mat edited = add(delta, reconstruct(n_hat, s.dict));
                const QuantizeResult q = quantize(edited, s.cb);
                const Mat& input = cfg.cpm_input_quantized ? q.quantized : edited;

                // Code losses use the promptless pass: code prediction is
                // supervised on its own, independent of prompt steering.
                const ad::Var logits = predict_logits(ad::constant(input), tv, nullptr);
                const ad::Var ce = cross_entropy_loss(logits, q.codes);

                const CodeSequence pred = argmax_rows(logits->value);
                Mat pred_delta(L, D);
                for (int r = 0; r < L; ++r)
                    set_row(pred_delta, r, get_row(s.cb.entries, pred[static_cast<std::size_t>(r)]));
                const ad::Var cd =
                    code_dict_loss(ad::constant(edited), ad::constant(pred_delta));

                ad::Var item = stage2_loss(ce, cd);
                if (cfg.with_psm) {
                    // Semantic losses train only the prompt cross-attention:
                    // a second, prompted forward pass treats the code
                    // predictor as fixed, so prompt steering is learned
                    // without dragging the code-prediction objective. The
                    // losses see the softmax-weighted expected entry, which
                    // keeps them differentiable through the prompted logits.
                    TransformerVars tfc = lift_transformer(s.tf);
                    const PromptContext pc =
                        prompt_from_tags(smp.tags, s.vocab, world, prompt_rng);
                    PromptConditioning cond;
                    cond.context = ad::constant(pc.embeddings);
                    cond.weights = xv;
                    cond.scaled = cfg.scaled_attention;
                    const ad::Var logits_sem =
                        predict_logits(ad::constant(input), tfc, &cond);
                    const ad::Var soft = ad::matmul(ad::softmax_rows(logits_sem),
                                                    ad::constant(s.cb.entries));
                    const ad::Var w_edit = ad::add(soft, ad::constant(st.mean));
                    const ad::Var ls = subject_loss(w_edit, smp.latent, world);
                    const ad::Var lw = word_loss(w_edit, pc, world);
                    item = ad::add(item, ad::add(ad::scale(ls, cfg.lambda_subject),
                                                 ad::scale(lw, cfg.lambda_word)));
                    sub_sum += ls->value(0, 0);
                    word_sum += lw->value(0, 0);
                }
                total = ad::add(total, item);
                ce_sum += ce->value(0, 0);
                cd_sum += cd->value(0, 0);
            }
            total = ad::scale(total, 1.0 / cfg.batch_size);
            const double total_val = total->value(0, 0);
            if (!std::isfinite(total_val))
                throw std::runtime_error("train_stage2: non-finite loss at step " +
                                         std::to_string(step));
            ad::backward(total);
            gp.step(opt, acfg);

            if (log != nullptr) {
                const double inv = 1.0 / cfg.batch_size;
                log->push_back({step, "cross_entropy", ce_sum * inv});
                log->push_back({step, "code_dict", cd_sum * inv});
                if (cfg.with_psm) {
                    log->push_back({step, "subject", sub_sum * inv});
                    log->push_back({step, "word", word_sum * inv});
                }
                log->push_back({step, "total", total_val});
            }
        }
    }

    if (stage1_checksum(s) != s.stage1_sum)
        throw std::runtime_error("train_stage2: stage-1 parameters changed during stage 2");
    s.stage2_done = true;
}

InferenceMode mode_from(const RunConfig& cfg) {
    return cfg.with_cpm ? InferenceMode::cpm : InferenceMode::nn_matching;
}

EditResult edit_one_shot(PipelineState& s, const Mat& image, const WorldSpec& world,
                         const RunConfig& cfg, Rng& rng, InferenceMode mode,
                         const PromptContext* prompts) {
    require_trained(s, "edit_one_shot");
    const int L = world.cfg.latent_layers;

    // One-shot: the single input acts as its category mean, so the edit is
    // applied on a zero delta.
    CategoryStats one;
    one.category_id = -1;
    one.mean = encode_image(world, image);
    one.sample_count = 1;

    EditResult r;
    r.prov.sampled_code = sample_edit(s.edit_dist, rng);
    const LatentCode edited = reconstruct(r.prov.sampled_code, s.dict);

    if (mode == InferenceMode::cpm) {
        const Mat input = cfg.cpm_input_quantized ? quantize(edited, s.cb).quantized : edited;
        const Mat logits = (prompts != nullptr) ? predict_logits(input, s.tf, prompts, &s.xattn)
                                                : predict_logits(input, s.tf);
        r.prov.codes = argmax_rows(logits);
    } else {
        r.prov.codes = quantize(edited, s.cb).codes;
    }

    Mat retrieved(L, world.cfg.latent_dim);
    for (int i = 0; i < L; ++i)
        set_row(retrieved, i, get_row(s.cb.entries, r.prov.codes[static_cast<std::size_t>(i)]));
    r.image = generate_image(world, recompose(retrieved, one));
    return r;
}

Stage1Metrics stage1_metrics(PipelineState& s, const PipelineData& data,
                             const WorldSpec& world) {
    if (!s.stage1_done) throw std::runtime_error("stage1_metrics: stage 1 not trained");
    if (data.train_idx.empty()) throw std::runtime_error("stage1_metrics: empty training split");

    std::vector<double> dict_err, quant_err, image_err;
    double spars = 0.0;
    long n = 0;
    for (int i : data.train_idx) {
        const Sample& smp = data.dataset[static_cast<std::size_t>(i)];
        const CategoryStats& st = data.seen_stats[static_cast<std::size_t>(smp.category)];
        const Mat delta = factorize(smp.latent, st);
        const Mat code = sparse_encode(delta, s.enc);
        const Mat recon = reconstruct(code, s.dict);
        const Mat quant = quantize(recon, s.cb).quantized;
        spars += sparsity_fraction(code);
        ++n;

        // Image-space error of the full pipeline path: what training actually
        // optimizes, relative to the input image.
        const Mat image = generate_image(world, recompose(quant, st));
        image_err.push_back(frob_norm(sub(image, smp.image)) / frob_norm(smp.image));

        const double dn = frob_norm(delta);
        if (dn < 1e-9) continue;  // zero-delta samples have no relative scale
        dict_err.push_back(frob_norm(sub(recon, delta)) / dn);
        quant_err.push_back(frob_norm(sub(quant, delta)) / dn);
    }
    if (dict_err.empty()) throw std::runtime_error("stage1_metrics: all training deltas are zero");

    Stage1Metrics m;
    m.median_rel_err_dict = median_of(dict_err);
    m.median_rel_err_quant = median_of(quant_err);
    m.median_rel_err_image = median_of(image_err);
    m.mean_sparsity = spars / static_cast<double>(n);
    return m;
}

CpmEval evaluate_cpm(PipelineState& s, const TransformerStack& tf, const RunConfig& cfg,
                     const PipelineData& data, int n_edits, Rng rng) {
    if (!s.stage1_done) throw std::runtime_error("evaluate_cpm: stage 1 not trained");
    if (data.holdout_idx.empty()) throw std::runtime_error("evaluate_cpm: empty holdout split");
    if (n_edits < 1) throw std::invalid_argument("evaluate_cpm: n_edits must be positive");

    CpmEval ev;
    double ce_total = 0.0;
    long correct = 0;
    for (int e = 0; e < n_edits; ++e) {
        const Sample& smp =
            data.dataset[static_cast<std::size_t>(pick_index(data.holdout_idx, rng))];
        const Mat delta = factorize(smp.latent, data.seen_stats[static_cast<std::size_t>(smp.category)]);
        const Mat n_hat = sample_edit(s.edit_dist, rng);
        const Mat edited = add(delta, reconstruct(n_hat, s.dict));
        const QuantizeResult q = quantize(edited, s.cb);
        const Mat& input = cfg.cpm_input_quantized ? q.quantized : edited;
        const Mat logits = predict_logits(input, tf);
        const CodeSequence pred = argmax_rows(logits);
        for (std::size_t r = 0; r < pred.size(); ++r) {
            ++ev.positions;
            if (pred[r] == q.codes[r]) ++correct;
        }
        ce_total += ad::cross_entropy_rows(ad::constant(logits), q.codes)->value(0, 0);
    }
    ev.top1 = static_cast<double>(correct) / static_cast<double>(ev.positions);
    ev.cross_entropy = ce_total / static_cast<double>(n_edits);
    return ev;
}

std::vector<CategoryReport> run_eval(PipelineState& s, const WorldSpec& world,
                                     const RunConfig& cfg, const PipelineData& data,
                                     InferenceMode mode) {
    require_trained(s, "run_eval");
    const Rng eval_rng = Rng(cfg.seed).derive(kTagEval);
    const bool use_prompts = cfg.with_psm && mode == InferenceMode::cpm;
    const EditFn fn = [&s, &world, &cfg, mode, use_prompts](const Sample& input, Rng& r) {
        PromptContext ctx;
        const PromptContext* pc = nullptr;
        if (use_prompts) {
            ctx = prompt_from_tags(input.tags, s.vocab, world, r);
            pc = &ctx;
        }
        EditResult er = edit_one_shot(s, input.image, world, cfg, r, mode, pc);
        return EditOutcome{std::move(er.image), std::move(er.prov.codes)};
    };
    return evaluate(world, data.dataset, cfg.eval_fakes, eval_rng, fn);
}

std::string metrics_csv(const std::vector<CategoryReport>& reports, const RunConfig& cfg) {
    const std::string h = config_hash(cfg);
    std::string out = "category,frechet,diversity,config_hash,seed\n";
    char buf[256];
    for (const CategoryReport& r : reports) {
        std::snprintf(buf, sizeof buf, "%d,%.12g,%.12g,%s,%" PRIu64 "\n", r.category, r.frechet,
                      r.diversity, h.c_str(), cfg.seed);
        out += buf;
    }
    return out;
}

RunOutputs run_full(const RunConfig& cfg) {
    validate_config(cfg);
    RunOutputs o;
    o.world = make_world(cfg.world, cfg.seed);
    o.data = build_data(o.world, cfg);
    o.state = init_state(cfg, o.world);
    train_stage1(o.state, cfg, o.world, o.data, &o.log1);
    train_stage2(o.state, cfg, o.world, o.data, &o.log2);
    o.reports = run_eval(o.state, o.world, cfg, o.data, mode_from(cfg));
    o.csv = metrics_csv(o.reports, cfg);
    return o;
}

std::string ablate_csv(const RunConfig& base) {
    struct Row {
        const char* name;
        bool clm, cpm, psm;
    };
    constexpr Row kRows[3] = {{"clm_only", true, false, false},
                              {"with_cpm", false, true, false},
                              {"with_psm", false, true, true}};

    std::string out = "ablation,category,frechet,diversity,config_hash,seed\n";
    char buf[320];
    for (const Row& ab : kRows) {
        RunConfig cfg = base;
        cfg.clm_only = ab.clm;
        cfg.with_cpm = ab.cpm;
        cfg.with_psm = ab.psm;
        const RunOutputs o = run_full(cfg);
        const std::string h = config_hash(cfg);
        for (const CategoryReport& r : o.reports) {
            std::snprintf(buf, sizeof buf, "%s,%d,%.12g,%.12g,%s,%" PRIu64 "\n", ab.name,
                          r.category, r.frechet, r.diversity, h.c_str(), cfg.seed);
            out += buf;
        }
    }
    return out;
}

void save_state(const std::filesystem::path& dir, const PipelineState& s, const RunConfig& cfg) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "stage1");
    fs::create_directories(dir / "stage2");

    write_json_file(dir / "config.json", config_to_json(cfg));
    save_vocabulary(dir / "vocab.json", s.vocab);

    save_mat(dir / "stage1" / "dict_atoms.ledt", s.dict.atoms);
    for (std::size_t i = 0; i < s.enc.weights.size(); ++i) {
        save_mat(dir / "stage1" / ("enc_w" + std::to_string(i) + ".ledt"), s.enc.weights[i]);
        save_mat(dir / "stage1" / ("enc_b" + std::to_string(i) + ".ledt"), s.enc.biases[i]);
    }
    save_mat(dir / "stage1" / "codebook.ledt", s.cb.entries);
    json m1;
    m1["stage1_done"] = s.stage1_done;
    m1["checksum"] = hex64(s.stage1_sum);
    m1["leaky_slope"] = s.enc.leaky_slope;
    m1["shrink"] = s.enc.shrink;
    write_json_file(dir / "stage1" / "meta.json", m1);

    save_mat(dir / "stage2" / "edit_mu.ledt", s.edit_dist.mu);
    save_mat(dir / "stage2" / "edit_sigma.ledt", s.edit_dist.sigma);
    for (std::size_t i = 0; i < s.tf.blocks.size(); ++i) {
        const std::string stem = "tf_block" + std::to_string(i);
        save_mat(dir / "stage2" / (stem + "_wq.ledt"), s.tf.blocks[i].wq);
        save_mat(dir / "stage2" / (stem + "_wk.ledt"), s.tf.blocks[i].wk);
        save_mat(dir / "stage2" / (stem + "_wv.ledt"), s.tf.blocks[i].wv);
    }
    save_mat(dir / "stage2" / "tf_head_w.ledt", s.tf.head_w);
    save_mat(dir / "stage2" / "tf_head_b.ledt", s.tf.head_b);
    save_mat(dir / "stage2" / "xattn_wq.ledt", s.xattn.wq);
    save_mat(dir / "stage2" / "xattn_wk.ledt", s.xattn.wk);
    save_mat(dir / "stage2" / "xattn_wv.ledt", s.xattn.wv);
    json m2;
    m2["stage2_done"] = s.stage2_done;
    m2["blocks"] = s.tf.blocks.size();
    m2["dim"] = s.tf.dim();
    m2["entries"] = s.tf.n_entries();
    m2["scaled_attention"] = s.tf.scaled;
    m2["diagonal_covariance"] = s.edit_dist.diagonal;
    write_json_file(dir / "stage2" / "meta.json", m2);
}

PipelineState load_state(const std::filesystem::path& dir, const RunConfig& cfg,
                         const WorldSpec& world) {
    namespace fs = std::filesystem;
    const int L = world.cfg.latent_layers;
    const int D = world.cfg.latent_dim;
    (void)L;

    PipelineState s = init_state(cfg, world);
    s.vocab = load_vocabulary(dir / "vocab.json");
    validate_vocabulary(s.vocab);

    const json m1 = read_json_file(dir / "stage1" / "meta.json");
    s.dict.atoms = load_shaped(dir / "stage1" / "dict_atoms.ledt", cfg.dict_atoms,
                               world.cfg.latent_layers * D);
    for (std::size_t i = 0; i < s.enc.weights.size(); ++i) {
        s.enc.weights[i] = load_shaped(dir / "stage1" / ("enc_w" + std::to_string(i) + ".ledt"),
                                       s.enc.weights[i].rows, s.enc.weights[i].cols);
        s.enc.biases[i] = load_shaped(dir / "stage1" / ("enc_b" + std::to_string(i) + ".ledt"),
                                      s.enc.biases[i].rows, s.enc.biases[i].cols);
    }
    s.enc.leaky_slope = m1.at("leaky_slope").get<double>();
    s.enc.shrink = m1.at("shrink").get<double>();
    s.cb = make_codebook(load_shaped(dir / "stage1" / "codebook.ledt", cfg.codebook_size, D));
    s.stage1_done = m1.at("stage1_done").get<bool>();
    s.stage1_sum = parse_hex64(m1.at("checksum").get<std::string>(), "load_state");
    if (s.stage1_done && stage1_checksum(s) != s.stage1_sum)
        throw std::runtime_error("load_state: stage-1 checksum mismatch in " + dir.string());

    const fs::path meta2 = dir / "stage2" / "meta.json";
    if (fs::exists(meta2)) {
        const json m2 = read_json_file(meta2);
        s.edit_dist.mu = load_shaped(dir / "stage2" / "edit_mu.ledt", 1, cfg.dict_atoms);
        s.edit_dist.sigma =
            load_shaped(dir / "stage2" / "edit_sigma.ledt", cfg.dict_atoms, cfg.dict_atoms);
        s.edit_dist.diagonal = m2.at("diagonal_covariance").get<bool>();
        for (std::size_t i = 0; i < s.tf.blocks.size(); ++i) {
            const std::string stem = "tf_block" + std::to_string(i);
            s.tf.blocks[i].wq = load_shaped(dir / "stage2" / (stem + "_wq.ledt"), D, D);
            s.tf.blocks[i].wk = load_shaped(dir / "stage2" / (stem + "_wk.ledt"), D, D);
            s.tf.blocks[i].wv = load_shaped(dir / "stage2" / (stem + "_wv.ledt"), D, D);
        }
        s.tf.head_w = load_shaped(dir / "stage2" / "tf_head_w.ledt", D, cfg.codebook_size);
        s.tf.head_b = load_shaped(dir / "stage2" / "tf_head_b.ledt", 1, cfg.codebook_size);
        s.tf.scaled = m2.at("scaled_attention").get<bool>();
        s.xattn.wq = load_shaped(dir / "stage2" / "xattn_wq.ledt", D, cfg.cross_attn_dim);
        s.xattn.wk =
            load_shaped(dir / "stage2" / "xattn_wk.ledt", world.cfg.embed_dim, cfg.cross_attn_dim);
        s.xattn.wv = load_shaped(dir / "stage2" / "xattn_wv.ledt", world.cfg.embed_dim, D);
        s.stage2_done = m2.at("stage2_done").get<bool>();
    } else {
        s.stage2_done = false;
    }
    return s;
}

void export_dataset(const std::filesystem::path& dir, const WorldSpec& world,
                    const std::vector<Sample>& dataset, const RunConfig& cfg) {
    namespace fs = std::filesystem;
    if (dataset.empty()) throw std::invalid_argument("export_dataset: empty dataset");
    fs::create_directories(dir);

    const int n = static_cast<int>(dataset.size());
    const int flat = world.cfg.latent_layers * world.cfg.latent_dim;
    Mat images(n, world.cfg.image_dim);
    Mat latents(n, flat);
    Mat coeffs(n, world.cfg.true_attrs);
    json cats = json::array();
    json tags = json::array();
    for (int i = 0; i < n; ++i) {
        const Sample& s = dataset[static_cast<std::size_t>(i)];
        set_row(images, i, s.image);
        set_row(latents, i, reshape(s.latent, 1, flat));
        set_row(coeffs, i, s.true_coeffs);
        cats.push_back(s.category);
        tags.push_back(s.tags);
    }
    save_mat(dir / "images.ledt", images);
    save_mat(dir / "latents.ledt", latents);
    save_mat(dir / "true_coeffs.ledt", coeffs);

    json meta;
    meta["n_samples"] = n;
    meta["latent_layers"] = world.cfg.latent_layers;
    meta["latent_dim"] = world.cfg.latent_dim;
    meta["image_dim"] = world.cfg.image_dim;
    meta["seed"] = cfg.seed;
    meta["config_hash"] = config_hash(cfg);
    meta["categories"] = cats;
    meta["tags"] = tags;
    write_json_file(dir / "meta.json", meta);
}

}  // namespace ledt
