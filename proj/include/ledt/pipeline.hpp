#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ledt/code_predictor.hpp"
#include "ledt/codebook.hpp"
#include "ledt/config.hpp"
#include "ledt/dictionary.hpp"
#include "ledt/latent_space.hpp"
#include "ledt/metrics.hpp"
#include "ledt/prompt_semantics.hpp"
#include "ledt/synthetic_world.hpp"

namespace ledt {

struct LossLogRow {
    int step;
    std::string name;
    double value;
};
using LossLog = std::vector<LossLogRow>;
void write_loss_csv(const std::filesystem::path& path, const LossLog& log);

// Deterministic views derived from (config, world): the dataset, per-seen-
// category stats over the training split, and the train/holdout split.
struct PipelineData {
    std::vector<Sample> dataset;
    std::vector<CategoryStats> seen_stats;  // indexed by category id
    std::vector<int> train_idx;             // indices into dataset, seen categories
    std::vector<int> holdout_idx;
};
PipelineData build_data(const WorldSpec& world, const RunConfig& cfg);

struct PipelineState {
    Dictionary dict;
    SparseEncoder enc;
    Codebook cb;
    EditDistribution edit_dist;
    TransformerStack tf;
    CrossAttnWeights xattn;
    Vocabulary vocab;
    bool stage1_done = false;
    bool stage2_done = false;
    std::uint64_t stage1_sum = 0;  // checksum at stage-1 freeze
};

PipelineState init_state(const RunConfig& cfg, const WorldSpec& world);

// FNV-1a over the stage-1 parameters (dictionary atoms, encoder weights and
// biases, codebook entries). Usage counts are bookkeeping, not parameters,
// and are excluded.
std::uint64_t stage1_checksum(const PipelineState& s);

// Stage 1: train dictionary, sparse encoder and codebook on seen-category
// deltas (image reconstruction through the generator with straight-through
// quantization, codebook loss, L1 sparsity penalty).
void train_stage1(PipelineState& s, const RunConfig& cfg, const WorldSpec& world,
                  const PipelineData& data, LossLog* log = nullptr);

// Stage 2: fit the edit distribution over stage-1 sparse codes, then (unless
// clm_only) train the code predictor -- and the prompt cross-attention when
// with_psm -- with stage-1 parameters frozen. Training pairs apply a sampled
// edit to a seen sample's delta; ground-truth codes come from quantizing the
// edited delta with the frozen codebook.
void train_stage2(PipelineState& s, const RunConfig& cfg, const WorldSpec& world,
                  const PipelineData& data, LossLog* log = nullptr);

enum class InferenceMode { nn_matching, cpm };
InferenceMode mode_from(const RunConfig& cfg);

struct Provenance {
    Mat sampled_code;  // 1 x l
    CodeSequence codes;
};
struct EditResult {
    Mat image;  // 1 x image_dim
    Provenance prov;
};

// One-shot edit: encode the input image, treat it as the category mean,
// sample an edit, predict or match codes, retrieve entries and generate.
EditResult edit_one_shot(PipelineState& s, const Mat& image, const WorldSpec& world,
                         const RunConfig& cfg, Rng& rng, InferenceMode mode,
                         const PromptContext* prompts = nullptr);

// Uniformly pick 1-3 cue words from a sample's ground-truth tags.
PromptContext prompt_from_tags(const std::vector<std::string>& tags, const Vocabulary& vocab,
                               const WorldSpec& world, Rng& rng);

// Reconstruction quality of the trained stage-1 modules over the training
// split, in the latent domain (relative to the true delta norm).
struct Stage1Metrics {
    double median_rel_err_dict = 0.0;   // delta space, before quantization
    double median_rel_err_quant = 0.0;  // delta space, after quantization
    double median_rel_err_image = 0.0;  // image space, full quantized path
    double mean_sparsity = 0.0;
};
Stage1Metrics stage1_metrics(PipelineState& s, const PipelineData& data,
                             const WorldSpec& world);

// Held-out code prediction quality: edited deltas built from holdout samples
// and fresh edit draws, prediction by `tf` (prompts off), targets from the
// frozen quantizer.
struct CpmEval {
    double top1 = 0.0;
    double cross_entropy = 0.0;
    long positions = 0;
};
CpmEval evaluate_cpm(PipelineState& s, const TransformerStack& tf, const RunConfig& cfg,
                     const PipelineData& data, int n_edits, Rng rng);

std::vector<CategoryReport> run_eval(PipelineState& s, const WorldSpec& world,
                                     const RunConfig& cfg, const PipelineData& data,
                                     InferenceMode mode);
std::string metrics_csv(const std::vector<CategoryReport>& reports, const RunConfig& cfg);

struct RunOutputs {
    WorldSpec world;
    PipelineData data;
    PipelineState state;
    std::vector<CategoryReport> reports;
    LossLog log1, log2;
    std::string csv;
};
RunOutputs run_full(const RunConfig& cfg);

// The three ablation rows (nn matching only / + code prediction / + prompt
// semantics) under one seed; one CSV row per (ablation, unseen category).
std::string ablate_csv(const RunConfig& base);

void save_state(const std::filesystem::path& dir, const PipelineState& s, const RunConfig& cfg);
PipelineState load_state(const std::filesystem::path& dir, const RunConfig& cfg,
                         const WorldSpec& world);

void export_dataset(const std::filesystem::path& dir, const WorldSpec& world,
                    const std::vector<Sample>& dataset, const RunConfig& cfg);

}  // namespace ledt
