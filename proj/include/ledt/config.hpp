#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "ledt/synthetic_world.hpp"

namespace ledt {

// Full run configuration. Loaded from a single JSON file; unknown keys are
// rejected, omitted keys keep their defaults. The LEDT_SEED environment
// variable, when set, overrides the seed.
struct RunConfig {
    WorldConfig world;

    // stage 1
    int dict_atoms = 6;
    int codebook_size = 32;
    double beta = 0.25;
    double lambda_sparsity = 0.01;
    double shrink_threshold = 0.05;
    int mlp_hidden = 64;
    int reinit_interval = 100;
    long min_usage = 1;

    // stage 2
    int tf_blocks = 9;
    bool scaled_attention = true;
    int cross_attn_dim = 8;
    double lambda_subject = 0.1;
    double lambda_word = 0.1;
    bool diagonal_covariance = false;
    bool cpm_input_quantized = false;

    // training
    double lr = 1e-3;
    // Warmup-hold-decay schedule: ramp to lr_peak_mult * lr over the first
    // 10% of steps, hold, then cosine-decay over the last 30%. 1.0 keeps the
    // base rate throughout (with the decay tail). Gradients are clipped to
    // unit global norm each step, which keeps the high-rate phase stable.
    double lr_peak_mult = 40.0;
    int steps_stage1 = 2000;
    int steps_stage2 = 2000;
    int batch_size = 128;
    double holdout_fraction = 0.2;

    // ablation flags: clm_only <=> !with_cpm, with_psm => with_cpm
    bool clm_only = false;
    bool with_cpm = true;
    bool with_psm = true;

    std::uint64_t seed = 71001;
    std::string out_dir = "out";
    int eval_fakes = 64;
};

void validate_config(const RunConfig& cfg);
nlohmann::json config_to_json(const RunConfig& cfg);
RunConfig config_from_json(const nlohmann::json& j);

// Parse, apply LEDT_SEED override, validate.
RunConfig load_config(const std::filesystem::path& path);
RunConfig default_config();

// FNV-1a over the canonical serialized form, as a 16-digit hex string.
std::string config_hash(const RunConfig& cfg);

}  // namespace ledt
