#include "ledt/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <stdexcept>

namespace ledt {

namespace {

void require_keys(const nlohmann::json& j, const std::set<std::string>& known, const char* where) {
    for (const auto& [key, value] : j.items())
        if (!known.count(key))
            throw std::invalid_argument(std::string(where) + ": unknown key '" + key + "'");
}

template <typename T>
void read_if(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void validate_config(const RunConfig& cfg) {
    const WorldConfig& w = cfg.world;
    if (w.latent_layers <= 0 || w.latent_dim <= 0 || w.image_dim <= 0 || w.embed_dim <= 0)
        throw std::invalid_argument("config: world dimensions must be positive");
    if (w.image_dim < w.latent_layers * w.latent_dim)
        throw std::invalid_argument("config: image_dim must be at least latent_layers*latent_dim");
    if (w.true_attrs <= 0 || w.n_seen <= 0 || w.n_unseen < 0 || w.samples_per_category <= 0)
        throw std::invalid_argument("config: world counts must be positive");
    if (w.noise_sigma < 0.0) throw std::invalid_argument("config: noise_sigma must be non-negative");
    if (cfg.dict_atoms <= 0 || cfg.codebook_size < 2)
        throw std::invalid_argument("config: dictionary/codebook sizes out of range");
    if (cfg.beta < 0.0 || cfg.lambda_sparsity < 0.0 || cfg.lambda_subject < 0.0 ||
        cfg.lambda_word < 0.0 || cfg.shrink_threshold < 0.0)
        throw std::invalid_argument("config: loss weights must be non-negative");
    if (cfg.mlp_hidden <= 0 || cfg.tf_blocks <= 0 || cfg.cross_attn_dim <= 0)
        throw std::invalid_argument("config: model sizes must be positive");
    if (!(cfg.lr > 0.0)) throw std::invalid_argument("config: lr must be positive");
    if (!(cfg.lr_peak_mult >= 1.0))
        throw std::invalid_argument("config: lr_peak_mult must be at least 1");
    if (cfg.steps_stage1 < 0 || cfg.steps_stage2 < 0)
        throw std::invalid_argument("config: step counts must be non-negative");
    if (cfg.batch_size <= 0) throw std::invalid_argument("config: batch_size must be positive");
    if (cfg.reinit_interval <= 0) throw std::invalid_argument("config: reinit_interval must be positive");
    if (cfg.holdout_fraction < 0.0 || cfg.holdout_fraction >= 1.0)
        throw std::invalid_argument("config: holdout_fraction must be in [0, 1)");
    if (cfg.eval_fakes < 2) throw std::invalid_argument("config: eval_fakes must be at least 2");
    if (cfg.clm_only == cfg.with_cpm)
        throw std::invalid_argument("config: clm_only and with_cpm must disagree");
    if (cfg.with_psm && !cfg.with_cpm)
        throw std::invalid_argument("config: with_psm requires with_cpm");
}

nlohmann::json config_to_json(const RunConfig& cfg) {
    nlohmann::json w;
    w["latent_layers"] = cfg.world.latent_layers;
    w["latent_dim"] = cfg.world.latent_dim;
    w["image_dim"] = cfg.world.image_dim;
    w["embed_dim"] = cfg.world.embed_dim;
    w["true_attrs"] = cfg.world.true_attrs;
    w["n_seen"] = cfg.world.n_seen;
    w["n_unseen"] = cfg.world.n_unseen;
    w["samples_per_category"] = cfg.world.samples_per_category;
    w["noise_sigma"] = cfg.world.noise_sigma;

    nlohmann::json j;
    j["world"] = w;
    j["dict_atoms"] = cfg.dict_atoms;
    j["codebook_size"] = cfg.codebook_size;
    j["beta"] = cfg.beta;
    j["lambda_sparsity"] = cfg.lambda_sparsity;
    j["shrink_threshold"] = cfg.shrink_threshold;
    j["mlp_hidden"] = cfg.mlp_hidden;
    j["reinit_interval"] = cfg.reinit_interval;
    j["min_usage"] = cfg.min_usage;
    j["tf_blocks"] = cfg.tf_blocks;
    j["scaled_attention"] = cfg.scaled_attention;
    j["cross_attn_dim"] = cfg.cross_attn_dim;
    j["lambda_subject"] = cfg.lambda_subject;
    j["lambda_word"] = cfg.lambda_word;
    j["diagonal_covariance"] = cfg.diagonal_covariance;
    j["cpm_input_quantized"] = cfg.cpm_input_quantized;
    j["lr"] = cfg.lr;
    j["lr_peak_mult"] = cfg.lr_peak_mult;
    j["steps_stage1"] = cfg.steps_stage1;
    j["steps_stage2"] = cfg.steps_stage2;
    j["batch_size"] = cfg.batch_size;
    j["holdout_fraction"] = cfg.holdout_fraction;
    j["clm_only"] = cfg.clm_only;
    j["with_cpm"] = cfg.with_cpm;
    j["with_psm"] = cfg.with_psm;
    j["seed"] = cfg.seed;
    j["out_dir"] = cfg.out_dir;
    j["eval_fakes"] = cfg.eval_fakes;
    return j;
}

RunConfig config_from_json(const nlohmann::json& j) {
    static const std::set<std::string> top_keys = {
        "world", "dict_atoms", "codebook_size", "beta", "lambda_sparsity",
        "shrink_threshold", "mlp_hidden", "reinit_interval", "min_usage",
        "tf_blocks", "scaled_attention", "cross_attn_dim", "lambda_subject",
        "lambda_word", "diagonal_covariance", "cpm_input_quantized", "lr", "lr_peak_mult",
        "steps_stage1", "steps_stage2", "batch_size", "holdout_fraction",
        "clm_only", "with_cpm", "with_psm", "seed", "out_dir", "eval_fakes"};
    static const std::set<std::string> world_keys = {
        "latent_layers", "latent_dim", "image_dim", "embed_dim", "true_attrs",
        "n_seen", "n_unseen", "samples_per_category", "noise_sigma"};

    if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
    require_keys(j, top_keys, "config");

    RunConfig cfg;
    if (j.contains("world")) {
        const nlohmann::json& w = j.at("world");
        if (!w.is_object()) throw std::invalid_argument("config: world must be an object");
        require_keys(w, world_keys, "config.world");
        read_if(w, "latent_layers", cfg.world.latent_layers);
        read_if(w, "latent_dim", cfg.world.latent_dim);
        read_if(w, "image_dim", cfg.world.image_dim);
        read_if(w, "embed_dim", cfg.world.embed_dim);
        read_if(w, "true_attrs", cfg.world.true_attrs);
        read_if(w, "n_seen", cfg.world.n_seen);
        read_if(w, "n_unseen", cfg.world.n_unseen);
        read_if(w, "samples_per_category", cfg.world.samples_per_category);
        read_if(w, "noise_sigma", cfg.world.noise_sigma);
    }
    read_if(j, "dict_atoms", cfg.dict_atoms);
    read_if(j, "codebook_size", cfg.codebook_size);
    read_if(j, "beta", cfg.beta);
    read_if(j, "lambda_sparsity", cfg.lambda_sparsity);
    read_if(j, "shrink_threshold", cfg.shrink_threshold);
    read_if(j, "mlp_hidden", cfg.mlp_hidden);
    read_if(j, "reinit_interval", cfg.reinit_interval);
    read_if(j, "min_usage", cfg.min_usage);
    read_if(j, "tf_blocks", cfg.tf_blocks);
    read_if(j, "scaled_attention", cfg.scaled_attention);
    read_if(j, "cross_attn_dim", cfg.cross_attn_dim);
    read_if(j, "lambda_subject", cfg.lambda_subject);
    read_if(j, "lambda_word", cfg.lambda_word);
    read_if(j, "diagonal_covariance", cfg.diagonal_covariance);
    read_if(j, "cpm_input_quantized", cfg.cpm_input_quantized);
    read_if(j, "lr", cfg.lr);
    read_if(j, "lr_peak_mult", cfg.lr_peak_mult);
    read_if(j, "steps_stage1", cfg.steps_stage1);
    read_if(j, "steps_stage2", cfg.steps_stage2);
    read_if(j, "batch_size", cfg.batch_size);
    read_if(j, "holdout_fraction", cfg.holdout_fraction);
    read_if(j, "clm_only", cfg.clm_only);
    read_if(j, "with_cpm", cfg.with_cpm);
    read_if(j, "with_psm", cfg.with_psm);
    read_if(j, "seed", cfg.seed);
    read_if(j, "out_dir", cfg.out_dir);
    read_if(j, "eval_fakes", cfg.eval_fakes);
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_config: cannot open " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("load_config: " + std::string(e.what()));
    }
    RunConfig cfg = config_from_json(j);
    if (const char* env = std::getenv("LEDT_SEED")) {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(env, &end, 10);
        if (end == env || *end != '\0')
            throw std::invalid_argument("LEDT_SEED: not an unsigned integer");
        cfg.seed = v;
    }
    validate_config(cfg);
    return cfg;
}

RunConfig default_config() {
    RunConfig cfg;
    validate_config(cfg);
    return cfg;
}

std::string config_hash(const RunConfig& cfg) {
    const std::string s = config_to_json(cfg).dump();
    const std::uint64_t h = fnv1a64(s.data(), s.size());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace ledt
