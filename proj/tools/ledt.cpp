// Command-line front end: data generation, two-stage training, one-shot
// editing, evaluation, gradient checking and the ablation table.

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ledt/loss_suite.hpp"
#include "ledt/pipeline.hpp"
#include "ledt/tensor_io.hpp"

namespace fs = std::filesystem;
using namespace ledt;

namespace {

struct Shared {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

void add_shared(CLI::App* sub, Shared& sh) {
    sub->add_option("--config", sh.config_path, "JSON run configuration (defaults when omitted)");
    sub->add_option("--out", sh.out_dir, "output directory (overrides config)");
    sub->add_option("--seed", sh.seed, "run seed (overrides config and LEDT_SEED)")
        ->each([&sh](const std::string&) { sh.seed_set = true; });
}

RunConfig resolve_config(const Shared& sh) {
    RunConfig cfg = sh.config_path.empty() ? default_config() : load_config(sh.config_path);
    if (sh.seed_set) cfg.seed = sh.seed;
    if (!sh.out_dir.empty()) cfg.out_dir = sh.out_dir;
    validate_config(cfg);
    return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

InferenceMode resolve_mode(const std::string& mode, const RunConfig& cfg) {
    if (mode == "auto") return mode_from(cfg);
    if (mode == "nn") return InferenceMode::nn_matching;
    if (mode == "cpm") return InferenceMode::cpm;
    throw std::invalid_argument("unknown mode '" + mode + "' (auto|nn|cpm)");
}

int default_edit_input(const WorldSpec& world) {
    // First sample of the first unseen category; dataset order is seen
    // categories first.
    return world.cfg.n_seen * world.cfg.samples_per_category;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"linear-latent attribute editing pipeline"};
    app.require_subcommand(1);

    Shared sh;

    CLI::App* gen = app.add_subcommand("gen-data", "sample the synthetic dataset and export it");
    add_shared(gen, sh);

    CLI::App* s1 = app.add_subcommand("train-stage1", "train dictionary, encoder and codebook");
    add_shared(s1, sh);

    CLI::App* s2 = app.add_subcommand("train-stage2", "fit edits and train the code predictor");
    add_shared(s2, sh);

    CLI::App* edit = app.add_subcommand("edit", "one-shot edits from a trained state");
    add_shared(edit, sh);
    int edit_sample = -1;
    int edit_count = 4;
    std::string edit_mode = "auto";
    std::vector<std::string> edit_prompt;
    edit->add_option("--sample", edit_sample, "dataset index of the input image");
    edit->add_option("--count", edit_count, "number of edited outputs")->check(CLI::PositiveNumber);
    edit->add_option("--mode", edit_mode, "code selection: auto|nn|cpm");
    edit->add_option("--prompt", edit_prompt, "cue words for prompt conditioning");

    CLI::App* ev = app.add_subcommand("eval", "evaluate a trained state on unseen categories");
    add_shared(ev, sh);
    std::string eval_mode = "auto";
    ev->add_option("--mode", eval_mode, "code selection: auto|nn|cpm");

    CLI::App* gc = app.add_subcommand("gradcheck", "finite-difference check of the loss gradients");
    add_shared(gc, sh);
    int gc_points = 10;
    double gc_eps = 1e-5;
    double gc_tol = 1e-4;
    gc->add_option("--points", gc_points, "evaluation points per case")->check(CLI::PositiveNumber);
    gc->add_option("--eps", gc_eps, "finite-difference step");
    gc->add_option("--tol", gc_tol, "max relative error accepted");

    CLI::App* ab = app.add_subcommand("ablate", "run the three-row ablation table");
    add_shared(ab, sh);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (gc->parsed()) {
            const RunConfig cfg = resolve_config(sh);
            const auto cases = run_gradcheck_suite(cfg.seed, gc_points, gc_eps);
            bool ok = true;
            for (const auto& c : cases) {
                const bool pass = c.worst < gc_tol;
                ok = ok && pass;
                std::printf("%-34s max_rel_err %.3e over %d points  %s\n", c.name.c_str(), c.worst,
                            c.points, pass ? "ok" : "FAIL");
            }
            if (!ok) {
                std::fprintf(stderr, "error: gradient check exceeded tolerance %.3e\n", gc_tol);
                return 1;
            }
            return 0;
        }

        const RunConfig cfg = resolve_config(sh);
        const fs::path out_dir(cfg.out_dir);
        const fs::path state_dir = out_dir / "state";
        const WorldSpec world = make_world(cfg.world, cfg.seed);

        if (gen->parsed()) {
            const PipelineData data = build_data(world, cfg);
            export_dataset(out_dir / "dataset", world, data.dataset, cfg);
            std::printf("wrote %zu samples (%d categories) to %s\n", data.dataset.size(),
                        world.n_categories(), (out_dir / "dataset").string().c_str());
            return 0;
        }

        if (s1->parsed()) {
            const PipelineData data = build_data(world, cfg);
            PipelineState state = init_state(cfg, world);
            LossLog log;
            train_stage1(state, cfg, world, data, &log);
            fs::create_directories(out_dir);
            write_loss_csv(out_dir / "stage1_losses.csv", log);
            save_state(state_dir, state, cfg);
            const Stage1Metrics m = stage1_metrics(state, data, world);
            std::printf(
                "stage 1 done: median_rel_err dict %.4f quant %.4f image %.4f sparsity %.3f\n",
                m.median_rel_err_dict, m.median_rel_err_quant, m.median_rel_err_image,
                m.mean_sparsity);
            std::printf("stage-1 checksum %016" PRIx64 "\n", state.stage1_sum);
            return 0;
        }

        if (s2->parsed()) {
            const PipelineData data = build_data(world, cfg);
            PipelineState state = load_state(state_dir, cfg, world);
            LossLog log;
            train_stage2(state, cfg, world, data, &log);
            fs::create_directories(out_dir);
            write_loss_csv(out_dir / "stage2_losses.csv", log);
            save_state(state_dir, state, cfg);
            if (cfg.with_cpm) {
                const CpmEval e = evaluate_cpm(state, state.tf, cfg, data, 200,
                                               Rng(cfg.seed).derive(0x48454c44));
                std::printf("stage 2 done: holdout top1 %.4f cross_entropy %.4f (%ld positions)\n",
                            e.top1, e.cross_entropy, e.positions);
            } else {
                std::printf("stage 2 done: edit distribution fit, code predictor skipped\n");
            }
            return 0;
        }

        if (edit->parsed()) {
            const PipelineData data = build_data(world, cfg);
            PipelineState state = load_state(state_dir, cfg, world);
            const InferenceMode mode = resolve_mode(edit_mode, cfg);
            if (!edit_prompt.empty() && mode != InferenceMode::cpm)
                throw std::invalid_argument("prompts require code prediction mode");

            const int idx = edit_sample >= 0 ? edit_sample : default_edit_input(world);
            if (idx >= static_cast<int>(data.dataset.size()))
                throw std::invalid_argument("--sample out of range");
            const Sample& input = data.dataset[static_cast<std::size_t>(idx)];

            PromptContext ctx;
            const PromptContext* pc = nullptr;
            if (!edit_prompt.empty()) {
                ctx = embed_prompt(edit_prompt, state.vocab, world.cfg.embed_dim, world.seed);
                pc = &ctx;
            }

            const fs::path edit_dir = out_dir / "edits";
            fs::create_directories(edit_dir);
            save_mat(edit_dir / "input.ledt", input.image);

            Rng rng = Rng(cfg.seed).derive(0x45444954);
            nlohmann::json prov = nlohmann::json::array();
            for (int k = 0; k < edit_count; ++k) {
                const EditResult r = edit_one_shot(state, input.image, world, cfg, rng, mode, pc);
                save_mat(edit_dir / ("edit_" + std::to_string(k) + ".ledt"), r.image);
                nlohmann::json row;
                row["codes"] = r.prov.codes;
                row["sampled_code"] = r.prov.sampled_code.data;
                prov.push_back(row);
                std::string codes;
                for (const int c : r.prov.codes) codes += std::to_string(c) + " ";
                std::printf("edit %d codes: %s\n", k, codes.c_str());
            }
            write_text(edit_dir / "provenance.json", prov.dump(2) + "\n");
            std::printf("wrote %d edits of sample %d (category %d) to %s\n", edit_count, idx,
                        input.category, edit_dir.string().c_str());
            return 0;
        }

        if (ev->parsed()) {
            const PipelineData data = build_data(world, cfg);
            PipelineState state = load_state(state_dir, cfg, world);
            const InferenceMode mode = resolve_mode(eval_mode, cfg);
            const auto reports = run_eval(state, world, cfg, data, mode);
            const std::string csv = metrics_csv(reports, cfg);
            fs::create_directories(out_dir);
            write_text(out_dir / "metrics.csv", csv);
            std::fputs(csv.c_str(), stdout);
            return 0;
        }

        if (ab->parsed()) {
            const std::string csv = ablate_csv(cfg);
            fs::create_directories(out_dir);
            write_text(out_dir / "ablation.csv", csv);
            std::fputs(csv.c_str(), stdout);
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
