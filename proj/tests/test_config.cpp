#include <doctest.h>

#include <stdexcept>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "ledt/config.hpp"

using namespace ledt;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path write_config(const json& j, const char* name) {
    const fs::path p = fs::temp_directory_path() / name;
    std::ofstream out(p);
    out << j.dump(2);
    return p;
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("defaults validate and hash to 16 hex digits") {
    const RunConfig cfg = default_config();
    CHECK_NOTHROW(validate_config(cfg));
    const std::string h = config_hash(cfg);
    CHECK(h.size() == 16);
    CHECK(h.find_first_not_of("0123456789abcdef") == std::string::npos);
}

TEST_CASE("round-trip through JSON preserves every field") {
    RunConfig cfg = default_config();
    cfg.seed = 12345;
    cfg.steps_stage1 = 321;
    cfg.world.noise_sigma = 0.125;
    cfg.with_psm = false;
    const RunConfig back = config_from_json(config_to_json(cfg));
    CHECK(config_to_json(back).dump() == config_to_json(cfg).dump());
    CHECK(config_hash(back) == config_hash(cfg));
}

TEST_CASE("the hash changes when a field changes") {
    RunConfig a = default_config();
    RunConfig b = a;
    b.beta = 0.5;
    CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("unknown top-level keys are rejected") {
    json j = config_to_json(default_config());
    j["not_a_field"] = 1;
    CHECK_THROWS_AS(config_from_json(j), std::invalid_argument);
}

TEST_CASE("unknown world keys are rejected") {
    json j = config_to_json(default_config());
    j["world"]["extra"] = 1;
    CHECK_THROWS_AS(config_from_json(j), std::invalid_argument);
}

TEST_CASE("omitted keys keep their defaults") {
    const json j = {{"seed", 5}};
    const RunConfig cfg = config_from_json(j);
    CHECK(cfg.seed == 5);
    CHECK(cfg.steps_stage1 == default_config().steps_stage1);
    CHECK(cfg.world.latent_layers == default_config().world.latent_layers);
}

TEST_CASE("the ablation flags must be consistent") {
    RunConfig both_true = default_config();
    both_true.clm_only = true;
    both_true.with_cpm = true;
    CHECK_THROWS_AS(validate_config(both_true), std::invalid_argument);

    RunConfig both_false = default_config();
    both_false.clm_only = false;
    both_false.with_cpm = false;
    both_false.with_psm = false;
    CHECK_THROWS_AS(validate_config(both_false), std::invalid_argument);

    RunConfig psm_without_cpm = default_config();
    psm_without_cpm.clm_only = true;
    psm_without_cpm.with_cpm = false;
    psm_without_cpm.with_psm = true;
    CHECK_THROWS_AS(validate_config(psm_without_cpm), std::invalid_argument);

    RunConfig clm = default_config();
    clm.clm_only = true;
    clm.with_cpm = false;
    clm.with_psm = false;
    CHECK_NOTHROW(validate_config(clm));
}

TEST_CASE("basic range checks fire") {
    RunConfig cfg = default_config();
    cfg.holdout_fraction = 1.0;
    CHECK_THROWS_AS(validate_config(cfg), std::invalid_argument);
    cfg = default_config();
    cfg.eval_fakes = 1;
    CHECK_THROWS_AS(validate_config(cfg), std::invalid_argument);
    cfg = default_config();
    cfg.codebook_size = 1;
    CHECK_THROWS_AS(validate_config(cfg), std::invalid_argument);
    cfg = default_config();
    cfg.world.image_dim = cfg.world.latent_layers * cfg.world.latent_dim - 1;
    CHECK_THROWS_AS(validate_config(cfg), std::invalid_argument);
}

TEST_CASE("load_config applies the LEDT_SEED override") {
    json j = config_to_json(default_config());
    j["seed"] = 1;
    const fs::path p = write_config(j, "ledt_cfg_seed.json");

    REQUIRE(setenv("LEDT_SEED", "424242", 1) == 0);
    const RunConfig cfg = load_config(p);
    CHECK(cfg.seed == 424242);

    REQUIRE(setenv("LEDT_SEED", "not_a_number", 1) == 0);
    CHECK_THROWS_AS(load_config(p), std::invalid_argument);

    REQUIRE(unsetenv("LEDT_SEED") == 0);
    const RunConfig plain = load_config(p);
    CHECK(plain.seed == 1);
    fs::remove(p);
}

TEST_CASE("a malformed file reports a parse error") {
    const fs::path p = fs::temp_directory_path() / "ledt_cfg_bad.json";
    {
        std::ofstream out(p);
        out << "{ not json";
    }
    CHECK_THROWS_AS(load_config(p), std::runtime_error);
    fs::remove(p);
    CHECK_THROWS_AS(load_config(p), std::runtime_error);  // missing file
}

}  // TEST_SUITE
