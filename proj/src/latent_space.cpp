#include "ledt/latent_space.hpp"

#include <fstream>
#include <span>
#include <stdexcept>

#include <json.hpp>

#include "ledt/tensor_io.hpp"

namespace ledt {

namespace {

Mat pairwise_sum(std::span<const LatentCode> s) {
    if (s.size() == 1) return s[0];
    const std::size_t mid = s.size() / 2;
    return add(pairwise_sum(s.subspan(0, mid)), pairwise_sum(s.subspan(mid)));
}

}  // namespace

CategoryStats class_mean(const std::vector<LatentCode>& samples, int category_id) {
    if (samples.empty()) throw std::invalid_argument("class_mean: empty sample list");
    for (const LatentCode& s : samples)
        require_same_shape(s, samples.front(), "class_mean");
    CategoryStats stats;
    stats.category_id = category_id;
    stats.sample_count = static_cast<long>(samples.size());
    stats.mean = scale(pairwise_sum(samples), 1.0 / static_cast<double>(samples.size()));
    return stats;
}

LatentCode factorize(const LatentCode& w, const CategoryStats& stats) {
    require_same_shape(w, stats.mean, "factorize");
    return sub(w, stats.mean);
}

LatentCode recompose(const LatentCode& delta, const CategoryStats& stats) {
    require_same_shape(delta, stats.mean, "recompose");
    return add(delta, stats.mean);
}

void save_stats(const std::filesystem::path& base, const CategoryStats& stats) {
    save_mat(base.string() + ".ledt", stats.mean);
    nlohmann::json j;
    j["category_id"] = stats.category_id;
    j["sample_count"] = stats.sample_count;
    std::ofstream os(base.string() + ".json");
    if (!os) throw std::runtime_error("save_stats: cannot open sidecar");
    os << j.dump(2) << "\n";
}

CategoryStats load_stats(const std::filesystem::path& base) {
    CategoryStats stats;
    stats.mean = load_mat(base.string() + ".ledt");
    std::ifstream is(base.string() + ".json");
    if (!is) throw std::runtime_error("load_stats: cannot open sidecar");
    nlohmann::json j = nlohmann::json::parse(is);
    stats.category_id = j.at("category_id").get<int>();
    stats.sample_count = j.at("sample_count").get<long>();
    return stats;
}

}  // namespace ledt
