#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ledt/mat.hpp"

namespace ledt {

// Binary tensor file: magic "LEDT", version u32, rank u32, dims as u64 each,
// then the payload as little-endian f64, row-major. One tensor per file.
inline constexpr std::uint32_t kTensorVersion = 1;

struct Tensor {
    std::vector<std::uint64_t> dims;
    std::vector<double> data;
};

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

void save_mat(const std::filesystem::path& path, const Mat& m);
Mat load_mat(const std::filesystem::path& path);

}  // namespace ledt
