#include <doctest.h>

#include <stdexcept>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "ledt/rng.hpp"
#include "ledt/tensor_io.hpp"

using namespace ledt;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* name) {
    return fs::temp_directory_path() / name;
}

std::vector<unsigned char> read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in),
                                      std::istreambuf_iterator<char>());
}

}  // namespace

TEST_SUITE("tensor_io") {

TEST_CASE("matrix round-trip is bit exact") {
    Rng rng(31);
    const Mat m = randn(rng, 7, 5);
    const fs::path p = temp_file("ledt_roundtrip.ledt");
    save_mat(p, m);
    const Mat back = load_mat(p);
    REQUIRE(back.rows == 7);
    REQUIRE(back.cols == 5);
    CHECK(std::memcmp(back.data.data(), m.data.data(), m.data.size() * sizeof(double)) == 0);
    fs::remove(p);
}

TEST_CASE("file header layout is frozen") {
    const Mat m = mat_from(1, 2, {1.0, 2.0});
    const fs::path p = temp_file("ledt_header.ledt");
    save_mat(p, m);
    const auto bytes = read_bytes(p);
    // magic, version u32, rank u32, two u64 dims, two f64 values
    REQUIRE(bytes.size() == 4 + 4 + 4 + 16 + 16);
    CHECK(bytes[0] == 'L');
    CHECK(bytes[1] == 'E');
    CHECK(bytes[2] == 'D');
    CHECK(bytes[3] == 'T');
    CHECK(bytes[4] == 1);  // version, little-endian
    CHECK(bytes[5] == 0);
    CHECK(bytes[8] == 2);  // rank
    CHECK(bytes[12] == 1);  // dim 0
    CHECK(bytes[20] == 2);  // dim 1
    // 1.0 as little-endian IEEE-754: 00 00 00 00 00 00 f0 3f
    CHECK(bytes[28 + 6] == 0xf0);
    CHECK(bytes[28 + 7] == 0x3f);
    fs::remove(p);
}

TEST_CASE("higher-rank tensors round-trip through the generic API") {
    Tensor t;
    t.dims = {2, 3, 2};
    t.data.resize(12);
    for (std::size_t i = 0; i < t.data.size(); ++i) t.data[i] = static_cast<double>(i) * 0.5;
    const fs::path p = temp_file("ledt_rank3.ledt");
    save_tensor(p, t);
    const Tensor back = load_tensor(p);
    CHECK(back.dims == t.dims);
    CHECK(back.data == t.data);
    fs::remove(p);
}

TEST_CASE("missing file raises") {
    CHECK_THROWS_AS(load_mat(temp_file("ledt_does_not_exist.ledt")), std::runtime_error);
}

TEST_CASE("bad magic raises") {
    const fs::path p = temp_file("ledt_badmagic.ledt");
    {
        std::ofstream out(p, std::ios::binary);
        out << "NOPE" << std::string(32, '\0');
    }
    CHECK_THROWS_AS(load_mat(p), std::runtime_error);
    fs::remove(p);
}

TEST_CASE("trailing bytes raise") {
    const Mat m = mat_from(1, 1, {3.0});
    const fs::path p = temp_file("ledt_trailing.ledt");
    save_mat(p, m);
    {
        std::ofstream out(p, std::ios::binary | std::ios::app);
        out << "x";
    }
    CHECK_THROWS_AS(load_mat(p), std::runtime_error);
    fs::remove(p);
}

TEST_CASE("truncated payload raises") {
    const Mat m = mat_from(2, 2, {1, 2, 3, 4});
    const fs::path p = temp_file("ledt_truncated.ledt");
    save_mat(p, m);
    const auto bytes = read_bytes(p);
    {
        std::ofstream out(p, std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size() - 8));
    }
    CHECK_THROWS_AS(load_mat(p), std::runtime_error);
    fs::remove(p);
}

TEST_CASE("non-finite values refuse to serialize") {
    Mat m(1, 1);
    m(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(save_mat(temp_file("ledt_nan.ledt"), m), std::runtime_error);
}

TEST_CASE("loading a rank-3 tensor as a matrix raises") {
    Tensor t;
    t.dims = {1, 1, 1};
    t.data = {1.0};
    const fs::path p = temp_file("ledt_rank_mismatch.ledt");
    save_tensor(p, t);
    CHECK_THROWS_AS(load_mat(p), std::runtime_error);
    fs::remove(p);
}

}  // TEST_SUITE
