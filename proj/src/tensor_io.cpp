#include "ledt/tensor_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ledt {

namespace {

constexpr char kMagic[4] = {'L', 'E', 'D', 'T'};

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("tensor load: truncated file");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw std::runtime_error("tensor load: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

}  // namespace

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
    std::uint64_t count = 1;
    for (std::uint64_t d : t.dims) count *= d;
    if (count != t.data.size()) throw std::invalid_argument("tensor save: dims do not match payload");
    for (double v : t.data)
        if (!std::isfinite(v)) throw std::runtime_error("tensor save: non-finite payload");

    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("tensor save: cannot open " + path.string());
    os.write(kMagic, 4);
    put_u32(os, kTensorVersion);
    put_u32(os, static_cast<std::uint32_t>(t.dims.size()));
    for (std::uint64_t d : t.dims) put_u64(os, d);
    for (double v : t.data) put_u64(os, std::bit_cast<std::uint64_t>(v));
    if (!os) throw std::runtime_error("tensor save: write failed for " + path.string());
}

Tensor load_tensor(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("tensor load: cannot open " + path.string());
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("tensor load: bad magic in " + path.string());
    const std::uint32_t version = get_u32(is);
    if (version != kTensorVersion) throw std::runtime_error("tensor load: unsupported version");
    const std::uint32_t rank = get_u32(is);
    if (rank > 8) throw std::runtime_error("tensor load: rank too large");

    Tensor t;
    std::uint64_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        const std::uint64_t d = get_u64(is);
        t.dims.push_back(d);
        count *= d;
    }
    if (count > (1ull << 32)) throw std::runtime_error("tensor load: implausible element count");
    t.data.resize(count);
    for (std::uint64_t i = 0; i < count; ++i)
        t.data[i] = std::bit_cast<double>(get_u64(is));
    is.peek();
    if (!is.eof()) throw std::runtime_error("tensor load: trailing bytes in " + path.string());
    for (double v : t.data)
        if (!std::isfinite(v)) throw std::runtime_error("tensor load: non-finite payload");
    return t;
}

void save_mat(const std::filesystem::path& path, const Mat& m) {
    Tensor t;
    t.dims = {static_cast<std::uint64_t>(m.rows), static_cast<std::uint64_t>(m.cols)};
    t.data = m.data;
    save_tensor(path, t);
}

Mat load_mat(const std::filesystem::path& path) {
    const Tensor t = load_tensor(path);
    if (t.dims.size() != 2) throw std::runtime_error("tensor load: expected rank 2 in " + path.string());
    Mat m(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]));
    m.data = t.data;
    return m;
}

}  // namespace ledt
