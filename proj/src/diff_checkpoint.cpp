#include "airtraj/diff/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace airtraj::diff {

namespace {

constexpr char kMagic[8] = {'A', 'T', 'C', 'K', 'P', 'T', '0', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t get_u64(std::istream& in) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    if (!in) throw std::runtime_error("truncated checkpoint");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

void put_string(std::ostream& out, const std::string& s) {
    put_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
    const std::uint64_t len = get_u64(in);
    if (len > (1ull << 30)) throw std::runtime_error("corrupt checkpoint string length");
    std::string s(len, '\0');
    in.read(s.data(), static_cast<std::streamsize>(len));
    if (!in) throw std::runtime_error("truncated checkpoint");
    return s;
}

void put_doubles(std::ostream& out, std::span<const double> v) {
    for (double d : v) {
        std::uint64_t bits;
        std::memcpy(&bits, &d, 8);
        put_u64(out, bits);
    }
}

} // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    if (ckpt.names.size() != ckpt.arrays.size())
        throw std::runtime_error("checkpoint name/array count mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);

    out.write(kMagic, 8);
    put_u64(out, ckpt.meta.size());
    for (const auto& [k, v] : ckpt.meta) {
        put_string(out, k);
        put_string(out, v);
    }
    put_u64(out, ckpt.names.size());
    for (std::size_t i = 0; i < ckpt.names.size(); ++i) {
        put_string(out, ckpt.names[i]);
        const auto& shape = ckpt.arrays[i].shape();
        put_u64(out, shape.size());
        for (int d : shape) put_u64(out, static_cast<std::uint64_t>(d));
        put_doubles(out, ckpt.arrays[i].values());
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);

    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("not a checkpoint file (bad magic): " + path);

    Checkpoint ckpt;
    const std::uint64_t n_meta = get_u64(in);
    for (std::uint64_t i = 0; i < n_meta; ++i) {
        std::string k = get_string(in);
        ckpt.meta[k] = get_string(in);
    }
    const std::uint64_t n_params = get_u64(in);
    for (std::uint64_t i = 0; i < n_params; ++i) {
        ckpt.names.push_back(get_string(in));
        const std::uint64_t rank = get_u64(in);
        Shape shape;
        for (std::uint64_t r = 0; r < rank; ++r)
            shape.push_back(static_cast<int>(get_u64(in)));
        std::vector<double> values(numel(shape));
        for (auto& d : values) {
            const std::uint64_t bits = get_u64(in);
            std::memcpy(&d, &bits, 8);
        }
        ckpt.arrays.push_back(Array::from(std::move(shape), std::move(values), true));
    }
    return ckpt;
}

} // namespace airtraj::diff
