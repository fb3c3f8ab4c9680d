#include "segdesic/param_store.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "segdesic/errors.hpp"

namespace segdesic {

namespace {

constexpr char kMagic[8] = {'S', 'D', 'N', 'C', 'K', 'P', 'T', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw IoError("checkpoint: truncated u32");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& out, double v) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw IoError("checkpoint: truncated f64");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

bool buffer_name(const std::string& name) {
    return name.find(".running_") != std::string::npos;
}

} // namespace

Variable& ParameterStore::add(const std::string& name, Tensor init, bool trainable) {
    if (entries_.count(name) != 0)
        throw ConfigError("parameter store: duplicate name '" + name + "'");
    auto [it, ok] = entries_.emplace(name, Variable(std::move(init), trainable, name));
    trainable_[name] = trainable;
    return it->second;
}

Variable& ParameterStore::at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end())
        throw ConfigError("parameter store: unknown name '" + name + "'");
    return it->second;
}

const Variable& ParameterStore::at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end())
        throw ConfigError("parameter store: unknown name '" + name + "'");
    return it->second;
}

bool ParameterStore::contains(const std::string& name) const {
    return entries_.count(name) != 0;
}

std::vector<std::string> ParameterStore::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [name, v] : entries_) out.push_back(name);
    return out;
}

std::vector<std::string> ParameterStore::trainable_names() const {
    std::vector<std::string> out;
    for (const auto& [name, flag] : trainable_)
        if (flag) out.push_back(name);
    return out;
}

bool ParameterStore::is_trainable(const std::string& name) const {
    auto it = trainable_.find(name);
    if (it == trainable_.end())
        throw ConfigError("parameter store: unknown name '" + name + "'");
    return it->second;
}

std::size_t ParameterStore::trainable_scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, flag] : trainable_)
        if (flag) n += entries_.at(name).value().numel();
    return n;
}

void ParameterStore::zero_grad() {
    for (auto& [name, v] : entries_)
        if (trainable_.at(name)) v.zero_grad();
}

ParameterStore ParameterStore::clone() const {
    ParameterStore out;
    for (const auto& [name, v] : entries_)
        out.add(name, v.value(), trainable_.at(name));
    return out;
}

void ParameterStore::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("checkpoint: cannot open '" + path.string() + "' for writing");
    out.write(kMagic, sizeof(kMagic));
    for (const auto& [name, v] : entries_) {
        const Tensor& t = v.value();
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(out, static_cast<std::uint32_t>(t.ndim()));
        for (int i = 0; i < t.ndim(); ++i) put_u32(out, static_cast<std::uint32_t>(t.dim(i)));
        for (std::size_t i = 0; i < t.numel(); ++i) put_f64(out, t[i]);
    }
    if (!out) throw IoError("checkpoint: write failed for '" + path.string() + "'");
}

ParameterStore ParameterStore::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checkpoint: cannot open '" + path.string() + "'");
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw IoError("checkpoint: bad magic in '" + path.string() + "'");

    ParameterStore store;
    while (true) {
        int peek = in.peek();
        if (peek == std::char_traits<char>::eof()) break;
        std::uint32_t name_len = get_u32(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in) throw IoError("checkpoint: truncated name");
        std::uint32_t rank = get_u32(in);
        std::vector<int> shape(rank);
        for (auto& d : shape) d = static_cast<int>(get_u32(in));
        Tensor t(shape);
        for (std::size_t i = 0; i < t.numel(); ++i) t[i] = get_f64(in);
        store.add(name, std::move(t), !buffer_name(name));
    }
    return store;
}

} // namespace segdesic
