#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "segdesic/autodiff.hpp"

namespace segdesic {

/// Named trainable arrays plus non-trainable buffers (running statistics),
/// iterated in lexicographic name order so checkpoints and optimizer walks
/// are stable across runs.
class ParameterStore {
public:
    Variable& add(const std::string& name, Tensor init, bool trainable);
    Variable& at(const std::string& name);
    const Variable& at(const std::string& name) const;
    bool contains(const std::string& name) const;

    std::vector<std::string> names() const;
    std::vector<std::string> trainable_names() const;
    bool is_trainable(const std::string& name) const;

    std::size_t size() const { return entries_.size(); }
    std::size_t trainable_scalar_count() const;

    void zero_grad();

    /// Deep copy; graph history is not carried over.
    ParameterStore clone() const;

    /// Flat binary checkpoint: magic "SDNCKPT1", then per entry
    /// u32 name length (LE), UTF-8 name, u32 rank, u32 dims, raw f64 LE data.
    /// Entries appear in name order; round trips are bit-exact.
    void save(const std::filesystem::path& path) const;

    /// Buffers are recognized by the ".running_" name convention; everything
    /// else loads as trainable.
    static ParameterStore load(const std::filesystem::path& path);

private:
    std::map<std::string, Variable> entries_;
    std::map<std::string, bool> trainable_;
};

} // namespace segdesic
