#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "groupseg/tensor.hpp"

namespace groupseg {

// Binary snapshot of named tensors plus training cursor state. Records are
// written sorted by name so the file is a canonical function of its
// contents: save, load, save again yields identical bytes.
struct Checkpoint {
    std::uint32_t version = 1;
    std::uint64_t step = 0;
    std::array<std::uint64_t, 4> rng_state{};
    struct Record {
        Shape shape;
        std::vector<double> data;
    };
    std::map<std::string, Record> tensors;

    void put(const std::string& name, const Shape& shape, const std::vector<double>& data);
    const Record& get(const std::string& name) const;  // data_error when missing
    bool has(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace groupseg
