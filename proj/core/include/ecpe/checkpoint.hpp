#pragma once

// Binary container of named real arrays plus a JSON config block.
// Layout (little-endian):
//   "ECPECKPT" | u32 version | u64 config_len | config bytes |
//   u64 count | count x (u64 name_len | name | u64 rows | u64 cols | rows*cols f64, column-major)

#include "ecpe/tensor.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace ecpe {

struct NamedArray {
    std::string name;
    Matrix value;
};

struct Checkpoint {
    nlohmann::json config = nlohmann::json::object();
    std::vector<NamedArray> arrays;

    const Matrix& at(const std::string& name) const;
    const Matrix* find(const std::string& name) const;
    void add(std::string name, Matrix value);

    // Copies every array named like a parameter into it; shapes must match.
    void restore(const ParameterList& params) const;
    void store(const ParameterList& params);
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace ecpe
