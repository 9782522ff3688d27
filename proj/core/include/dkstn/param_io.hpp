#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dkstn/tensor.hpp"

namespace dkstn {

struct NamedTensor {
  std::string name;
  Tensor value;
};

/// "DKW1" container: magic, u32 entry count, then per entry a u32-length
/// prefixed UTF-8 name, u32 rank, u32 extents and raw float64 values, all
/// little-endian. Used for checkpoints, harmonic fits and EOF bases.
void write_param_file(const std::filesystem::path& path, const std::vector<NamedTensor>& entries);
std::vector<NamedTensor> read_param_file(const std::filesystem::path& path);

std::string encode_params(const std::vector<NamedTensor>& entries);
std::vector<NamedTensor> decode_params(const std::string& bytes);

/// Lookup helper; throws ErrorKind::format when the entry is missing.
const Tensor& find_entry(const std::vector<NamedTensor>& entries, const std::string& name);
const Tensor* find_entry_opt(const std::vector<NamedTensor>& entries, const std::string& name);

}  // namespace dkstn
