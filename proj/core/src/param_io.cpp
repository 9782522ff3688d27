#include "dkstn/param_io.hpp"

#include <fstream>
#include <iterator>

#include "dkstn/binary_io.hpp"
#include "dkstn/error.hpp"

namespace dkstn {

namespace binary {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open '" + path + "' for reading");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::io, "write to '" + path + "' failed");
}

}  // namespace binary

namespace {
constexpr char kMagic[4] = {'D', 'K', 'W', '1'};
}

std::string encode_params(const std::vector<NamedTensor>& entries) {
  std::string out(kMagic, 4);
  binary::put_le(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    require(e.value.rank() >= 1, ErrorKind::dimension, "entry '" + e.name + "' has rank 0");
    binary::put_string(out, e.name);
    binary::put_le(out, static_cast<std::uint32_t>(e.value.rank()));
    for (auto extent : e.value.shape()) binary::put_le(out, static_cast<std::uint32_t>(extent));
    for (double v : e.value.data()) binary::put_f64(out, v);
  }
  return out;
}

std::vector<NamedTensor> decode_params(const std::string& bytes) {
  binary::Reader in(bytes);
  if (bytes.size() < 4 || bytes.compare(0, 4, kMagic, 4) != 0)
    fail(ErrorKind::format, "bad magic: not a DKW1 parameter container");
  in.get_raw(4, "magic");
  const auto count = in.get<std::uint32_t>("entry count");
  std::vector<NamedTensor> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor e;
    e.name = in.get_string("entry name");
    const auto rank = in.get<std::uint32_t>("rank");
    if (rank == 0 || rank > 16) fail(ErrorKind::format, "entry '" + e.name + "' has invalid rank");
    Shape shape(rank);
    std::size_t count_values = 1;
    for (auto& extent : shape) {
      extent = in.get<std::uint32_t>("extent");
      if (extent == 0) fail(ErrorKind::format, "entry '" + e.name + "' has a zero extent");
      count_values *= extent;
    }
    in.need(count_values * 8, "tensor payload");
    std::vector<double> data(count_values);
    for (auto& v : data) v = in.get_f64("tensor payload");
    e.value = Tensor(std::move(shape), std::move(data));
    entries.push_back(std::move(e));
  }
  if (in.remaining() != 0)
    fail(ErrorKind::format, std::to_string(in.remaining()) + " trailing bytes after last entry");
  return entries;
}

void write_param_file(const std::filesystem::path& path, const std::vector<NamedTensor>& entries) {
  binary::write_file(path.string(), encode_params(entries));
}

std::vector<NamedTensor> read_param_file(const std::filesystem::path& path) {
  return decode_params(binary::read_file(path.string()));
}

const Tensor* find_entry_opt(const std::vector<NamedTensor>& entries, const std::string& name) {
  for (const auto& e : entries)
    if (e.name == name) return &e.value;
  return nullptr;
}

const Tensor& find_entry(const std::vector<NamedTensor>& entries, const std::string& name) {
  const Tensor* t = find_entry_opt(entries, name);
  if (!t) fail(ErrorKind::format, "missing entry '" + name + "'");
  return *t;
}

}  // namespace dkstn
