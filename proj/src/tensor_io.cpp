#include "locref/tensor_io.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace locref {

namespace {

constexpr char kMagic[4] = {'L', 'R', 'T', 'A'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kTypeF64 = 0;
constexpr std::uint8_t kTypeU64 = 1;

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("tensor archive: truncated stream");
  return v;
}

void put_string(std::ostream& os, const std::string& s) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is) {
  const auto n = get<std::uint32_t>(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw std::runtime_error("tensor archive: truncated name");
  return s;
}

}  // namespace

void write_tensor_archive(std::ostream& os, const TensorArchive& a) {
  os.write(kMagic, 4);
  put<std::uint32_t>(os, kVersion);
  put<std::uint64_t>(os, a.tensors.size() + a.scalars.size());
  for (const auto& [name, t] : a.tensors) {
    put_string(os, name);
    put<std::uint8_t>(os, kTypeF64);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (int i = 0; i < t.rank(); ++i) put<std::int32_t>(os, t.dim(i));
    os.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.numel() * sizeof(double)));
  }
  for (const auto& [name, v] : a.scalars) {
    put_string(os, name);
    put<std::uint8_t>(os, kTypeU64);
    put<std::uint64_t>(os, v);
  }
  if (!os) throw std::runtime_error("tensor archive: write failed");
}

TensorArchive read_tensor_archive(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("tensor archive: bad magic");
  const auto version = get<std::uint32_t>(is);
  if (version != kVersion) throw std::runtime_error("tensor archive: unsupported version " + std::to_string(version));
  const auto count = get<std::uint64_t>(is);
  TensorArchive a;
  for (std::uint64_t e = 0; e < count; ++e) {
    const std::string name = get_string(is);
    const auto type = get<std::uint8_t>(is);
    if (type == kTypeF64) {
      const auto rank = get<std::uint32_t>(is);
      std::vector<int> dims(rank);
      for (auto& d : dims) d = get<std::int32_t>(is);
      Tensor t(dims);
      is.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.numel() * sizeof(double)));
      if (!is) throw std::runtime_error("tensor archive: truncated tensor " + name);
      a.tensors.emplace(name, std::move(t));
    } else if (type == kTypeU64) {
      a.scalars.emplace(name, get<std::uint64_t>(is));
    } else {
      throw std::runtime_error("tensor archive: unknown entry type");
    }
  }
  return a;
}

void write_tensor_archive(const std::string& path, const TensorArchive& a) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot create " + path);
  write_tensor_archive(os, a);
}

TensorArchive read_tensor_archive(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_tensor_archive(is);
}

}  // namespace locref
