#include "surgfutr/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace surgfutr {

namespace {

constexpr char kMagic[4] = {'S', 'F', 'T', 'R'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw TensorError("truncated checkpoint");
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamMap& params) {
  std::ostringstream os(std::ios::binary);
  os.write(kMagic, 4);
  write_pod<std::uint32_t>(os, kCheckpointVersion);
  write_pod<std::uint64_t>(os, params.size());
  for (const auto& [name, t] : params) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(t.shape().size()));
    for (auto d : t.shape()) write_pod<std::uint64_t>(os, d);
    os.write(reinterpret_cast<const char*>(t.data().data()),
             static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  atomic_write_file(path, os.str());
}

ParamMap load_checkpoint(const std::string& path, bool requires_grad) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw TensorError("cannot open checkpoint: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw TensorError("bad checkpoint magic: " + path);
  const auto version = read_pod<std::uint32_t>(is);
  if (version != kCheckpointVersion) throw TensorError("unsupported checkpoint version");
  const auto count = read_pod<std::uint64_t>(is);
  ParamMap params;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<std::uint32_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const auto rank = read_pod<std::uint32_t>(is);
    Shape shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = static_cast<std::size_t>(read_pod<std::uint64_t>(is));
      n *= d;
    }
    std::vector<double> data(n);
    is.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) throw TensorError("truncated checkpoint: " + path);
    params.emplace(std::move(name), Tensor::from_data(shape, std::move(data), requires_grad));
  }
  return params;
}

void atomic_write_file(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw TensorError("cannot write file: " + tmp.string());
    os.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  }
  fs::rename(tmp, target);
}

}  // namespace surgfutr
