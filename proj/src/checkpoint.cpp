#include "conceptseg/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace conceptseg {

namespace {

constexpr char kMagic[8] = {'C', 'S', 'E', 'G', 'P', 'R', 'M', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("checkpoint: truncated file");
  return v;
}

}  // namespace

void save_checkpoint(const ParamStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("checkpoint: cannot open " + path + " for writing");
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kVersion);
  write_pod<std::int32_t>(out, -1);  // reserved backbone layer index
  write_pod<std::uint64_t>(out, store.items.size());
  for (const auto& [name, t] : store.items) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<std::uint64_t>(out, t.rows);
    write_pod<std::uint64_t>(out, t.cols);
    write_pod<std::uint8_t>(out, t.requires_grad ? 1 : 0);
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  }
  if (!out) throw IoError("checkpoint: write failed for " + path);
}

ParamStore load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("checkpoint: bad magic in " + path);
  const std::uint32_t version = read_pod<std::uint32_t>(in);
  if (version != kVersion)
    throw IoError("checkpoint: unsupported version " + std::to_string(version));
  read_pod<std::int32_t>(in);  // reserved layer index
  const std::uint64_t count = read_pod<std::uint64_t>(in);

  ParamStore store;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = read_pod<std::uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const std::uint64_t rows = read_pod<std::uint64_t>(in);
    const std::uint64_t cols = read_pod<std::uint64_t>(in);
    const std::uint8_t grad = read_pod<std::uint8_t>(in);
    Tensor t(rows, cols);
    t.requires_grad = grad != 0;
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!in) throw IoError("checkpoint: truncated tensor " + name);
    store.add(name, std::move(t));
  }
  return store;
}

void check_compatible(const ParamStore& loaded, const ParamStore& expected) {
  for (const auto& [name, t] : expected.items) {
    if (!loaded.has(name)) throw ConfigError("checkpoint is missing tensor " + name);
    const Tensor& l = loaded.at(name);
    if (l.rows != t.rows || l.cols != t.cols)
      throw ConfigError("checkpoint tensor " + name + " has shape " + l.shape_str() +
                        ", config expects " + t.shape_str());
  }
}

}  // namespace conceptseg
