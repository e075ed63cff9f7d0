#include "dvforge/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

namespace dvf {

namespace {

template <typename T>
void write_raw(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const NamedTensors& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  os << kCheckpointMagic << '\n';
  write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
  std::uint64_t offset = 0;
  for (const auto& [name, t] : params) {
    write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(t.shape().size()));
    for (auto d : t.shape()) write_raw<std::uint64_t>(os, d);
    write_raw<std::uint64_t>(os, offset);
    offset += t.size();
  }
  for (const auto& [name, t] : params) {
    os.write(reinterpret_cast<const char*>(t.data().data()),
             static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

void load_checkpoint(const std::string& path, const NamedTensors& params) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  std::string magic;
  std::getline(is, magic);
  if (magic != kCheckpointMagic) {
    throw std::runtime_error("checkpoint: bad magic '" + magic + "' in " + path);
  }
  const auto count = read_raw<std::uint32_t>(is);

  struct Entry {
    std::vector<std::size_t> shape;
    std::uint64_t offset;
  };
  std::map<std::string, Entry> manifest;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = read_raw<std::uint32_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const auto ndim = read_raw<std::uint32_t>(is);
    Entry e;
    for (std::uint32_t d = 0; d < ndim; ++d) e.shape.push_back(read_raw<std::uint64_t>(is));
    e.offset = read_raw<std::uint64_t>(is);
    manifest[name] = std::move(e);
  }
  const auto payload_start = is.tellg();
  for (const auto& [name, t] : params) {
    auto it = manifest.find(name);
    if (it == manifest.end()) {
      throw std::runtime_error("checkpoint: missing tensor '" + name + "' in " + path);
    }
    if (it->second.shape != t.shape()) {
      throw std::runtime_error("checkpoint: shape mismatch for '" + name + "': file has " +
                               shape_str(it->second.shape) + ", expected " +
                               shape_str(t.shape()));
    }
    is.seekg(payload_start + static_cast<std::streamoff>(it->second.offset * sizeof(double)));
    Tensor mut = t;
    is.read(reinterpret_cast<char*>(mut.data().data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!is) throw std::runtime_error("checkpoint: truncated payload in " + path);
  }
}

}  // namespace dvf
