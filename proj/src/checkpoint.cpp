#include "inpaint/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "inpaint/errors.hpp"

namespace inpaint {

namespace {

constexpr char kMagic[8] = {'I', 'N', 'P', 'C', 'K', 'P', 'T', '\0'};

template <class T>
void put(std::ostream& out, T v) {
  static_assert(std::endian::native == std::endian::little);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw LoadError("checkpoint '" + path.string() + "' is truncated");
  }
  return v;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data,
                      std::uint32_t version) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  // Write beside the target and rename, so a crash never leaves a torn file.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint '" + path.string() + "'");
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, version);
    const std::string header = data.header.dump();
    put<std::uint64_t>(out, header.size());
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(data.tensors.size()));
    for (const auto& [name, t] : data.tensors) {
      put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      const Shape s = t.shape();
      for (int d : {s.n, s.c, s.h, s.w}) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
      out.write(reinterpret_cast<const char*>(t.data()),
                static_cast<std::streamsize>(t.size() * sizeof(Scalar)));
    }
    if (!out) throw Error("failed writing checkpoint '" + path.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint '" + path.string() + "'");
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw LoadError("'" + path.string() + "' is not a checkpoint file");
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw VersionError("checkpoint '" + path.string() + "' has format version " +
                       std::to_string(version) + ", this build reads version " +
                       std::to_string(kCheckpointVersion));
  }
  CheckpointData data;
  const auto header_len = get<std::uint64_t>(in, path);
  if (header_len > (1u << 30)) throw LoadError("checkpoint '" + path.string() + "' is corrupt");
  std::string header(header_len, '\0');
  if (!in.read(header.data(), static_cast<std::streamsize>(header_len))) {
    throw LoadError("checkpoint '" + path.string() + "' is truncated");
  }
  try {
    data.header = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("checkpoint '" + path.string() + "' has a corrupt header: " + e.what());
  }
  const auto count = get<std::uint32_t>(in, path);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get<std::uint32_t>(in, path);
    if (len > 4096) throw LoadError("checkpoint '" + path.string() + "' is corrupt");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw LoadError("checkpoint '" + path.string() + "' is truncated");
    std::array<std::uint32_t, 4> d{};
    for (auto& v : d) v = get<std::uint32_t>(in, path);
    const std::uint64_t size = std::uint64_t{d[0]} * d[1] * d[2] * d[3];
    if (size == 0 || size > (1ull << 31)) throw LoadError("checkpoint '" + path.string() + "' is corrupt");
    Tensor t(Shape{static_cast<int>(d[0]), static_cast<int>(d[1]), static_cast<int>(d[2]),
                   static_cast<int>(d[3])});
    if (!in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(size * sizeof(Scalar)))) {
      throw LoadError("checkpoint '" + path.string() + "' is truncated");
    }
    data.tensors.emplace(std::move(name), std::move(t));
  }
  return data;
}

void store_state(CheckpointData& data, const std::string& prefix,
                 const std::vector<NamedVar>& state) {
  for (const auto& nv : state) data.tensors[prefix + "/" + nv.name] = nv.var.value();
}

void restore_state(const CheckpointData& data, const std::string& prefix,
                   const std::vector<NamedVar>& state) {
  for (const auto& nv : state) {
    const std::string key = prefix + "/" + nv.name;
    const auto it = data.tensors.find(key);
    if (it == data.tensors.end()) throw LoadError("checkpoint is missing tensor '" + key + "'");
    if (it->second.shape() != nv.var.shape()) {
      throw LoadError("checkpoint tensor '" + key + "' has shape " + it->second.shape().str() +
                      ", model expects " + nv.var.shape().str());
    }
    Var handle = nv.var;
    handle.mutable_value() = it->second;
  }
}

Generator load_generator(const CheckpointData& data) {
  if (!data.header.contains("generator")) throw LoadError("checkpoint has no generator spec");
  GeneratorSpec spec;
  try {
    spec = data.header["generator"].get<GeneratorSpec>();
  } catch (const ConfigError& e) {
    throw LoadError(std::string("checkpoint generator spec is invalid: /generator") + e.what());
  }
  Generator g(spec, 0);
  restore_state(data, "G", g.state());
  return g;
}

Generator load_generator(const std::filesystem::path& path) {
  return load_generator(read_checkpoint(path));
}

}  // namespace inpaint
