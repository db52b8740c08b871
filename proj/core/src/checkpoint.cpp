#include "morphrl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace morphrl {

namespace {

constexpr char kMagic[4] = {'U', 'R', 'M', '2'};
constexpr std::uint32_t kMaxNameLength = 4096;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const char* what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error(std::string("checkpoint: truncated while reading ") + what);
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParamStore& store) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot open for writing: " + path.string());

  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kCheckpointVersion);
  write_pod(out, static_cast<std::uint64_t>(store.size()));

  std::uint64_t offset = 0;
  for (int i = 0; i < store.size(); ++i) {
    const ParamStore::Entry& e = store.entry(i);
    write_pod(out, static_cast<std::uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    write_pod(out, static_cast<std::uint64_t>(e.value.rows()));
    write_pod(out, static_cast<std::uint64_t>(e.value.cols()));
    write_pod(out, offset);
    offset += static_cast<std::uint64_t>(e.value.size()) * sizeof(double);
  }
  for (int i = 0; i < store.size(); ++i) {
    const Mat& v = store.entry(i).value;
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  out.flush();
  if (!out) throw std::runtime_error("checkpoint: write failed: " + path.string());
}

ParamStore load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open: " + path.string());

  char magic[4];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path.string());
  }
  const auto version = read_pod<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto count = read_pod<std::uint64_t>(in, "tensor count");

  struct Entry {
    std::string name;
    std::uint64_t rows, cols, offset;
  };
  std::vector<Entry> manifest;
  manifest.reserve(count);
  std::uint64_t expected_offset = 0;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<std::uint32_t>(in, "name length");
    if (name_len == 0 || name_len > kMaxNameLength) {
      throw std::runtime_error("checkpoint: implausible tensor name length");
    }
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw std::runtime_error("checkpoint: truncated tensor name");
    Entry e;
    e.name = std::move(name);
    e.rows = read_pod<std::uint64_t>(in, "rows");
    e.cols = read_pod<std::uint64_t>(in, "cols");
    e.offset = read_pod<std::uint64_t>(in, "offset");
    if (e.rows == 0 || e.cols == 0 || e.rows > (1u << 24) || e.cols > (1u << 24)) {
      throw std::runtime_error("checkpoint: implausible shape for tensor " + e.name);
    }
    if (e.offset != expected_offset) {
      throw std::runtime_error("checkpoint: non-contiguous data offset for tensor " + e.name);
    }
    expected_offset += e.rows * e.cols * sizeof(double);
    manifest.push_back(std::move(e));
  }

  ParamStore store;
  for (const Entry& e : manifest) {
    const int id = store.add(e.name, static_cast<int>(e.rows), static_cast<int>(e.cols));
    Mat& v = store.value(id);
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint: truncated data for tensor " + e.name);
  }
  return store;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace morphrl
