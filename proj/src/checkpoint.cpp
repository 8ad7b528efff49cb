#include "fedproto/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace fedproto {

namespace {

constexpr char kMagic[4] = {'F', 'P', 'S', 'V'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void write_pod(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
bool read_pod(std::istream& is, T& value) {
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  return static_cast<bool>(is);
}

void write_string(std::ostream& os, const std::string& s) {
  write_pod(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

bool read_string(std::istream& is, std::string& s) {
  std::uint32_t len = 0;
  if (!read_pod(is, len)) return false;
  s.resize(len);
  is.read(s.data(), static_cast<std::streamsize>(len));
  return static_cast<bool>(is);
}

void write_doubles(std::ostream& os, std::span<const double> data) {
  os.write(reinterpret_cast<const char*>(data.data()),
           static_cast<std::streamsize>(data.size() * sizeof(double)));
}

bool read_doubles(std::istream& is, std::vector<double>& data,
                  std::uint64_t count) {
  data.resize(count);
  is.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  return static_cast<bool>(is);
}

}  // namespace

void write_checkpoint(const std::string& path, const CheckpointFile& file) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open checkpoint file: " + path);
  os.write(kMagic, sizeof(kMagic));
  write_pod(os, kCheckpointVersion);
  const Layout& layout = file.params.layout();
  write_pod(os, static_cast<std::uint32_t>(layout.size()));
  for (const auto& seg : layout) {
    write_string(os, seg.name);
    write_pod(os, static_cast<std::uint64_t>(seg.length));
  }
  write_doubles(os, file.params.values());
  for (const auto& rec : file.extra) {
    write_string(os, rec.name);
    write_pod(os, static_cast<std::uint64_t>(rec.data.size()));
    write_doubles(os, rec.data);
  }
  if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

CheckpointFile read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint file: " + path);
  char magic[4];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("bad checkpoint magic: " + path);
  }
  std::uint16_t version = 0;
  if (!read_pod(is, version) || version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version: " + path);
  }
  std::uint32_t n_segments = 0;
  if (!read_pod(is, n_segments)) {
    throw std::runtime_error("truncated checkpoint: " + path);
  }
  Layout layout;
  layout.reserve(n_segments);
  for (std::uint32_t i = 0; i < n_segments; ++i) {
    Segment seg;
    std::uint64_t length = 0;
    if (!read_string(is, seg.name) || !read_pod(is, length)) {
      throw std::runtime_error("truncated checkpoint segment table: " + path);
    }
    seg.length = static_cast<std::size_t>(length);
    layout.push_back(std::move(seg));
  }
  std::vector<double> values;
  if (!read_doubles(is, values, layout_size(layout))) {
    throw std::runtime_error("truncated checkpoint values: " + path);
  }
  CheckpointFile file{ParamVector(std::move(layout), std::move(values)), {}};
  while (true) {
    CheckpointRecord rec;
    if (!read_string(is, rec.name)) break;  // clean EOF
    std::uint64_t count = 0;
    if (!read_pod(is, count) || !read_doubles(is, rec.data, count)) {
      throw std::runtime_error("truncated checkpoint record: " + path);
    }
    file.extra.push_back(std::move(rec));
  }
  return file;
}

}  // namespace fedproto
