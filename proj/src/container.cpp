#include "ssa2d/container.hpp"

#include <cstring>
#include <fstream>
#include <set>

namespace ssa2d {

namespace {

constexpr char kMagic[4] = {'S', 'T', 'C', '1'};
constexpr int kMaxRank = 8;

std::size_t dtype_size(ContainerTensor::DType dt) {
  switch (dt) {
    case ContainerTensor::DType::F32:
      return 4;
    case ContainerTensor::DType::I32:
      return 4;
    case ContainerTensor::DType::U8:
      return 1;
  }
  return 0;
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
  const std::uint8_t* p;
  std::size_t size;
  std::size_t pos = 0;

  void need(std::size_t n, const char* what) const {
    if (pos + n > size) throw FormatError(std::string("truncated file while reading ") + what, pos);
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return p[pos++];
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    std::uint16_t v = static_cast<std::uint16_t>(p[pos]) |
                      (static_cast<std::uint16_t>(p[pos + 1]) << 8);
    pos += 2;
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
};

template <class T>
void le_payload_to_vec(const std::uint8_t* src, std::size_t count, std::vector<T>& out) {
  out.resize(count);
  // little-endian host assumed for the fixed-width payload copy
  std::memcpy(out.data(), src, count * sizeof(T));
}

}  // namespace

ContainerTensor ContainerTensor::make_f32(std::string name, std::vector<std::int64_t> dims,
                                          std::vector<float> data) {
  ContainerTensor t;
  t.name = std::move(name);
  t.dtype = DType::F32;
  t.dims = std::move(dims);
  t.f32 = std::move(data);
  return t;
}

ContainerTensor ContainerTensor::make_i32(std::string name, std::vector<std::int64_t> dims,
                                          std::vector<std::int32_t> data) {
  ContainerTensor t;
  t.name = std::move(name);
  t.dtype = DType::I32;
  t.dims = std::move(dims);
  t.i32 = std::move(data);
  return t;
}

ContainerTensor ContainerTensor::make_u8(std::string name, std::vector<std::int64_t> dims,
                                         std::vector<std::uint8_t> data) {
  ContainerTensor t;
  t.name = std::move(name);
  t.dtype = DType::U8;
  t.dims = std::move(dims);
  t.u8 = std::move(data);
  return t;
}

void write_container(const std::string& path, const std::vector<ContainerTensor>& tensors) {
  std::set<std::string> seen;
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    if (t.name.empty()) throw std::runtime_error("write_container: empty tensor name");
    if (!seen.insert(t.name).second)
      throw std::runtime_error("write_container: duplicate tensor name '" + t.name + "'");
    if (t.name.size() > 0xffff) throw std::runtime_error("write_container: name too long");
    if (t.dims.size() > kMaxRank) throw std::runtime_error("write_container: rank overflow");
    put_u16(out, static_cast<std::uint16_t>(t.name.size()));
    out.append(t.name);
    out.push_back(static_cast<char>(t.dtype));
    out.push_back(static_cast<char>(t.dims.size()));
    for (auto d : t.dims) {
      if (d < 0) throw std::runtime_error("write_container: negative dim");
      put_u64(out, static_cast<std::uint64_t>(d));
    }
    const std::size_t count = static_cast<std::size_t>(t.numel());
    const char* payload = nullptr;
    std::size_t bytes = count * dtype_size(t.dtype);
    switch (t.dtype) {
      case ContainerTensor::DType::F32:
        if (t.f32.size() != count) throw std::runtime_error("write_container: f32 size/dims mismatch");
        payload = reinterpret_cast<const char*>(t.f32.data());
        break;
      case ContainerTensor::DType::I32:
        if (t.i32.size() != count) throw std::runtime_error("write_container: i32 size/dims mismatch");
        payload = reinterpret_cast<const char*>(t.i32.data());
        break;
      case ContainerTensor::DType::U8:
        if (t.u8.size() != count) throw std::runtime_error("write_container: u8 size/dims mismatch");
        payload = reinterpret_cast<const char*>(t.u8.data());
        break;
    }
    out.append(payload, bytes);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("write_container: cannot open " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("write_container: write failed for " + path);
}

std::vector<ContainerTensor> read_container(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_container: cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r{reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()};

  r.need(4, "magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("bad magic", 0);
  r.pos = 4;
  const std::uint32_t count = r.u32("tensor count");

  std::vector<ContainerTensor> out;
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    ContainerTensor t;
    const std::uint16_t name_len = r.u16("name length");
    if (name_len == 0) throw FormatError("empty tensor name", r.pos - 2);
    r.need(name_len, "name");
    t.name.assign(reinterpret_cast<const char*>(r.p + r.pos), name_len);
    r.pos += name_len;
    if (!seen.insert(t.name).second) throw FormatError("duplicate tensor name", r.pos);

    const std::uint8_t dt = r.u8("dtype");
    if (dt > 2) throw FormatError("unknown dtype " + std::to_string(dt), r.pos - 1);
    t.dtype = static_cast<ContainerTensor::DType>(dt);
    const std::uint8_t rank = r.u8("rank");
    if (rank > kMaxRank) throw FormatError("rank overflow " + std::to_string(rank), r.pos - 1);

    std::uint64_t count64 = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      const std::uint64_t dim = r.u64("dim");
      if (dim > (1ull << 40)) throw FormatError("dim overflow", r.pos - 8);
      t.dims.push_back(static_cast<std::int64_t>(dim));
      if (dim != 0 && count64 > (1ull << 40) / dim) throw FormatError("element count overflow", r.pos - 8);
      count64 *= dim;
    }
    const std::size_t payload = static_cast<std::size_t>(count64) * dtype_size(t.dtype);
    r.need(payload, "payload");
    const std::uint8_t* src = r.p + r.pos;
    switch (t.dtype) {
      case ContainerTensor::DType::F32:
        le_payload_to_vec(src, static_cast<std::size_t>(count64), t.f32);
        break;
      case ContainerTensor::DType::I32:
        le_payload_to_vec(src, static_cast<std::size_t>(count64), t.i32);
        break;
      case ContainerTensor::DType::U8:
        le_payload_to_vec(src, static_cast<std::size_t>(count64), t.u8);
        break;
    }
    r.pos += payload;
    out.push_back(std::move(t));
  }
  if (r.pos != r.size) throw FormatError("trailing bytes after last tensor", r.pos);
  return out;
}

const ContainerTensor& find_tensor(const std::vector<ContainerTensor>& tensors,
                                   const std::string& name) {
  for (const auto& t : tensors)
    if (t.name == name) return t;
  throw std::runtime_error("container: missing tensor '" + name + "'");
}

}  // namespace ssa2d
