#include "ltx/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <limits>

#include "ltx/common.hpp"

namespace ltx {

namespace {

constexpr std::string_view kMagic = "LTB1";
constexpr std::uint8_t kDtypeF32 = 0;

template <typename T>
void put(std::string& out, T value) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) out += static_cast<char>((value >> (8 * i)) & 0xFF);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return v;
  }

  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw DataError("truncated tensor container");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t Tensor::element_count() const {
  std::uint64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::string encode_tensors(std::span<const Tensor> tensors) {
  std::string out(kMagic);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    if (t.name.size() > std::numeric_limits<std::uint16_t>::max()) throw std::invalid_argument("tensor name too long");
    if (t.dims.size() > 255) throw std::invalid_argument("tensor rank too large");
    if (t.element_count() != t.values.size()) {
      throw std::invalid_argument("tensor '" + t.name + "' payload does not match its dims");
    }
    put<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
    out += t.name;
    put<std::uint8_t>(out, kDtypeF32);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) put<std::uint64_t>(out, d);
    for (float v : t.values) put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

std::vector<Tensor> decode_tensors(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(kMagic.size()) != kMagic) throw DataError("not an LTB1 container");
  const auto count = r.get<std::uint32_t>();
  std::vector<Tensor> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Tensor t;
    const auto name_len = r.get<std::uint16_t>();
    t.name = std::string(r.take(name_len));
    if (r.get<std::uint8_t>() != kDtypeF32) throw DataError("unsupported dtype in tensor '" + t.name + "'");
    const auto rank = r.get<std::uint8_t>();
    for (int d = 0; d < rank; ++d) t.dims.push_back(r.get<std::uint64_t>());
    const auto n = t.element_count();
    if (n > bytes.size() / 4) throw DataError("tensor '" + t.name + "' larger than the file");
    t.values.resize(n);
    for (auto& v : t.values) v = std::bit_cast<float>(r.get<std::uint32_t>());
    out.push_back(std::move(t));
  }
  if (!r.done()) throw DataError("trailing bytes after tensor container");
  return out;
}

void write_tensors(const std::filesystem::path& path, std::span<const Tensor> tensors) {
  write_file_atomic(path, encode_tensors(tensors));
}

std::vector<Tensor> read_tensors(const std::filesystem::path& path) { return decode_tensors(read_file(path)); }

}  // namespace ltx
