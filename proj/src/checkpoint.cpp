#include "nfcl/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <fstream>
#include <iterator>

#include "nfcl/errors.hpp"

namespace nfcl {

namespace {

constexpr std::array<std::uint8_t, 8> kMagic = {'N', 'F', 'C', 'K', 'P', 'T', '1', '\0'};

class Writer {
 public:
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  std::span<const std::uint8_t> bytes(std::size_t n) {
    need(n);
    auto s = b_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) {
      throw FormatError("truncated checkpoint: expected " + std::to_string(n) + " more bytes, found " +
                            std::to_string(b_.size() - pos_),
                        pos_);
    }
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

}  // namespace

template <class T>
std::vector<std::uint8_t> encode_checkpoint(const FieldModel<T>& model) {
  const ModelConfig& c = model.config();
  Writer w;
  w.bytes(kMagic);
  w.u8(static_cast<std::uint8_t>(c.arch));
  w.u32(c.in_dim);
  w.u32(c.hidden_layers);
  w.u32(c.hidden_width);
  w.u32(c.out_channels);
  w.u8(static_cast<std::uint8_t>(c.head));
  w.u32(c.linear_channels);
  w.u32(c.pe_levels);
  w.f64(c.omega0);
  w.u32(c.latent_dim);
  w.u64(c.seed);

  const CoordinateIndex& index = model.coord_index();
  w.u32(static_cast<std::uint32_t>(index.lattice().size()));
  for (auto n : index.lattice()) w.u32(n);

  w.u32(static_cast<std::uint32_t>(model.params().size()));
  for (const auto& [name, value] : model.params()) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes({reinterpret_cast<const std::uint8_t*>(name.data()), name.size()});
    w.u32(static_cast<std::uint32_t>(value.rank()));
    for (auto e : value.shape()) w.u32(static_cast<std::uint32_t>(e));
    for (T v : value.values()) w.f32(static_cast<float>(v));
  }

  std::vector<std::pair<std::uint64_t, std::uint32_t>> entries;
  entries.reserve(index.size());
  for (std::size_t r = 0; r < index.size(); ++r) entries.emplace_back(index.keys()[r], static_cast<std::uint32_t>(r));
  std::sort(entries.begin(), entries.end());
  w.u64(entries.size());
  for (const auto& [key, row] : entries) {
    w.u64(key);
    w.u32(row);
  }
  return w.take();
}

template <class T>
FieldModel<T> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  auto magic = r.bytes(kMagic.size());
  if (!std::equal(magic.begin(), magic.end(), kMagic.begin())) throw FormatError("bad checkpoint magic", 0);

  ModelConfig c;
  const std::size_t arch_at = r.pos();
  const std::uint8_t arch = r.u8();
  if (arch > 3) throw FormatError("unknown architecture id", arch_at);
  c.arch = static_cast<Arch>(arch);
  c.in_dim = r.u32();
  c.hidden_layers = r.u32();
  c.hidden_width = r.u32();
  c.out_channels = r.u32();
  const std::size_t head_at = r.pos();
  const std::uint8_t head = r.u8();
  if (head > 2) throw FormatError("unknown head id", head_at);
  c.head = static_cast<Head>(head);
  c.linear_channels = r.u32();
  c.pe_levels = r.u32();
  c.omega0 = r.f64();
  c.latent_dim = r.u32();
  c.seed = r.u64();

  std::vector<std::uint32_t> lattice(r.u32());
  for (auto& n : lattice) n = r.u32();

  ParamSet<T> params;
  const std::uint32_t count = r.u32();
  for (std::uint32_t p = 0; p < count; ++p) {
    const std::uint32_t len = r.u32();
    auto name_bytes = r.bytes(len);
    std::string name(name_bytes.begin(), name_bytes.end());
    std::vector<std::size_t> shape(r.u32());
    std::size_t n = 1;
    for (auto& e : shape) {
      e = r.u32();
      n *= e;
    }
    std::vector<T> values(n);
    for (auto& v : values) v = static_cast<T>(r.f32());
    params.add(std::move(name), Tensor<T>(std::move(shape), std::move(values)));
  }

  const std::uint64_t coords = r.u64();
  std::vector<std::uint64_t> by_row(coords);
  std::vector<bool> seen(coords, false);
  for (std::uint64_t i = 0; i < coords; ++i) {
    const std::uint64_t key = r.u64();
    const std::size_t row_at = r.pos();
    const std::uint32_t row = r.u32();
    if (row >= coords || seen[row]) throw FormatError("invalid coordinate map row", row_at);
    seen[row] = true;
    by_row[row] = key;
  }
  if (!r.done()) throw FormatError("trailing bytes after checkpoint", r.pos());

  CoordinateIndex index(lattice);
  for (auto key : by_row) index.insert(key);
  try {
    return FieldModel<T>(c, std::move(params), std::move(index));
  } catch (const ConfigError& e) {
    throw FormatError(std::string("invalid model configuration: ") + e.what(), 8);
  }
}

template <class T>
void save_checkpoint(const FieldModel<T>& model, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing", 0);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("failed writing '" + path.string() + "'", 0);
}

template <class T>
FieldModel<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'", 0);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint<T>(bytes);
}

template std::vector<std::uint8_t> encode_checkpoint<float>(const FieldModel<float>&);
template std::vector<std::uint8_t> encode_checkpoint<double>(const FieldModel<double>&);
template FieldModel<float> decode_checkpoint<float>(std::span<const std::uint8_t>);
template FieldModel<double> decode_checkpoint<double>(std::span<const std::uint8_t>);
template void save_checkpoint<float>(const FieldModel<float>&, const std::filesystem::path&);
template void save_checkpoint<double>(const FieldModel<double>&, const std::filesystem::path&);
template FieldModel<float> load_checkpoint<float>(const std::filesystem::path&);
template FieldModel<double> load_checkpoint<double>(const std::filesystem::path&);

}  // namespace nfcl
