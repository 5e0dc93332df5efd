#include "nfcl/volume.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>

#include "nfcl/errors.hpp"

namespace nfcl {

namespace {

constexpr std::array<std::uint8_t, 7> kMagic = {'N', 'F', 'V', 'O', 'L', '1', '\0'};

std::size_t product(const std::vector<std::uint32_t>& dims) {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return dims.empty() ? 0 : n;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("truncated volume: expected ") + std::to_string(n) + " more bytes for " +
                            what + ", found " + std::to_string(bytes_.size() - pos_),
                        pos_);
    }
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return bytes_[pos_++];
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

double TimeAxis::value() const {
  return frames <= 1 ? -1.0 : axis_coordinate(index, frames);
}

std::size_t GridSpec::point_count() const {
  return product(dims);
}

double axis_coordinate(std::uint32_t i, std::uint32_t n) {
  if (n <= 1) return -1.0;
  return -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
}

template <class T>
Tensor<T> make_grid(const GridSpec& spec) {
  if (spec.dims.empty()) throw ConfigError("grid needs at least one spatial axis");
  for (auto d : spec.dims) {
    if (d < 2) throw ConfigError("grid axes need at least 2 points");
  }
  const std::size_t n = spec.point_count();
  const std::size_t nd = spec.dims.size();
  const std::size_t cols = spec.coord_dims();
  Tensor<T> out(n, cols);
  std::vector<std::uint32_t> idx(nd, 0);
  const T t = spec.time ? static_cast<T>(spec.time->value()) : T(0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t a = 0; a < nd; ++a) out(r, a) = static_cast<T>(axis_coordinate(idx[a], spec.dims[a]));
    if (spec.time) out(r, nd) = t;
    for (std::size_t a = nd; a-- > 0;) {
      if (++idx[a] < spec.dims[a]) break;
      idx[a] = 0;
    }
  }
  return out;
}

template Tensor<float> make_grid<float>(const GridSpec&);
template Tensor<double> make_grid<double>(const GridSpec&);

Volume Volume::intensity(std::vector<std::uint32_t> dims, std::vector<float> values, std::uint32_t channels) {
  Volume v;
  v.dims = std::move(dims);
  v.channels = channels;
  v.kind = VolumeKind::Intensity;
  v.intensities = std::move(values);
  if (v.intensities.size() != v.value_count()) throw DimensionError("intensity volume size does not match dims");
  return v;
}

Volume Volume::label_map(std::vector<std::uint32_t> dims, std::vector<std::uint8_t> values) {
  Volume v;
  v.dims = std::move(dims);
  v.kind = VolumeKind::Labels;
  v.labels = std::move(values);
  if (v.labels.size() != v.value_count()) throw DimensionError("label volume size does not match dims");
  return v;
}

std::size_t Volume::voxel_count() const {
  return product(dims);
}

void normalize_intensity(std::span<Volume> case_frames) {
  float lo = std::numeric_limits<float>::infinity();
  float hi = -std::numeric_limits<float>::infinity();
  for (const Volume& v : case_frames) {
    if (v.kind != VolumeKind::Intensity) throw ContractError("normalize_intensity needs intensity volumes");
    for (float x : v.intensities) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
  if (!(hi > lo)) throw DegenerateInputError("cannot normalize a constant volume (min == max)");
  const double range = static_cast<double>(hi) - lo;
  for (Volume& v : case_frames) {
    for (float& x : v.intensities) x = static_cast<float>((static_cast<double>(x) - lo) / range);
  }
}

Volume normalize_intensity(const Volume& v) {
  Volume out = v;
  normalize_intensity(std::span<Volume>(&out, 1));
  return out;
}

std::vector<std::uint8_t> encode_volume(const Volume& v) {
  if (v.dims.empty() || v.dims.size() > 255) throw ContractError("volume rank must be in [1, 255]");
  std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
  out.push_back(static_cast<std::uint8_t>(v.kind));
  out.push_back(static_cast<std::uint8_t>(v.dims.size()));
  for (auto d : v.dims) put_u32(out, d);
  put_u32(out, v.channels);
  if (v.kind == VolumeKind::Intensity) {
    if (v.intensities.size() != v.value_count()) throw DimensionError("intensity payload size mismatch");
    out.reserve(out.size() + 4 * v.intensities.size());
    for (float x : v.intensities) put_u32(out, std::bit_cast<std::uint32_t>(x));
  } else {
    if (v.labels.size() != v.value_count()) throw DimensionError("label payload size mismatch");
    out.insert(out.end(), v.labels.begin(), v.labels.end());
  }
  return out;
}

Volume decode_volume(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  auto magic = in.take(kMagic.size(), "magic");
  if (!std::equal(magic.begin(), magic.end(), kMagic.begin())) throw FormatError("bad magic, not an NFV volume", 0);
  const std::size_t kind_offset = in.pos();
  const std::uint8_t kind = in.u8("kind");
  if (kind > 1) throw FormatError("unknown volume dtype/kind " + std::to_string(kind), kind_offset);
  const std::size_t ndim_offset = in.pos();
  const std::uint8_t ndim = in.u8("ndim");
  if (ndim == 0) throw FormatError("volume rank must be positive", ndim_offset);
  Volume v;
  v.kind = static_cast<VolumeKind>(kind);
  for (std::uint8_t i = 0; i < ndim; ++i) v.dims.push_back(in.u32("extent"));
  v.channels = in.u32("channels");
  const std::size_t count = v.value_count();
  const std::size_t elem = v.kind == VolumeKind::Intensity ? 4 : 1;
  const std::size_t payload_offset = in.pos();
  if (in.remaining() != count * elem) {
    throw FormatError("payload length mismatch: expected " + std::to_string(count * elem) + " bytes, found " +
                          std::to_string(in.remaining()),
                      payload_offset);
  }
  auto payload = in.take(count * elem, "payload");
  if (v.kind == VolumeKind::Intensity) {
    v.intensities.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(payload[4 * i + b]) << (8 * b);
      v.intensities[i] = std::bit_cast<float>(bits);
    }
  } else {
    v.labels.assign(payload.begin(), payload.end());
  }
  return v;
}

void save_volume(const Volume& v, const std::filesystem::path& path) {
  const auto bytes = encode_volume(v);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing", 0);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("failed writing '" + path.string() + "'", 0);
}

Volume load_volume(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'", 0);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_volume(bytes);
  } catch (Error& e) {
    e.add_context(path.string());
    throw;
  }
}

}  // namespace nfcl
