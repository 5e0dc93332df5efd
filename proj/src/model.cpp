#include "nfcl/model.hpp"

#include <algorithm>
#include <cmath>

#include "nfcl/encoding.hpp"
#include "nfcl/errors.hpp"
#include "nfcl/kernels.hpp"

namespace nfcl {

std::string_view arch_name(Arch arch) {
  switch (arch) {
    case Arch::PeRelu:
      return "pe-relu";
    case Arch::Siren:
      return "siren";
    case Arch::Finer:
      return "finer";
    case Arch::Diner:
      return "diner";
  }
  return "unknown";
}

Arch parse_arch(std::string_view name) {
  for (Arch a : {Arch::PeRelu, Arch::Siren, Arch::Finer, Arch::Diner}) {
    if (arch_name(a) == name) return a;
  }
  throw ConfigError("unknown model '" + std::string(name) + "' (expected pe-relu, siren, finer or diner)");
}

ModelConfig ModelConfig::defaults(Arch arch, std::uint32_t in_dim, std::uint32_t out_channels) {
  ModelConfig c;
  c.arch = arch;
  c.in_dim = in_dim;
  c.out_channels = out_channels;
  c.omega0 = arch == Arch::Finer ? 5.0 : 15.0;
  return c;
}

std::uint32_t ModelConfig::linear_count() const {
  switch (head) {
    case Head::Linear:
      return out_channels;
    case Head::Softmax:
      return 0;
    case Head::Mixed:
      return linear_channels;
  }
  return out_channels;
}

// ---------------------------------------------------------------------------
// CoordinateIndex

namespace {

// Off-lattice tolerance, in coordinate units.
constexpr double kLatticeTolerance = 1e-4;

}  // namespace

CoordinateIndex::CoordinateIndex(std::vector<std::uint32_t> lattice) : lattice_(std::move(lattice)) {
  for (auto n : lattice_) {
    if (n == 0) throw ConfigError("lattice extents must be positive");
  }
}

template <class T>
std::uint64_t CoordinateIndex::key_of(const T* coord) const {
  std::uint64_t key = 0;
  for (std::size_t a = 0; a < lattice_.size(); ++a) {
    const std::uint32_t n = lattice_[a];
    const double c = coord[a];
    const double pos = n > 1 ? (c + 1.0) * static_cast<double>(n - 1) / 2.0 : 0.0;
    const double rounded = std::round(pos);
    if (!(rounded >= 0.0 && rounded < n) || std::abs(axis_coordinate(static_cast<std::uint32_t>(rounded), n) - c) >
                                                 kLatticeTolerance) {
      throw UnknownCoordinateError("coordinate component " + std::to_string(c) + " on axis " + std::to_string(a) +
                                   " is not on the model's lattice");
    }
    key = key * n + static_cast<std::uint64_t>(rounded);
  }
  return key;
}

std::optional<std::uint32_t> CoordinateIndex::row_of(std::uint64_t key) const {
  if (auto it = rows_.find(key); it != rows_.end()) return it->second;
  return std::nullopt;
}

std::uint32_t CoordinateIndex::insert(std::uint64_t key) {
  if (rows_.contains(key)) throw ConfigError("coordinate with lattice key " + std::to_string(key) + " already mapped");
  const auto row = static_cast<std::uint32_t>(keys_.size());
  keys_.push_back(key);
  rows_.emplace(key, row);
  return row;
}

template <class T>
std::vector<std::uint32_t> CoordinateIndex::rows_for(const Tensor<T>& coords) const {
  if (coords.cols() != lattice_.size()) throw DimensionError("coordinate width does not match lattice rank");
  std::vector<std::uint32_t> rows(coords.rows());
  for (std::size_t i = 0; i < coords.rows(); ++i) {
    const std::uint64_t key = key_of(coords.data() + i * coords.cols());
    auto row = row_of(key);
    if (!row) throw UnknownCoordinateError("coordinate row " + std::to_string(i) + " is not in the model's table");
    rows[i] = *row;
  }
  return rows;
}

std::vector<std::uint32_t> lattice_of(const GridSpec& grid) {
  std::vector<std::uint32_t> lattice = grid.dims;
  if (grid.time) lattice.push_back(grid.time->frames);
  return lattice;
}

// ---------------------------------------------------------------------------
// FieldModel

namespace {

std::string weight_name(std::uint32_t layer) {
  return "layer" + std::to_string(layer) + ".weight";
}
std::string bias_name(std::uint32_t layer) {
  return "layer" + std::to_string(layer) + ".bias";
}

constexpr const char* kTableName = "table";

template <class T>
Tensor<T> uniform(std::vector<std::size_t> shape, double bound, std::mt19937_64& rng) {
  Tensor<T> t(std::move(shape));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (T& v : t.values()) v = static_cast<T>(dist(rng));
  return t;
}

void validate(const ModelConfig& c) {
  if (c.in_dim == 0) throw ConfigError("in_dim must be positive");
  if (c.hidden_width == 0) throw ConfigError("hidden_width must be at least 1");
  if (c.hidden_layers == 0) throw ConfigError("hidden_layers must be at least 1");
  if (c.out_channels == 0) throw ConfigError("out_channels must be at least 1");
  if (c.head == Head::Mixed && c.linear_channels > c.out_channels) {
    throw ConfigError("mixed head has more linear channels than outputs");
  }
  if (c.arch == Arch::PeRelu && c.pe_levels == 0) throw ConfigError("positional encoding needs at least one level");
  if (c.arch != Arch::PeRelu && !(c.omega0 > 0.0)) throw ConfigError("omega0 must be positive");
  if (c.arch == Arch::Diner && c.latent_dim == 0) throw ConfigError("latent_dim must be at least 1");
}

std::size_t input_width(const ModelConfig& c) {
  switch (c.arch) {
    case Arch::PeRelu:
      return static_cast<std::size_t>(c.in_dim) * 2 * c.pe_levels;
    case Arch::Diner:
      return c.latent_dim;
    default:
      return c.in_dim;
  }
}

}  // namespace

template <class T>
FieldModel<T>::FieldModel(ModelConfig config, ParamSet<T> params, CoordinateIndex index)
    : config_(std::move(config)), params_(std::move(params)), index_(std::move(index)) {
  validate(config_);
}

template <class T>
std::string FieldModel<T>::output_layer() const {
  return "layer" + std::to_string(config_.hidden_layers);
}

template <class T>
Var FieldModel<T>::forward_raw(Graph<T>& graph, const Tensor<T>& coords) const {
  if (coords.rank() != 2 || coords.cols() != config_.in_dim) {
    throw DimensionError("model expects " + std::to_string(config_.in_dim) + " coordinate columns, got shape " +
                         shape_string(coords.shape()));
  }
  Var h;
  switch (config_.arch) {
    case Arch::PeRelu:
      h = graph.constant(encode_pe(coords, config_.pe_levels));
      break;
    case Arch::Diner:
      h = graph.lookup(graph.param(kTableName), index_.rows_for(coords));
      break;
    default:
      h = graph.constant(coords);
      break;
  }
  const T omega0 = static_cast<T>(config_.omega0);
  for (std::uint32_t l = 0; l < config_.hidden_layers; ++l) {
    const Var z = graph.affine(graph.param(weight_name(l)), graph.param(bias_name(l)), h);
    switch (config_.arch) {
      case Arch::PeRelu:
      case Arch::Diner:
        h = graph.relu(z);
        break;
      case Arch::Finer:
        h = graph.finer(z, omega0);
        break;
      default:
        h = graph.sine(z, omega0);
        break;
    }
  }
  const std::uint32_t out = config_.hidden_layers;
  return graph.affine(graph.param(weight_name(out)), graph.param(bias_name(out)), h);
}

template <class T>
void FieldModel<T>::apply_head(Tensor<T>& raw) const {
  const std::size_t begin = config_.class_begin();
  const std::size_t cols = raw.cols();
  if (begin >= cols) return;
  const std::size_t classes = cols - begin;
  Tensor<T> logits(raw.rows(), classes);
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    for (std::size_t j = 0; j < classes; ++j) logits(i, j) = raw(i, begin + j);
  }
  Tensor<T> probs(logits.shape());
  kernels::softmax_rows(logits, probs);
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    for (std::size_t j = 0; j < classes; ++j) raw(i, begin + j) = probs(i, j);
  }
}

template <class T>
Tensor<T> FieldModel<T>::forward(const Tensor<T>& coords) const {
  constexpr std::size_t kChunk = 8192;
  const std::size_t n = coords.rows();
  Tensor<T> out(n, config_.out_channels);
  const std::size_t d = coords.cols();
  for (std::size_t start = 0; start < n; start += kChunk) {
    const std::size_t count = std::min(kChunk, n - start);
    Tensor<T> chunk({count, d}, std::vector<T>(coords.data() + start * d, coords.data() + (start + count) * d));
    Graph<T> graph(params_);
    const Tensor<T>& raw = graph.value(forward_raw(graph, chunk));
    std::copy(raw.data(), raw.data() + raw.size(), out.data() + start * config_.out_channels);
  }
  apply_head(out);
  return out;
}

template <class T>
FieldModel<T> build_model(const ModelConfig& config, const GridSpec* grid) {
  validate(config);
  std::mt19937_64 rng(config.seed);
  ParamSet<T> params;
  CoordinateIndex index;

  if (config.arch == Arch::Diner) {
    if (!grid) throw ConfigError("DINER needs a grid to size its table");
    if (grid->coord_dims() != config.in_dim) throw ConfigError("grid rank does not match in_dim");
    index = CoordinateIndex(lattice_of(*grid));
    const Tensor<double> coords = make_grid<double>(*grid);
    for (std::size_t i = 0; i < coords.rows(); ++i) index.insert(index.key_of(coords.data() + i * coords.cols()));
    params.add(kTableName, uniform<T>({index.size(), config.latent_dim}, 1.0, rng));
  }

  const double omega0 = config.omega0;
  std::size_t fan_in = input_width(config);
  for (std::uint32_t l = 0; l <= config.hidden_layers; ++l) {
    const bool is_output = l == config.hidden_layers;
    const std::size_t fan_out = is_output ? config.out_channels : config.hidden_width;
    const double n = static_cast<double>(fan_in);
    double w_bound = 0.0;
    double b_bound = 1.0 / std::sqrt(n);
    switch (config.arch) {
      case Arch::PeRelu:
      case Arch::Diner:
        w_bound = is_output ? 1.0 / std::sqrt(n) : std::sqrt(6.0 / n);
        break;
      case Arch::Siren:
      case Arch::Finer:
        w_bound = l == 0 ? 1.0 / n : std::sqrt(6.0 / n) / omega0;
        if (config.arch == Arch::Finer && l == 0) b_bound = 1.0;
        break;
    }
    params.add(weight_name(l), uniform<T>({fan_out, fan_in}, w_bound, rng));
    params.add(bias_name(l), uniform<T>({fan_out}, b_bound, rng));
    fan_in = fan_out;
  }
  return FieldModel<T>(config, std::move(params), std::move(index));
}

template <class T>
void expand_output_head(FieldModel<T>& model, std::uint32_t extra_channels, Head kind) {
  if (extra_channels == 0) throw ConfigError("expand_output_head needs at least one extra channel");
  ModelConfig& c = model.config();
  if (kind == Head::Mixed) throw ConfigError("new channels must be either linear or softmax");
  if (kind == Head::Linear && c.head != Head::Linear) {
    throw ConfigError("linear channels cannot be added after a softmax group");
  }
  const std::string layer = model.output_layer();
  model.params().at(layer + ".weight").append_rows(extra_channels);
  model.params().at(layer + ".bias").append_rows(extra_channels);
  if (kind == Head::Softmax && c.head == Head::Linear) {
    c.head = Head::Mixed;
    c.linear_channels = c.out_channels;
  }
  c.out_channels += extra_channels;
}

template <class T>
void expand_hash_table(FieldModel<T>& model, const Tensor<T>& new_coords, std::mt19937_64& rng) {
  if (model.config().arch != Arch::Diner) throw ConfigError("only DINER models have a table to expand");
  CoordinateIndex& index = model.coord_index();
  if (new_coords.cols() != index.lattice().size()) throw DimensionError("coordinate width does not match lattice");
  std::vector<std::uint64_t> keys(new_coords.rows());
  for (std::size_t i = 0; i < new_coords.rows(); ++i) {
    keys[i] = index.key_of(new_coords.data() + i * new_coords.cols());
    if (index.contains(keys[i])) {
      throw ConfigError("coordinate row " + std::to_string(i) + " is already in the table");
    }
  }
  // Checked up front so a rejected call leaves the model untouched.
  {
    std::vector<std::uint64_t> sorted = keys;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw ConfigError("duplicate coordinate in table expansion");
    }
  }
  Tensor<T>& table = model.params().at(kTableName);
  const std::size_t old_rows = table.rows();
  const std::size_t width = table.cols();
  table.append_rows(keys.size());
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    index.insert(keys[i]);
    for (std::size_t j = 0; j < width; ++j) table(old_rows + i, j) = static_cast<T>(dist(rng));
  }
}

template std::uint64_t CoordinateIndex::key_of<float>(const float*) const;
template std::uint64_t CoordinateIndex::key_of<double>(const double*) const;
template std::vector<std::uint32_t> CoordinateIndex::rows_for<float>(const Tensor<float>&) const;
template std::vector<std::uint32_t> CoordinateIndex::rows_for<double>(const Tensor<double>&) const;

template class FieldModel<float>;
template class FieldModel<double>;
template FieldModel<float> build_model<float>(const ModelConfig&, const GridSpec*);
template FieldModel<double> build_model<double>(const ModelConfig&, const GridSpec*);
template void expand_output_head<float>(FieldModel<float>&, std::uint32_t, Head);
template void expand_output_head<double>(FieldModel<double>&, std::uint32_t, Head);
template void expand_hash_table<float>(FieldModel<float>&, const Tensor<float>&, std::mt19937_64&);
template void expand_hash_table<double>(FieldModel<double>&, const Tensor<double>&, std::mt19937_64&);

}  // namespace nfcl
