#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nfcl/graph.hpp"
#include "nfcl/tensor.hpp"
#include "nfcl/volume.hpp"

namespace nfcl {

enum class Arch : std::uint8_t { PeRelu = 0, Siren = 1, Finer = 2, Diner = 3 };
enum class Head : std::uint8_t { Linear = 0, Softmax = 1, Mixed = 2 };

std::string_view arch_name(Arch arch);
/// Accepts "pe-relu", "siren", "finer", "diner".
Arch parse_arch(std::string_view name);

struct ModelConfig {
  Arch arch = Arch::Siren;
  std::uint32_t in_dim = 3;
  std::uint32_t hidden_layers = 3;
  std::uint32_t hidden_width = 256;
  std::uint32_t out_channels = 1;
  Head head = Head::Linear;
  /// Leading linear channels of a MIXED head; the rest form one softmax group.
  std::uint32_t linear_channels = 0;
  std::uint32_t pe_levels = 10;  // PE_RELU only
  double omega0 = 15.0;          // SIREN, FINER
  std::uint32_t latent_dim = 1;  // DINER only
  std::uint64_t seed = 0;

  /// Per-architecture defaults: omega0 = 15 (SIREN) or 5 (FINER). PE-ReLU and
  /// DINER use ReLU hidden layers.
  static ModelConfig defaults(Arch arch, std::uint32_t in_dim = 3, std::uint32_t out_channels = 1);

  /// Number of output channels with linear activation.
  std::uint32_t linear_count() const;
  /// First channel of the softmax group (== out_channels when there is none).
  std::uint32_t class_begin() const { return linear_count(); }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Exact map from lattice coordinates to hash-table rows. Every table row is
/// owned by exactly one lattice point; lookups off the lattice or outside the
/// map are errors.
class CoordinateIndex {
 public:
  CoordinateIndex() = default;
  explicit CoordinateIndex(std::vector<std::uint32_t> lattice);

  const std::vector<std::uint32_t>& lattice() const noexcept { return lattice_; }
  std::size_t size() const noexcept { return keys_.size(); }
  bool empty() const noexcept { return keys_.empty(); }
  /// Lattice keys in row order.
  const std::vector<std::uint64_t>& keys() const noexcept { return keys_; }

  /// Linear lattice index of one coordinate row.
  template <class T>
  std::uint64_t key_of(const T* coord) const;
  std::optional<std::uint32_t> row_of(std::uint64_t key) const;
  bool contains(std::uint64_t key) const { return rows_.contains(key); }
  /// Appends a row for a new key; duplicates are a ConfigError.
  std::uint32_t insert(std::uint64_t key);

  template <class T>
  std::vector<std::uint32_t> rows_for(const Tensor<T>& coords) const;

  friend bool operator==(const CoordinateIndex& a, const CoordinateIndex& b) {
    return a.lattice_ == b.lattice_ && a.keys_ == b.keys_;
  }

 private:
  std::vector<std::uint32_t> lattice_;
  std::vector<std::uint64_t> keys_;
  std::unordered_map<std::uint64_t, std::uint32_t> rows_;
};

/// Lattice extents of a grid: spatial dims, plus the frame count when timed.
std::vector<std::uint32_t> lattice_of(const GridSpec& grid);

/// A coordinate network: configuration, parameters and, for DINER, the
/// coordinate-to-row map of its table.
template <class T>
class FieldModel {
 public:
  FieldModel(ModelConfig config, ParamSet<T> params, CoordinateIndex index = {});

  const ModelConfig& config() const noexcept { return config_; }
  ModelConfig& config() noexcept { return config_; }
  const ParamSet<T>& params() const noexcept { return params_; }
  ParamSet<T>& params() noexcept { return params_; }
  const CoordinateIndex& coord_index() const noexcept { return index_; }
  CoordinateIndex& coord_index() noexcept { return index_; }

  /// Records the network on a graph created over params() and returns the
  /// pre-head outputs (linear values and class logits), n x out_channels.
  Var forward_raw(Graph<T>& graph, const Tensor<T>& coords) const;

  /// Post-head outputs: linear channels raw, class channels as probabilities.
  Tensor<T> forward(const Tensor<T>& coords) const;
  /// Applies the output head to pre-head outputs in place.
  void apply_head(Tensor<T>& raw) const;

  std::string output_layer() const;

 private:
  ModelConfig config_;
  ParamSet<T> params_;
  CoordinateIndex index_;
};

/// Initializes a model deterministically from config.seed. DINER needs the
/// grid whose points populate its table.
template <class T>
FieldModel<T> build_model(const ModelConfig& config, const GridSpec* grid = nullptr);

/// Adds zero-initialized output channels. Existing output weights are left
/// untouched, so pre-existing channels compute exactly what they did before.
template <class T>
void expand_output_head(FieldModel<T>& model, std::uint32_t extra_channels, Head kind);

/// Adds one U(-1, 1) table row per new lattice coordinate (DINER only).
template <class T>
void expand_hash_table(FieldModel<T>& model, const Tensor<T>& new_coords, std::mt19937_64& rng);

extern template class FieldModel<float>;
extern template class FieldModel<double>;

}  // namespace nfcl
