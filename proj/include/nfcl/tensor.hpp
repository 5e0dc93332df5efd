#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace nfcl {

/// Dense row-major tensor. Rank 1 (vectors) and rank 2 (matrices) are the
/// only ranks the engine uses, but the shape is stored generically.
template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, T fill = T(0));
  explicit Tensor(std::vector<std::size_t> shape, T fill = T(0));
  Tensor(std::vector<std::size_t> shape, std::vector<T> data);

  static Tensor vector(std::initializer_list<T> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<T> values);

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  /// Leading extent; 0 for an empty shape.
  std::size_t rows() const noexcept { return shape_.empty() ? 0 : shape_[0]; }
  /// Product of the trailing extents (1 for vectors).
  std::size_t cols() const noexcept;

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }
  T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols() + c]; }
  const T& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols() + c]; }

  bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }
  void fill(T value);

  /// Appends zero rows along the leading dimension.
  void append_rows(std::size_t count);

  template <class U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<T> data_;
};

std::string shape_string(const std::vector<std::size_t>& shape);

/// Ordered, uniquely named collection of tensors. Used for both parameters
/// and their gradients; iteration order is insertion order.
template <class T>
class NamedTensors {
 public:
  struct Entry {
    std::string name;
    Tensor<T> value;
  };

  std::size_t add(std::string name, Tensor<T> value);

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t index_of(const std::string& name) const;
  bool contains(const std::string& name) const noexcept;

  Tensor<T>& operator[](std::size_t i) noexcept { return entries_[i].value; }
  const Tensor<T>& operator[](std::size_t i) const noexcept { return entries_[i].value; }
  Tensor<T>& at(const std::string& name) { return entries_[index_of(name)].value; }
  const Tensor<T>& at(const std::string& name) const { return entries_[index_of(name)].value; }
  const std::string& name(std::size_t i) const noexcept { return entries_[i].name; }

  auto begin() noexcept { return entries_.begin(); }
  auto end() noexcept { return entries_.end(); }
  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }

  /// Same names and shapes, all values zero.
  NamedTensors zeros_like() const;
  bool congruent(const NamedTensors& other) const noexcept;
  std::size_t total_size() const noexcept;

  template <class U>
  NamedTensors<U> cast() const {
    NamedTensors<U> out;
    for (const auto& e : entries_) out.add(e.name, e.value.template cast<U>());
    return out;
  }

  friend bool operator==(const NamedTensors& a, const NamedTensors& b) {
    if (a.entries_.size() != b.entries_.size()) return false;
    for (std::size_t i = 0; i < a.entries_.size(); ++i) {
      if (a.entries_[i].name != b.entries_[i].name || !(a.entries_[i].value == b.entries_[i].value)) {
        return false;
      }
    }
    return true;
  }

 private:
  std::vector<Entry> entries_;
};

template <class T>
using ParamSet = NamedTensors<T>;
template <class T>
using GradSet = NamedTensors<T>;

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class NamedTensors<float>;
extern template class NamedTensors<double>;

}  // namespace nfcl
