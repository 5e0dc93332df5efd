#include "nfcl/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "nfcl/errors.hpp"

namespace nfcl {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

template <class T>
Tensor<T>::Tensor(std::size_t rows, std::size_t cols, T fill)
    : shape_{rows, cols}, data_(rows * cols, fill) {}

template <class T>
Tensor<T>::Tensor(std::vector<std::size_t> shape, T fill)
    : shape_(std::move(shape)), data_(product(shape_), fill) {}

template <class T>
Tensor<T>::Tensor(std::vector<std::size_t> shape, std::vector<T> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (product(shape_) != data_.size()) {
    throw DimensionError("tensor shape " + shape_string(shape_) + " does not match " +
                         std::to_string(data_.size()) + " values");
  }
}

template <class T>
Tensor<T> Tensor<T>::vector(std::initializer_list<T> values) {
  return Tensor({values.size()}, std::vector<T>(values));
}

template <class T>
Tensor<T> Tensor<T>::matrix(std::size_t rows, std::size_t cols, std::initializer_list<T> values) {
  return Tensor({rows, cols}, std::vector<T>(values));
}

template <class T>
std::size_t Tensor<T>::cols() const noexcept {
  std::size_t c = 1;
  for (std::size_t i = 1; i < shape_.size(); ++i) c *= shape_[i];
  return c;
}

template <class T>
void Tensor<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <class T>
void Tensor<T>::append_rows(std::size_t count) {
  if (shape_.empty()) throw DimensionError("cannot append rows to a rank-0 tensor");
  shape_[0] += count;
  data_.resize(product(shape_), T(0));
}

template <class T>
std::size_t NamedTensors<T>::add(std::string name, Tensor<T> value) {
  if (contains(name)) throw ContractError("duplicate tensor name '" + name + "'");
  entries_.push_back({std::move(name), std::move(value)});
  return entries_.size() - 1;
}

template <class T>
std::size_t NamedTensors<T>::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name == name) return i;
  }
  throw ContractError("no tensor named '" + name + "'");
}

template <class T>
bool NamedTensors<T>::contains(const std::string& name) const noexcept {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.name == name; });
}

template <class T>
NamedTensors<T> NamedTensors<T>::zeros_like() const {
  NamedTensors out;
  for (const auto& e : entries_) out.entries_.push_back({e.name, Tensor<T>(e.value.shape())});
  return out;
}

template <class T>
bool NamedTensors<T>::congruent(const NamedTensors& other) const noexcept {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!entries_[i].value.same_shape(other.entries_[i].value)) return false;
  }
  return true;
}

template <class T>
std::size_t NamedTensors<T>::total_size() const noexcept {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

template class Tensor<float>;
template class Tensor<double>;
template class NamedTensors<float>;
template class NamedTensors<double>;

}  // namespace nfcl
