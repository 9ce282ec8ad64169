#ifndef EDAAN_TENSOR_HPP_
#define EDAAN_TENSOR_HPP_

#include <cstddef>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "edaan/errors.hpp"

namespace edaan {

using Shape = std::vector<int>;

inline std::size_t shape_count(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

// Dense row-major array. Images are (batch, channels, height, width).
template <typename Dtype>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Dtype fill = Dtype(0))
      : shape_(std::move(shape)), data_(shape_count(shape_), fill) {}
  Tensor(Shape shape, std::vector<Dtype> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_count(shape_))
      throw ShapeError("tensor data size " + std::to_string(data_.size()) +
                       " does not match shape " + shape_string(shape_));
  }

  const Shape& shape() const { return shape_; }
  int dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t ndim() const { return shape_.size(); }
  std::size_t count() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // Elements per leading-axis slice (one image, one embedding row).
  std::size_t stride0() const { return shape_.empty() || shape_[0] == 0 ? 0 : count() / shape_[0]; }

  Dtype* data() { return data_.data(); }
  const Dtype* data() const { return data_.data(); }
  std::span<Dtype> span() { return data_; }
  std::span<const Dtype> span() const { return data_; }
  std::vector<Dtype>& vec() { return data_; }
  const std::vector<Dtype>& vec() const { return data_; }

  Dtype& operator[](std::size_t i) { return data_[i]; }
  const Dtype& operator[](std::size_t i) const { return data_[i]; }

  Dtype& at(int n, int c, int h, int w) {
    return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  const Dtype& at(int n, int c, int h, int w) const {
    return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  void fill(Dtype v) { std::fill(data_.begin(), data_.end(), v); }
  void reshape(Shape shape) {
    if (shape_count(shape) != data_.size())
      throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    shape_ = std::move(shape);
  }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<Other>(data_[i]);
    return out;
  }

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<Dtype> data_;
};

inline void check_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a != b)
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_string(a) + " vs " +
                     shape_string(b));
}

}  // namespace edaan

#endif  // EDAAN_TENSOR_HPP_
