#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace wsol {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace init {
struct Zeros {};
struct Constant {
  double value;
};
/// Draws from CounterRng(seed) with Box-Muller; see rng.hpp.
struct Gaussian {
  double mean = 0.0;
  double stddev = 1.0;
  std::uint64_t seed = 0;
};
}  // namespace init

using Init = std::variant<init::Zeros, init::Constant, init::Gaussian>;

/// Dense row-major array of doubles. Plain value type; graph membership and
/// gradients live in Graph.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Init how = init::Zeros{});
  Tensor(Shape shape, std::vector<double> data);

  static Tensor create(Shape shape, Init how = init::Zeros{}) { return Tensor(std::move(shape), how); }
  static Tensor scalar(double v) { return Tensor(Shape{1}, std::vector<double>{v}); }
  static Tensor vector(std::initializer_list<double> v) { return Tensor(Shape{v.size()}, std::vector<double>(v)); }
  /// Rows of equal length.
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t numel() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  double& at(std::size_t c, std::size_t i, std::size_t j) { return data_[(c * shape_[1] + i) * shape_[2] + j]; }
  double at(std::size_t c, std::size_t i, std::size_t j) const {
    return data_[(c * shape_[1] + i) * shape_[2] + j];
  }

  /// Same data under a new shape with equal element count.
  Tensor reshaped(Shape shape) const;

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Throws ShapeError if any extent is zero.
void validate_shape(const Shape& shape);

}  // namespace wsol
