#include "wsol/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "wsol/errors.hpp"
#include "wsol/rng.hpp"

namespace wsol {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

void validate_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one axis");
  for (auto e : shape)
    if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
}

namespace {

struct Filler {
  std::vector<double>& out;
  void operator()(const init::Zeros&) const { std::fill(out.begin(), out.end(), 0.0); }
  void operator()(const init::Constant& c) const { std::fill(out.begin(), out.end(), c.value); }
  void operator()(const init::Gaussian& g) const {
    if (!(g.stddev >= 0.0)) throw ArgumentError("gaussian init requires stddev >= 0");
    CounterRng rng(g.seed);
    for (auto& v : out) v = rng.gaussian(g.mean, g.stddev);
  }
};

}  // namespace

Tensor::Tensor(Shape shape, Init how) : shape_(std::move(shape)) {
  validate_shape(shape_);
  data_.resize(shape_numel(shape_));
  std::visit(Filler{data_}, how);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  validate_shape(shape_);
  if (shape_numel(shape_) != data_.size())
    throw ShapeError("shape " + shape_str(shape_) + " does not match " + std::to_string(data_.size()) +
                     " values");
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t m = rows.size();
  const std::size_t n = m ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(m * n);
  for (const auto& r : rows) {
    if (r.size() != n) throw ShapeError("ragged matrix literal");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor(Shape{m, n}, std::move(data));
}

Tensor Tensor::reshaped(Shape shape) const {
  validate_shape(shape);
  if (shape_numel(shape) != numel())
    throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  return Tensor(std::move(shape), data_);
}

}  // namespace wsol
