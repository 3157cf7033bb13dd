#include "cslr/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace cslr {

static std::size_t product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

TensorPtr Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
  auto t = std::make_shared<Tensor>();
  t->values.assign(product(shape), 0.0);
  t->shape = std::move(shape);
  t->requires_grad = requires_grad;
  return t;
}

TensorPtr Tensor::from(std::vector<std::size_t> shape, std::vector<double> vals,
                       bool requires_grad) {
  if (product(shape) != vals.size())
    throw DimensionError("Tensor::from: shape/value count mismatch");
  auto t = std::make_shared<Tensor>();
  t->shape = std::move(shape);
  t->values = std::move(vals);
  t->requires_grad = requires_grad;
  return t;
}

std::size_t Tensor::rows() const {
  if (shape.size() != 2) throw DimensionError("rows(): tensor is not 2-D: " + shape_str());
  return shape[0];
}

std::size_t Tensor::cols() const {
  if (shape.size() != 2) throw DimensionError("cols(): tensor is not 2-D: " + shape_str());
  return shape[1];
}

void Tensor::ensure_grad() {
  if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
}

void Tensor::zero_grad() {
  if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << "]";
  return os.str();
}

void Tape::backward() {
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

void check_finite(const Tensor& t, const char* op_name) {
  for (double v : t.values) {
    if (!std::isfinite(v))
      throw NumericError(std::string(op_name) + ": non-finite value in output");
  }
}

}  // namespace cslr
