#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cslr/errors.hpp"

namespace cslr {

struct Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

/// Dense row-major 64-bit float buffer with an optional same-shape gradient.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until ensure_grad()
  bool requires_grad = false;

  static TensorPtr zeros(std::vector<std::size_t> shape, bool requires_grad = false);
  static TensorPtr from(std::vector<std::size_t> shape, std::vector<double> vals,
                        bool requires_grad = false);

  std::size_t size() const { return values.size(); }

  // 2-D helpers; throw on rank mismatch.
  std::size_t rows() const;
  std::size_t cols() const;
  double& at(std::size_t r, std::size_t c) { return values[r * cols_unchecked() + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols_unchecked() + c]; }

  void ensure_grad();
  void zero_grad();

  std::string shape_str() const;

 private:
  std::size_t cols_unchecked() const { return shape.back(); }
};

/// Records backward closures during a forward pass; backward() replays them
/// in reverse order exactly once each.
class Tape {
 public:
  void record(std::function<void()> backward_fn) { nodes_.push_back(std::move(backward_fn)); }
  std::size_t size() const { return nodes_.size(); }

  void backward();
  void clear() { nodes_.clear(); }

 private:
  std::vector<std::function<void()>> nodes_;
};

// Throws NumericError if any value is NaN or Inf.
void check_finite(const Tensor& t, const char* op_name);

}  // namespace cslr
