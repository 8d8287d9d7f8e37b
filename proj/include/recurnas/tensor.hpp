#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "recurnas/error.hpp"

namespace recurnas {

// 64-byte-aligned storage keeps Eigen's vectorized code paths (and so the
// floating-point rounding pattern) a function of shape alone; plain vectors
// land on varying boundaries and make repeated runs differ in the last bit.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, size_t n) { ::operator delete(p, n * sizeof(T), kAlign); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

using AlignedDoubles = std::vector<double, AlignedAllocator<double>>;

// Dense row-major 64-bit tensor. Rank 1 or 2 is all the op set needs.
struct Tensor {
  std::vector<int> shape;
  AlignedDoubles data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(numel_of(shape), 0.0);
  }
  Tensor(std::vector<int> s, std::initializer_list<double> d) : shape(std::move(s)) {
    data.assign(d.begin(), d.end());
    if (data.size() != numel_of(shape))
      throw Error(ErrorKind::Shape, "tensor data length does not match shape");
  }
  Tensor(std::vector<int> s, const std::vector<double>& d) : shape(std::move(s)) {
    data.assign(d.begin(), d.end());
    if (data.size() != numel_of(shape))
      throw Error(ErrorKind::Shape, "tensor data length does not match shape");
  }

  static size_t numel_of(const std::vector<int>& s) {
    size_t n = 1;
    for (int d : s) {
      if (d <= 0) throw Error(ErrorKind::Shape, "tensor dims must be positive");
      n *= static_cast<size_t>(d);
    }
    return n;
  }

  size_t numel() const { return data.size(); }
  int rows() const { return shape.empty() ? 1 : shape[0]; }
  int cols() const { return shape.size() < 2 ? 1 : shape[1]; }
  bool is_scalar() const { return numel() == 1; }

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols() + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols() + c]; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  std::string shape_str() const {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
      if (i) s += "x";
      s += std::to_string(shape[i]);
    }
    return s + "]";
  }
};

using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

inline MatMap as_matrix(Tensor& t) { return MatMap(t.data.data(), t.rows(), t.cols()); }
inline ConstMatMap as_matrix(const Tensor& t) {
  return ConstMatMap(t.data.data(), t.rows(), t.cols());
}

}  // namespace recurnas
