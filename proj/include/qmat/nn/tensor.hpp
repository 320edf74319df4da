#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace qmat::nn {

// Up to 4 dimensions; NCHW for feature maps.
struct Shape {
  std::array<int, 4> d{1, 1, 1, 1};
  int nd = 0;

  static Shape of(std::initializer_list<int> dims) {
    Shape s;
    if (dims.size() > 4) throw std::invalid_argument("Shape: more than 4 dims");
    s.nd = static_cast<int>(dims.size());
    int i = 0;
    for (int v : dims) s.d[i++] = v;
    return s;
  }

  int numel() const {
    std::int64_t n = 1;
    for (int i = 0; i < nd; ++i) n *= d[i];
    return static_cast<int>(n);
  }

  bool operator==(const Shape&) const = default;

  std::string str() const {
    std::ostringstream os;
    os << '(';
    for (int i = 0; i < nd; ++i) os << (i ? "," : "") << d[i];
    os << ')';
    return os.str();
  }
};

struct Tensor {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // allocated lazily, same length as data when present
  bool requires_grad = false;

  Tensor() = default;
  explicit Tensor(Shape s, bool rg = false)
      : shape(s), data(static_cast<std::size_t>(s.numel()), 0.0), requires_grad(rg) {}

  int numel() const { return shape.numel(); }

  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
  }
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

using TensorPtr = std::shared_ptr<Tensor>;

inline TensorPtr make_tensor(Shape s, bool requires_grad = false) {
  return std::make_shared<Tensor>(s, requires_grad);
}

}  // namespace qmat::nn
