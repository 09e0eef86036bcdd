#pragma once

#include <array>
#include <cassert>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

namespace negmt {

/// Dense row-major float tensor with a fixed rank.
template <std::size_t Rank>
class Tensor {
 public:
  using Shape = std::array<std::size_t, Rank>;

  Tensor() { shape_.fill(0); }
  explicit Tensor(Shape shape, float fill = 0.0f)
      : shape_(shape), data_(element_count(shape), fill) {}

  const Shape& shape() const { return shape_; }
  std::size_t dim(std::size_t i) const { return shape_[i]; }
  std::size_t size() const { return data_.size(); }

  template <typename... I>
  float& operator()(I... idx) {
    static_assert(sizeof...(I) == Rank);
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }
  template <typename... I>
  float operator()(I... idx) const {
    static_assert(sizeof...(I) == Rank);
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }

  /// Contiguous innermost row at the given leading indices.
  template <typename... I>
  std::span<const float> row(I... idx) const {
    static_assert(sizeof...(I) == Rank - 1);
    const std::size_t off = offset({static_cast<std::size_t>(idx)..., 0});
    return {data_.data() + off, shape_[Rank - 1]};
  }
  template <typename... I>
  std::span<float> row(I... idx) {
    static_assert(sizeof...(I) == Rank - 1);
    const std::size_t off = offset({static_cast<std::size_t>(idx)..., 0});
    return {data_.data() + off, shape_[Rank - 1]};
  }

  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }

  static std::size_t element_count(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t offset(const Shape& idx) const {
    std::size_t off = 0;
    for (std::size_t i = 0; i < Rank; ++i) {
      assert(idx[i] < shape_[i]);
      off = off * shape_[i] + idx[i];
    }
    return off;
  }

  Shape shape_;
  std::vector<float> data_;
};

}  // namespace negmt
