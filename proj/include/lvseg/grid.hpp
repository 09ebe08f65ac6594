#ifndef LVSEG_GRID_HPP
#define LVSEG_GRID_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

namespace lvseg {

/// Dense row-major 2-D array with value semantics.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int rows, int cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  const T& operator()(int r, int c) const {
    return data_[static_cast<std::size_t>(r) * cols_ + c];
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  T* row(int r) { return data_.data() + static_cast<std::size_t>(r) * cols_; }
  const T* row(int r) const { return data_.data() + static_cast<std::size_t>(r) * cols_; }

  bool same_shape(const Grid& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool in_bounds(int r, int c) const { return r >= 0 && r < rows_ && c >= 0 && c < cols_; }

  void fill(T value) { data_.assign(data_.size(), value); }

  bool operator==(const Grid& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

using Image = Grid<double>;
using Mask = Grid<std::uint8_t>;

inline std::size_t mask_area(const Mask& m) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < m.size(); ++i) n += m.data()[i] ? 1 : 0;
  return n;
}

}  // namespace lvseg

#endif
