#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace wtm {

/// Axis-aligned box [lower, upper] in R^n.
struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  static Box square(double lo, double hi, Eigen::Index dim = 2) {
    return {Eigen::VectorXd::Constant(dim, lo), Eigen::VectorXd::Constant(dim, hi)};
  }

  Eigen::Index dimension() const { return lower.size(); }

  template <typename Derived>
  bool contains(const Eigen::MatrixBase<Derived>& x) const {
    for (Eigen::Index d = 0; d < lower.size(); ++d)
      if (!(x[d] >= lower[d] && x[d] <= upper[d])) return false;
    return true;
  }

  void validate() const {
    if (lower.size() == 0 || lower.size() != upper.size())
      throw std::invalid_argument("box: lower/upper dimension mismatch");
    for (Eigen::Index d = 0; d < lower.size(); ++d)
      if (!(upper[d] > lower[d])) throw std::invalid_argument("box: upper must exceed lower on every axis");
  }

  bool operator==(const Box& o) const { return lower == o.lower && upper == o.upper; }
};

/// Regular partition of a box into cells. Cells are numbered with the first
/// axis varying slowest: index = ((i0 * n1) + i1) * n2 + ...
class GridPartition {
 public:
  static constexpr Eigen::Index kOutside = -1;

  GridPartition() = default;
  GridPartition(Box box, Eigen::VectorXi cells_per_axis)
      : box_(std::move(box)), cells_(std::move(cells_per_axis)) {
    box_.validate();
    if (cells_.size() != box_.dimension()) throw std::invalid_argument("grid: cells_per_axis dimension mismatch");
    total_ = 1;
    for (Eigen::Index d = 0; d < cells_.size(); ++d) {
      if (cells_[d] < 1) throw std::invalid_argument("grid: cells_per_axis must be positive");
      total_ *= cells_[d];
    }
    if (total_ < 2) throw std::invalid_argument("grid: needs at least two cells");
    width_ = (box_.upper - box_.lower).array() / cells_.cast<double>().array();
  }

  static GridPartition uniform(const Box& box, int cells_per_axis) {
    return {box, Eigen::VectorXi::Constant(box.dimension(), cells_per_axis)};
  }

  const Box& box() const { return box_; }
  const Eigen::VectorXi& cells_per_axis() const { return cells_; }
  const Eigen::VectorXd& cell_width() const { return width_; }
  Eigen::Index dimension() const { return cells_.size(); }
  Eigen::Index size() const { return total_; }
  double cell_volume() const { return width_.prod(); }

  /// Cell containing x, or kOutside. The upper face belongs to the last cell.
  template <typename Derived>
  Eigen::Index cell_of(const Eigen::MatrixBase<Derived>& x) const {
    Eigen::Index index = 0;
    for (Eigen::Index d = 0; d < cells_.size(); ++d) {
      const double v = x[d];
      if (!(v >= box_.lower[d] && v <= box_.upper[d])) return kOutside;
      auto i = static_cast<Eigen::Index>(std::floor((v - box_.lower[d]) / width_[d]));
      if (i >= cells_[d]) i = cells_[d] - 1;
      index = index * cells_[d] + i;
    }
    return index;
  }

  Eigen::VectorXi multi_index(Eigen::Index cell) const {
    Eigen::VectorXi mi(cells_.size());
    for (Eigen::Index d = cells_.size() - 1; d >= 0; --d) {
      mi[d] = static_cast<int>(cell % cells_[d]);
      cell /= cells_[d];
    }
    return mi;
  }

  Eigen::VectorXd cell_center(Eigen::Index cell) const {
    const Eigen::VectorXi mi = multi_index(cell);
    return box_.lower.array() + (mi.cast<double>().array() + 0.5) * width_.array();
  }

  /// All cell centers as columns, in cell-index order.
  Eigen::MatrixXd centers() const {
    Eigen::MatrixXd c(dimension(), total_);
    for (Eigen::Index i = 0; i < total_; ++i) c.col(i) = cell_center(i);
    return c;
  }

  bool operator==(const GridPartition& o) const { return box_ == o.box_ && cells_ == o.cells_; }

 private:
  Box box_;
  Eigen::VectorXi cells_;
  Eigen::VectorXd width_;
  Eigen::Index total_ = 0;
};

}  // namespace wtm
