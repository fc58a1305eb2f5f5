#pragma once

#include <span>
#include <vector>

#include "gensafe/common.hpp"
#include "gensafe/env.hpp"

namespace gensafe {

/// Uniform grid of k cells per action dimension. Cell indices are 0-based
/// and mixed-radix with dimension 0 fastest, so index 0 is the all-lower
/// corner and k^n - 1 the all-upper corner. A point on a shared cell face
/// belongs to the upper cell.
class ActionGrid {
 public:
  ActionGrid() = default;
  ActionGrid(std::vector<Interval> bounds, int cells_per_dim);

  int cells_per_dim() const { return k_; }
  int dim() const { return static_cast<int>(bounds_.size()); }
  int num_cells() const { return num_cells_; }
  const std::vector<Interval>& bounds() const { return bounds_; }

  /// Nearest cell center (clamping out-of-bounds coordinates).
  int index(std::span<const double> action) const;
  Vector center(int index) const;
  /// Closed box [lo, hi] per dimension of a cell.
  std::vector<Interval> cell_box(int index) const;
  std::vector<int> coordinates(int index) const;

  Vector clamp(std::span<const double> action) const;

  /// Closest point to `target` that `index()` maps to the given cell.
  Vector project_into_cell(std::span<const double> target, int index) const;

 private:
  std::vector<Interval> bounds_;
  int k_ = 0;
  int num_cells_ = 0;
};

}  // namespace gensafe
