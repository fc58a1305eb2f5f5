#include "gensafe/action_grid.hpp"

#include <algorithm>
#include <cmath>

namespace gensafe {

ActionGrid::ActionGrid(std::vector<Interval> bounds, int cells_per_dim)
    : bounds_(std::move(bounds)), k_(cells_per_dim) {
  if (k_ <= 0) throw InvalidArgument("cells per dimension must be positive");
  if (bounds_.empty() || bounds_.size() > 3) {
    throw InvalidArgument("action grid supports 1 to 3 action dimensions");
  }
  num_cells_ = 1;
  for (const auto& b : bounds_) {
    if (!(b.hi > b.lo)) throw InvalidArgument("degenerate action bounds");
    num_cells_ *= k_;
  }
}

int ActionGrid::index(std::span<const double> action) const {
  if (action.size() != bounds_.size()) throw InvalidArgument("action has wrong dimension");
  require_finite(action, "action");
  int idx = 0, stride = 1;
  for (std::size_t d = 0; d < bounds_.size(); ++d) {
    const double w = bounds_[d].width() / k_;
    int i = static_cast<int>(std::floor((action[d] - bounds_[d].lo) / w));
    i = std::clamp(i, 0, k_ - 1);
    idx += i * stride;
    stride *= k_;
  }
  return idx;
}

std::vector<int> ActionGrid::coordinates(int index) const {
  if (index < 0 || index >= num_cells_) throw InvalidArgument("cell index out of range");
  std::vector<int> c(bounds_.size());
  for (auto& v : c) {
    v = index % k_;
    index /= k_;
  }
  return c;
}

Vector ActionGrid::center(int index) const {
  const auto c = coordinates(index);
  Vector out(bounds_.size());
  for (std::size_t d = 0; d < bounds_.size(); ++d) {
    const double w = bounds_[d].width() / k_;
    out[d] = bounds_[d].lo + (c[d] + 0.5) * w;
  }
  return out;
}

std::vector<Interval> ActionGrid::cell_box(int index) const {
  const auto c = coordinates(index);
  std::vector<Interval> box(bounds_.size());
  for (std::size_t d = 0; d < bounds_.size(); ++d) {
    const double w = bounds_[d].width() / k_;
    box[d] = {bounds_[d].lo + c[d] * w,
              c[d] + 1 == k_ ? bounds_[d].hi : bounds_[d].lo + (c[d] + 1) * w};
  }
  return box;
}

Vector ActionGrid::clamp(std::span<const double> action) const {
  Vector out(action.begin(), action.end());
  for (std::size_t d = 0; d < bounds_.size(); ++d) {
    out[d] = std::clamp(out[d], bounds_[d].lo, bounds_[d].hi);
  }
  return out;
}

Vector ActionGrid::project_into_cell(std::span<const double> target, int index) const {
  const auto box = cell_box(index);
  const auto coords = coordinates(index);
  Vector out(target.begin(), target.end());
  for (std::size_t d = 0; d < box.size(); ++d) {
    out[d] = std::clamp(out[d], box[d].lo, box[d].hi);
  }
  // Faces shared with the next cell up belong to that cell: step inside.
  for (int guard = 0; guard < 64 && this->index(out) != index; ++guard) {
    for (std::size_t d = 0; d < box.size(); ++d) {
      const double w = bounds_[d].width() / k_;
      const int i = std::clamp(static_cast<int>(std::floor((out[d] - bounds_[d].lo) / w)), 0, k_ - 1);
      if (i > coords[d]) out[d] = std::nextafter(out[d], box[d].lo);
      if (i < coords[d]) out[d] = std::nextafter(out[d], box[d].hi);
    }
  }
  return out;
}

}  // namespace gensafe
