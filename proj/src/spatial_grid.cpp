#include "dmfusion/spatial_grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dmfusion {

SpatialGrid::SpatialGrid(double cell_size) : cell_size_(cell_size), inv_cell_(1.0 / cell_size) {
  if (!(cell_size > 0)) throw ConfigError("spatial index cell size must be > 0");
}

void SpatialGrid::clear() {
  cells_.clear();
  count_ = 0;
}

SpatialGrid::Key SpatialGrid::pack(std::int64_t x, std::int64_t y, std::int64_t z) {
  constexpr std::uint64_t mask = (1ull << 21) - 1;
  return ((static_cast<std::uint64_t>(x) & mask) << 42) | ((static_cast<std::uint64_t>(y) & mask) << 21) |
         (static_cast<std::uint64_t>(z) & mask);
}

SpatialGrid::Key SpatialGrid::key_of(const Vec3& p) const {
  return pack(static_cast<std::int64_t>(std::floor(p.x() * inv_cell_)),
              static_cast<std::int64_t>(std::floor(p.y() * inv_cell_)),
              static_cast<std::int64_t>(std::floor(p.z() * inv_cell_)));
}

void SpatialGrid::insert(Id id, const Vec3& p) {
  cells_[key_of(p)].push_back({id, p});
  ++count_;
}

void SpatialGrid::move(Id id, const Vec3& from, const Vec3& to) {
  const Key a = key_of(from), b = key_of(to);
  auto it = cells_.find(a);
  if (it == cells_.end()) throw Error("spatial index: moved id not found");
  auto& cell = it->second;
  auto e = std::find_if(cell.begin(), cell.end(), [id](const Entry& x) { return x.id == id; });
  if (e == cell.end()) throw Error("spatial index: moved id not found");
  if (a == b) {
    e->p = to;
    return;
  }
  cell.erase(e);
  if (cell.empty()) cells_.erase(it);
  cells_[b].push_back({id, to});
}

template <typename Visit>
void SpatialGrid::for_each_in_box(const Vec3& q, double radius, Visit&& visit) const {
  const auto lo = ((q.array() - radius) * inv_cell_).floor().cast<std::int64_t>().eval();
  const auto hi = ((q.array() + radius) * inv_cell_).floor().cast<std::int64_t>().eval();
  for (std::int64_t x = lo[0]; x <= hi[0]; ++x)
    for (std::int64_t y = lo[1]; y <= hi[1]; ++y)
      for (std::int64_t z = lo[2]; z <= hi[2]; ++z) {
        auto it = cells_.find(pack(x, y, z));
        if (it == cells_.end()) continue;
        for (const Entry& e : it->second) visit(e);
      }
}

void SpatialGrid::radius_search(const Vec3& q, double radius, std::vector<Id>& out) const {
  out.clear();
  const double r2 = radius * radius;
  for_each_in_box(q, radius, [&](const Entry& e) {
    if ((e.p - q).squaredNorm() <= r2) out.push_back(e.id);
  });
  std::sort(out.begin(), out.end());
}

std::optional<SpatialGrid::Id> SpatialGrid::nearest(const Vec3& q, double radius) const {
  double best = radius * radius;
  std::optional<Id> found;
  const Eigen::Array3d scaled = q.array() * inv_cell_;
  const Eigen::Array3d base = scaled.floor();
  const Eigen::Array3d frac = scaled - base;
  // Any point in a cell k rings out is at least (k - 1) cells plus this far away.
  const double margin = frac.min(1.0 - frac).minCoeff() * cell_size_;
  const auto c = base.cast<std::int64_t>().eval();
  const auto lo = ((q.array() - radius) * inv_cell_).floor().cast<std::int64_t>().eval();
  const auto hi = ((q.array() + radius) * inv_cell_).floor().cast<std::int64_t>().eval();
  const std::int64_t rings = (hi - c).max(c - lo).maxCoeff();

  auto visit_cell = [&](std::int64_t x, std::int64_t y, std::int64_t z) {
    auto it = cells_.find(pack(x, y, z));
    if (it == cells_.end()) return;
    for (const Entry& e : it->second) {
      const double d2 = (e.p - q).squaredNorm();
      if (d2 < best || (d2 == best && (!found || e.id < *found))) {
        best = d2;
        found = e.id;
      }
    }
  };

  for (std::int64_t k = 0; k <= rings; ++k) {
    if (k > 0) {
      const double bound = static_cast<double>(k - 1) * cell_size_ + margin;
      if (bound * bound > best) break;
    }
    for (std::int64_t x = std::max(c[0] - k, lo[0]); x <= std::min(c[0] + k, hi[0]); ++x)
      for (std::int64_t y = std::max(c[1] - k, lo[1]); y <= std::min(c[1] + k, hi[1]); ++y) {
        const bool edge = std::abs(x - c[0]) == k || std::abs(y - c[1]) == k;
        if (edge) {
          for (std::int64_t z = std::max(c[2] - k, lo[2]); z <= std::min(c[2] + k, hi[2]); ++z) visit_cell(x, y, z);
        } else {
          if (c[2] - k >= lo[2]) visit_cell(x, y, c[2] - k);
          if (k > 0 && c[2] + k <= hi[2]) visit_cell(x, y, c[2] + k);
        }
      }
  }
  return found;
}

}  // namespace dmfusion
