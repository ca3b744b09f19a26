#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "dmfusion/types.hpp"

namespace dmfusion {

// Uniform hash grid over 3-D points keyed by integer ids. Supports moving
// points in place, which the fusion stage needs after every merge.
class SpatialGrid {
 public:
  using Id = std::uint32_t;

  explicit SpatialGrid(double cell_size = 0.02);

  double cell_size() const { return cell_size_; }
  std::size_t size() const { return count_; }
  void clear();

  void insert(Id id, const Vec3& p);
  // `from` must be the position the id was inserted (or last moved) with.
  void move(Id id, const Vec3& from, const Vec3& to);

  // All ids with |p - q| <= radius, ascending.
  void radius_search(const Vec3& q, double radius, std::vector<Id>& out) const;

  // Closest id with |p - q| <= radius; ties go to the smaller id.
  std::optional<Id> nearest(const Vec3& q, double radius) const;

 private:
  struct Entry {
    Id id;
    Vec3 p;
  };
  using Key = std::uint64_t;

  Key key_of(const Vec3& p) const;
  static Key pack(std::int64_t x, std::int64_t y, std::int64_t z);

  template <typename Visit>
  void for_each_in_box(const Vec3& q, double radius, Visit&& visit) const;

  double cell_size_;
  double inv_cell_;
  std::size_t count_ = 0;
  std::unordered_map<Key, std::vector<Entry>> cells_;
};

}  // namespace dmfusion
