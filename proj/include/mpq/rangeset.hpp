#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "mpq/types.hpp"

namespace mpq {

// Ordered set of disjoint, non-adjacent closed intervals. Adjacent or
// overlapping inserts are merged.
class RangeSet {
 public:
  using Map = std::map<std::uint64_t, std::uint64_t>;  // lo -> hi

  RangeSet() = default;
  RangeSet(std::initializer_list<Interval> intervals);

  // Returns false if `v` was already present.
  bool insert(std::uint64_t v);
  void insert(Interval iv);
  void remove(Interval iv);

  bool contains(std::uint64_t v) const;
  // True if every value of `iv` is present.
  bool covers(Interval iv) const;

  // Parts of `iv` not present in the set, ascending.
  std::vector<Interval> missing(Interval iv) const;

  bool empty() const { return map_.empty(); }
  std::size_t interval_count() const { return map_.size(); }
  std::uint64_t cardinality() const;
  std::uint64_t min() const { return map_.begin()->first; }
  std::uint64_t max() const { return map_.rbegin()->second; }

  std::vector<Interval> intervals() const;
  const Map& map() const { return map_; }

  // Length of the prefix [start, x) fully present.
  std::uint64_t contiguous_from(std::uint64_t start) const;

  friend bool operator==(const RangeSet&, const RangeSet&) = default;

 private:
  Map map_;
};

}  // namespace mpq
