#include "mpq/rangeset.hpp"

#include <iterator>

namespace mpq {

RangeSet::RangeSet(std::initializer_list<Interval> intervals) {
  for (const auto& iv : intervals) insert(iv);
}

bool RangeSet::insert(std::uint64_t v) {
  if (contains(v)) return false;
  insert(Interval{v, v});
  return true;
}

void RangeSet::insert(Interval iv) {
  std::uint64_t lo = iv.lo;
  std::uint64_t hi = iv.hi;
  // First interval that could touch [lo, hi]: the one starting at or before lo.
  auto it = map_.upper_bound(lo);
  if (it != map_.begin()) {
    auto prev = std::prev(it);
    if (prev->second + 1 >= lo) it = prev;  // overlaps or adjacent
  }
  while (it != map_.end() && (hi == UINT64_MAX || it->first <= hi + 1)) {
    lo = std::min(lo, it->first);
    hi = std::max(hi, it->second);
    it = map_.erase(it);
  }
  map_.emplace(lo, hi);
}

void RangeSet::remove(Interval iv) {
  auto it = map_.upper_bound(iv.lo);
  if (it != map_.begin()) {
    auto prev = std::prev(it);
    if (prev->second >= iv.lo) it = prev;
  }
  while (it != map_.end() && it->first <= iv.hi) {
    const std::uint64_t lo = it->first;
    const std::uint64_t hi = it->second;
    it = map_.erase(it);
    if (lo < iv.lo) map_.emplace(lo, iv.lo - 1);
    if (hi > iv.hi) {
      map_.emplace(iv.hi + 1, hi);
      break;
    }
  }
}

bool RangeSet::contains(std::uint64_t v) const {
  auto it = map_.upper_bound(v);
  if (it == map_.begin()) return false;
  return std::prev(it)->second >= v;
}

bool RangeSet::covers(Interval iv) const {
  auto it = map_.upper_bound(iv.lo);
  if (it == map_.begin()) return false;
  auto prev = std::prev(it);
  return prev->first <= iv.lo && prev->second >= iv.hi;
}

std::vector<Interval> RangeSet::missing(Interval iv) const {
  std::vector<Interval> out;
  std::uint64_t cursor = iv.lo;
  auto it = map_.upper_bound(iv.lo);
  if (it != map_.begin()) --it;
  for (; it != map_.end() && it->first <= iv.hi; ++it) {
    if (it->second < cursor) continue;
    if (it->first > cursor) out.push_back({cursor, it->first - 1});
    if (it->second >= iv.hi) return out;
    cursor = it->second + 1;
  }
  out.push_back({cursor, iv.hi});
  return out;
}

std::uint64_t RangeSet::cardinality() const {
  std::uint64_t n = 0;
  for (const auto& [lo, hi] : map_) n += hi - lo + 1;
  return n;
}

std::vector<Interval> RangeSet::intervals() const {
  std::vector<Interval> out;
  out.reserve(map_.size());
  for (const auto& [lo, hi] : map_) out.push_back({lo, hi});
  return out;
}

std::uint64_t RangeSet::contiguous_from(std::uint64_t start) const {
  auto it = map_.upper_bound(start);
  if (it == map_.begin()) return 0;
  --it;
  if (it->second < start) return 0;
  return it->second - start + 1;
}

}  // namespace mpq
