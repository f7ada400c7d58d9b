#ifndef SMATTACK_GEOMETRY_HPP
#define SMATTACK_GEOMETRY_HPP

#include <algorithm>
#include <cstdint>
#include <stdexcept>

namespace smattack {

/// All coordinates are integers in database units.
struct Point {
  std::int64_t x = 0;
  std::int64_t y = 0;

  friend bool operator==(const Point&, const Point&) = default;
  friend auto operator<=>(const Point&, const Point&) = default;
};

struct Rect {
  std::int64_t x_min = 0, y_min = 0, x_max = 0, y_max = 0;

  std::int64_t width() const { return x_max - x_min; }
  std::int64_t height() const { return y_max - y_min; }
  bool contains(Point p) const {
    return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
  }
  friend bool operator==(const Rect&, const Rect&) = default;
};

enum class Axis { horizontal, vertical };

/// Axis-aligned, zero-width wire segment. Endpoints are kept normalized
/// (a <= b lexicographically) so geometric predicates stay branch-light.
struct Segment {
  Point a, b;

  Segment() = default;
  Segment(Point p, Point q) : a(p), b(q) {
    if (p.x != q.x && p.y != q.y)
      throw std::invalid_argument("segment is not axis-aligned");
    if (b < a) std::swap(a, b);
  }

  bool horizontal() const { return a.y == b.y; }
  bool point_like() const { return a == b; }
  Axis axis() const { return horizontal() ? Axis::horizontal : Axis::vertical; }
  std::int64_t length() const { return (b.x - a.x) + (b.y - a.y); }

  bool contains(Point p) const {
    return p.x >= a.x && p.x <= b.x && p.y >= a.y && p.y <= b.y &&
           (horizontal() ? p.y == a.y : p.x == a.x || point_like());
  }

  friend bool operator==(const Segment&, const Segment&) = default;
};

/// True if two axis-aligned segments share at least one point.
inline bool segments_touch(const Segment& s, const Segment& t) {
  auto overlap = [](std::int64_t lo1, std::int64_t hi1, std::int64_t lo2,
                    std::int64_t hi2) { return lo1 <= hi2 && lo2 <= hi1; };
  if (!overlap(s.a.x, s.b.x, t.a.x, t.b.x)) return false;
  if (!overlap(s.a.y, s.b.y, t.a.y, t.b.y)) return false;
  // Bounding boxes overlap; with axis-aligned segments this is sufficient
  // unless both are parallel on distinct tracks (excluded above since a
  // horizontal pair only overlaps boxes when on the same y).
  if (s.axis() == t.axis()) return true;
  const Segment& h = s.horizontal() ? s : t;
  const Segment& v = s.horizontal() ? t : s;
  return v.a.x >= h.a.x && v.a.x <= h.b.x && h.a.y >= v.a.y && h.a.y <= v.b.y;
}

inline std::int64_t manhattan(Point p, Point q) {
  return std::llabs(p.x - q.x) + std::llabs(p.y - q.y);
}

inline std::int64_t along(Point p, Axis ax) {
  return ax == Axis::horizontal ? p.x : p.y;
}

inline Axis other_axis(Axis ax) {
  return ax == Axis::horizontal ? Axis::vertical : Axis::horizontal;
}

}  // namespace smattack

#endif
