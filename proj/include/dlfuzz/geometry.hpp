#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <unordered_map>
#include <vector>

namespace dlfuzz {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
    friend bool operator==(Vec2 a, Vec2 b) { return a.x == b.x && a.y == b.y; }
    friend bool operator!=(Vec2 a, Vec2 b) { return !(a == b); }
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::sqrt(a.x * a.x + a.y * a.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }

inline double wrap_angle(double a) {
    while (a > M_PI) a -= 2.0 * M_PI;
    while (a < -M_PI) a += 2.0 * M_PI;
    return a;
}

struct Segment {
    Vec2 a;
    Vec2 b;
};

/// Proper crossing point of two open segments. Parallel, collinear and
/// endpoint-touching configurations yield no intersection.
inline std::optional<Vec2> segment_intersection(const Segment& s1, const Segment& s2) {
    const Vec2 r = s1.b - s1.a;
    const Vec2 s = s2.b - s2.a;
    const double rxs = cross(r, s);
    const double scale = norm(r) * norm(s);
    if (std::abs(rxs) <= 1e-12 * scale) return std::nullopt;
    const Vec2 qp = s2.a - s1.a;
    const double t = cross(qp, s) / rxs;
    const double u = cross(qp, r) / rxs;
    constexpr double eps = 1e-9;
    if (t <= eps || t >= 1.0 - eps || u <= eps || u >= 1.0 - eps) return std::nullopt;
    return s1.a + t * r;
}

/// 2D polyline with cached cumulative arc lengths.
class Polyline {
public:
    Polyline() = default;
    explicit Polyline(std::vector<Vec2> pts) : pts_(std::move(pts)) { rebuild(); }

    const std::vector<Vec2>& points() const { return pts_; }
    std::size_t size() const { return pts_.size(); }
    bool empty() const { return pts_.empty(); }
    double length() const { return cum_.empty() ? 0.0 : cum_.back(); }
    double arc_at(std::size_t i) const { return cum_[i]; }

    Vec2 point_at(double s) const {
        if (pts_.empty()) return {};
        if (pts_.size() == 1 || s <= 0.0) return pts_.front();
        if (s >= length()) return pts_.back();
        const std::size_t i = segment_index(s);
        const double seg = cum_[i + 1] - cum_[i];
        const double t = seg > 0.0 ? (s - cum_[i]) / seg : 0.0;
        return pts_[i] + t * (pts_[i + 1] - pts_[i]);
    }

    /// Unit tangent of the segment containing arc position s.
    Vec2 tangent_at(double s) const {
        if (pts_.size() < 2) return {1.0, 0.0};
        std::size_t i = segment_index(std::fmin(std::fmax(s, 0.0), length()));
        if (i + 1 >= pts_.size()) i = pts_.size() - 2;
        Vec2 d = pts_[i + 1] - pts_[i];
        const double n = norm(d);
        return n > 0.0 ? Vec2{d.x / n, d.y / n} : Vec2{1.0, 0.0};
    }

    double heading_at(double s) const {
        const Vec2 t = tangent_at(s);
        return std::atan2(t.y, t.x);
    }

    struct Projection {
        double arc = 0.0;
        double lateral = 0.0;
        Vec2 point;
    };

    /// Closest point on the polyline; ties resolve to the earliest arc.
    Projection project(Vec2 p) const {
        Projection best;
        best.lateral = std::numeric_limits<double>::infinity();
        if (pts_.empty()) return best;
        if (pts_.size() == 1) return {0.0, distance(p, pts_[0]), pts_[0]};
        for (std::size_t i = 0; i + 1 < pts_.size(); ++i) {
            const Vec2 ab = pts_[i + 1] - pts_[i];
            const double len2 = dot(ab, ab);
            double t = len2 > 0.0 ? dot(p - pts_[i], ab) / len2 : 0.0;
            t = std::fmax(0.0, std::fmin(1.0, t));
            const Vec2 q = pts_[i] + t * ab;
            const double d = distance(p, q);
            if (d < best.lateral - 1e-12) {
                best.lateral = d;
                best.point = q;
                best.arc = cum_[i] + t * std::sqrt(len2);
            }
        }
        return best;
    }

    /// Sub-polyline between two arc positions (s0 <= s1), vertices preserved.
    Polyline slice(double s0, double s1) const {
        std::vector<Vec2> out;
        if (pts_.empty() || s1 < s0) return Polyline{};
        s0 = std::fmax(0.0, s0);
        s1 = std::fmin(length(), s1);
        out.push_back(point_at(s0));
        for (std::size_t i = 0; i < pts_.size(); ++i) {
            if (cum_[i] > s0 + 1e-9 && cum_[i] < s1 - 1e-9) out.push_back(pts_[i]);
        }
        const Vec2 last = point_at(s1);
        if (out.empty() || distance(out.back(), last) > 1e-9) out.push_back(last);
        return Polyline{std::move(out)};
    }

    /// Subdivide so that no segment exceeds `spacing`; original vertices are
    /// kept, so the total length is unchanged.
    Polyline resample(double spacing) const {
        if (pts_.size() < 2) return *this;
        std::vector<Vec2> out;
        out.push_back(pts_.front());
        for (std::size_t i = 0; i + 1 < pts_.size(); ++i) {
            const Vec2 a = pts_[i];
            const Vec2 b = pts_[i + 1];
            const double len = distance(a, b);
            const auto n = static_cast<std::size_t>(std::ceil(len / spacing - 1e-12));
            for (std::size_t k = 1; k <= n; ++k) {
                const double t = static_cast<double>(k) / static_cast<double>(n);
                const Vec2 q = a + t * (b - a);
                if (distance(out.back(), q) > 1e-12) out.push_back(q);
            }
        }
        return Polyline{std::move(out)};
    }

    void append(const Polyline& other) {
        for (const Vec2& p : other.points()) {
            if (pts_.empty() || distance(pts_.back(), p) > 1e-9) pts_.push_back(p);
        }
        rebuild();
    }

private:
    std::size_t segment_index(double s) const {
        // binary search over cumulative lengths
        std::size_t lo = 0, hi = cum_.size() - 1;
        while (lo + 1 < hi) {
            const std::size_t mid = (lo + hi) / 2;
            if (cum_[mid] <= s)
                lo = mid;
            else
                hi = mid;
        }
        return lo;
    }

    void rebuild() {
        cum_.resize(pts_.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < pts_.size(); ++i) {
            if (i > 0) acc += distance(pts_[i - 1], pts_[i]);
            cum_[i] = acc;
        }
    }

    std::vector<Vec2> pts_;
    std::vector<double> cum_;
};

/// Uniform grid over segment bounding boxes; used to prune segment-pair
/// intersection scans. Exact: every crossing pair shares at least one cell.
class SegmentGrid {
public:
    explicit SegmentGrid(double cell = 4.0) : cell_(cell) {}

    void insert(std::size_t index, Vec2 a, Vec2 b) {
        for_cells(a, b, [&](long long key) { cells_[key].push_back(index); });
    }

    template <typename Fn>
    void query(Vec2 a, Vec2 b, Fn&& fn) const {
        for_cells(a, b, [&](long long key) {
            auto it = cells_.find(key);
            if (it == cells_.end()) return;
            for (std::size_t idx : it->second) fn(idx);
        });
    }

private:
    template <typename Fn>
    void for_cells(Vec2 a, Vec2 b, Fn&& fn) const {
        const auto x0 = cell_of(std::fmin(a.x, b.x));
        const auto x1 = cell_of(std::fmax(a.x, b.x));
        const auto y0 = cell_of(std::fmin(a.y, b.y));
        const auto y1 = cell_of(std::fmax(a.y, b.y));
        for (long long cx = x0; cx <= x1; ++cx)
            for (long long cy = y0; cy <= y1; ++cy) fn((cx << 32) ^ (cy & 0xffffffffLL));
    }

    long long cell_of(double v) const { return static_cast<long long>(std::floor(v / cell_)); }

    double cell_;
    std::unordered_map<long long, std::vector<std::size_t>> cells_;
};

}  // namespace dlfuzz
