#include <catch2/catch.hpp>

#include "dlfuzz/geometry.hpp"
#include "dlfuzz/rng.hpp"

using namespace dlfuzz;

TEST_CASE("segment intersection basics") {
    SECTION("symmetric cross") {
        auto hit = segment_intersection({{0, 0}, {2, 2}}, {{0, 2}, {2, 0}});
        REQUIRE(hit.has_value());
        CHECK(hit->x == Approx(1.0).margin(1e-12));
        CHECK(hit->y == Approx(1.0).margin(1e-12));
    }
    SECTION("parallel") {
        CHECK_FALSE(segment_intersection({{0, 0}, {1, 0}}, {{0, 1}, {1, 1}}).has_value());
    }
    SECTION("collinear overlap excluded") {
        CHECK_FALSE(segment_intersection({{0, 0}, {2, 0}}, {{1, 0}, {3, 0}}).has_value());
    }
    SECTION("endpoint touch excluded") {
        CHECK_FALSE(segment_intersection({{0, 0}, {1, 1}}, {{1, 1}, {2, 0}}).has_value());
        CHECK_FALSE(segment_intersection({{0, 0}, {2, 0}}, {{1, 0}, {1, 5}}).has_value());
    }
    SECTION("disjoint") {
        CHECK_FALSE(segment_intersection({{0, 0}, {1, 0}}, {{5, 5}, {6, 6}}).has_value());
    }
}

TEST_CASE("segment intersection is symmetric in its arguments") {
    SplitMix64 rng(42);
    int hits = 0;
    for (int i = 0; i < 2000; ++i) {
        const Segment a{{rng.uniform(-10, 10), rng.uniform(-10, 10)},
                        {rng.uniform(-10, 10), rng.uniform(-10, 10)}};
        const Segment b{{rng.uniform(-10, 10), rng.uniform(-10, 10)},
                        {rng.uniform(-10, 10), rng.uniform(-10, 10)}};
        const auto ab = segment_intersection(a, b);
        const auto ba = segment_intersection(b, a);
        REQUIRE(ab.has_value() == ba.has_value());
        if (ab) {
            ++hits;
            CHECK(distance(*ab, *ba) < 1e-9);
        }
    }
    CHECK(hits > 100);  // the sample actually exercised crossings
}

TEST_CASE("polyline arc queries") {
    Polyline p({{0, 0}, {10, 0}, {10, 10}});
    CHECK(p.length() == Approx(20.0));
    CHECK(p.point_at(5.0).x == Approx(5.0));
    CHECK(p.point_at(15.0).x == Approx(10.0));
    CHECK(p.point_at(15.0).y == Approx(5.0));
    CHECK(p.heading_at(2.0) == Approx(0.0));
    CHECK(p.heading_at(15.0) == Approx(M_PI / 2.0));

    const auto proj = p.project({4.0, 3.0});
    CHECK(proj.arc == Approx(4.0));
    CHECK(proj.lateral == Approx(3.0));
}

TEST_CASE("polyline resample keeps vertices and length") {
    Polyline p({{0, 0}, {3.7, 0}, {3.7, 2.2}});
    Polyline r = p.resample(1.0);
    CHECK(r.length() == Approx(p.length()).epsilon(1e-12));
    for (std::size_t i = 0; i + 1 < r.points().size(); ++i) {
        CHECK(distance(r.points()[i], r.points()[i + 1]) <= 1.0 + 1e-9);
    }
    // original corner vertex survives
    bool found = false;
    for (const Vec2& q : r.points())
        if (distance(q, {3.7, 0}) < 1e-12) found = true;
    CHECK(found);
}

TEST_CASE("polyline slice") {
    Polyline p({{0, 0}, {10, 0}});
    Polyline s = p.slice(2.0, 7.0);
    CHECK(s.length() == Approx(5.0));
    CHECK(s.points().front().x == Approx(2.0));
    CHECK(s.points().back().x == Approx(7.0));
}

TEST_CASE("segment grid finds the same crossings as the direct scan") {
    SplitMix64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Vec2> a_pts, b_pts;
        Vec2 pa{rng.uniform(-20, 20), rng.uniform(-20, 20)};
        Vec2 pb{rng.uniform(-20, 20), rng.uniform(-20, 20)};
        for (int i = 0; i < 30; ++i) {
            a_pts.push_back(pa);
            b_pts.push_back(pb);
            pa = pa + Vec2{rng.uniform(-3, 3), rng.uniform(-3, 3)};
            pb = pb + Vec2{rng.uniform(-3, 3), rng.uniform(-3, 3)};
        }
        std::size_t direct = 0;
        for (std::size_t i = 0; i + 1 < a_pts.size(); ++i)
            for (std::size_t j = 0; j + 1 < b_pts.size(); ++j)
                if (segment_intersection({a_pts[i], a_pts[i + 1]}, {b_pts[j], b_pts[j + 1]})) ++direct;

        SegmentGrid grid(4.0);
        for (std::size_t j = 0; j + 1 < b_pts.size(); ++j) grid.insert(j, b_pts[j], b_pts[j + 1]);
        std::size_t gridded = 0;
        for (std::size_t i = 0; i + 1 < a_pts.size(); ++i) {
            std::vector<std::size_t> cand;
            grid.query(a_pts[i], a_pts[i + 1], [&](std::size_t j) { cand.push_back(j); });
            std::sort(cand.begin(), cand.end());
            cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
            for (std::size_t j : cand)
                if (segment_intersection({a_pts[i], a_pts[i + 1]}, {b_pts[j], b_pts[j + 1]})) ++gridded;
        }
        REQUIRE(gridded == direct);
    }
}

TEST_CASE("splitmix64 determinism and split independence") {
    SplitMix64 a(123), b(123);
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());

    SplitMix64 parent(9);
    const auto c0 = parent.split_at(0);
    const auto c1 = parent.split_at(1);
    CHECK(SplitMix64(c0).next_u64() != SplitMix64(c1).next_u64());
    // split_at does not advance the parent
    SplitMix64 parent2(9);
    CHECK(parent.next_u64() == parent2.next_u64());

    SplitMix64 u(5);
    for (int i = 0; i < 1000; ++i) {
        const double d = u.next_double();
        REQUIRE(d >= 0.0);
        REQUIRE(d < 1.0);
    }
}
