#include <gtest/gtest.h>

#include <random>

#include "opf/cases.hpp"
#include "opf/grid.hpp"
#include "oracles.hpp"

using namespace opf;

TEST(SelectSlack, TieGoesToLowestBus) {
  const NetworkCase c = resolve_case("wb5");
  EXPECT_EQ(c.buses[select_slack(c)].id, 1);
}

TEST(SelectSlack, WidestRangeWins) {
  const NetworkCase c = resolve_case("case9mod");
  EXPECT_EQ(c.buses[select_slack(c)].id, 2);
}

TEST(SelectSlack, SingleGeneratorAndNone) {
  const NetworkCase c = load_case(oracle::two_bus_document({1.0, 0.5, 0.2, 0.01, 0.1, 0.0}));
  EXPECT_EQ(select_slack(c), 0);
  NetworkCase none = c;
  none.generators.clear();
  EXPECT_THROW(select_slack(none), std::invalid_argument);
}

TEST(EnumerateGrid, Wb5RawCounts) {
  const NetworkCase c = resolve_case("wb5");
  const GridSpec g = enumerate_grid(c, BoundSet::from_case(c), 0.01, 0.001, select_slack(c));
  ASSERT_EQ(g.axes.size(), 3u);
  EXPECT_EQ(g.max_indices(), (std::vector<int>{5000, 100, 100}));
  EXPECT_EQ(g.size(), 5001ull * 101 * 101);
}

TEST(EnumerateGrid, DegenerateRanges) {
  NetworkCase c = resolve_case("wb5");
  const int p5 = c.bus_index(5);
  for (auto& g : c.generators)
    if (g.bus == p5) g.p_max = g.p_min;
  const GridSpec g = enumerate_grid(c, BoundSet::from_case(c), 0.01, 0.5, select_slack(c));
  EXPECT_EQ(g.max_indices(), (std::vector<int>{0, 0, 0}));
  EXPECT_EQ(g.size(), 1u);
}

TEST(EnumerateGrid, RejectsBadInput) {
  const NetworkCase c = resolve_case("wb5");
  const BoundSet b = BoundSet::from_case(c);
  EXPECT_THROW(enumerate_grid(c, b, 0.0, 0.01, 0), std::invalid_argument);
  EXPECT_THROW(enumerate_grid(c, b, 0.1, -1.0, 0), std::invalid_argument);
  EXPECT_THROW(enumerate_grid(c, b, 0.1, 0.01, 1), std::invalid_argument);
}

TEST(GridSpec, FlatIndexRoundTrip) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> len(1, 6), off(-3, 3);
  for (int trial = 0; trial < 200; ++trial) {
    GridSpec g;
    const int nd = 1 + trial % 4;
    for (int d = 0; d < nd; ++d) {
      GridAxis a;
      a.first = off(rng);
      a.last = a.first + len(rng) - 1;
      g.axes.push_back(a);
    }
    for (std::uint64_t f = 0; f < g.size(); ++f) {
      const auto idx = g.indices(f);
      ASSERT_TRUE(g.contains(idx));
      ASSERT_EQ(g.flat(idx), f);
    }
    auto bad = g.indices(0);
    bad[0] = g.axes[0].last + 1;
    EXPECT_THROW(g.flat(bad), std::out_of_range);
  }
}

TEST(GridSpec, LastAxisRunsFastest) {
  const NetworkCase c = resolve_case("wb5");
  const GridSpec g = enumerate_grid(c, BoundSet::from_case(c), 0.5, 0.05, select_slack(c));
  EXPECT_EQ(g.indices(1), (std::vector<int>{0, 0, 1}));
  const Setpoints s = g.setpoints({2, 1, 0}, c.n_bus());
  EXPECT_DOUBLE_EQ(s.p(c.bus_index(5)), 1.0);
  EXPECT_DOUBLE_EQ(s.v(c.bus_index(1)), 1.0);
  EXPECT_DOUBLE_EQ(s.v(c.bus_index(5)), 0.95);
}

TEST(RestrictGrid, SubsetOnSameLattice) {
  const NetworkCase c = resolve_case("wb5");
  const BoundSet raw = BoundSet::from_case(c);
  const GridSpec base = enumerate_grid(c, raw, 0.1, 0.01, select_slack(c));
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    BoundSet b = raw;
    for (int bus : c.generator_buses()) {
      auto& x = b.bus[bus];
      const double p0 = x.p_min + u(rng) * (x.p_max - x.p_min), p1 = x.p_min + u(rng) * (x.p_max - x.p_min);
      x.p_min = std::min(p0, p1);
      x.p_max = std::max(p0, p1);
      const double v0 = x.v_sq_min + u(rng) * (x.v_sq_max - x.v_sq_min);
      const double v1 = x.v_sq_min + u(rng) * (x.v_sq_max - x.v_sq_min);
      x.v_sq_min = std::min(v0, v1);
      x.v_sq_max = std::max(v0, v1);
    }
    const GridSpec r = restrict_grid(base, b);
    for (std::size_t d = 0; d < r.axes.size(); ++d) {
      EXPECT_EQ(r.axes[d].origin, base.axes[d].origin);
      EXPECT_GE(r.axes[d].first, base.axes[d].first);
      EXPECT_LE(r.axes[d].last, base.axes[d].last);
    }
    // Every kept point lies in b; every dropped neighbour just outside does not.
    for (std::size_t d = 0; d < r.axes.size(); ++d) {
      const auto& a = r.axes[d];
      const auto& x = b.bus[a.bus];
      auto inside = [&](int k) {
        const double v = a.value(k);
        return a.kind == GridAxis::Kind::kActivePower ? v >= x.p_min - 1e-9 && v <= x.p_max + 1e-9
                                                      : v * v >= x.v_sq_min - 1e-9 && v * v <= x.v_sq_max + 1e-9;
      };
      for (int k = a.first; k <= a.last; ++k) EXPECT_TRUE(inside(k));
      if (a.first > base.axes[d].first) EXPECT_FALSE(inside(a.first - 1));
      if (a.last < base.axes[d].last) EXPECT_FALSE(inside(a.last + 1));
    }
  }
}

TEST(SubBox, ParseAndApply) {
  const NetworkCase c = resolve_case("wb5");
  const SubBox box = parse_box("P5=2.0:2.4,V=1.0:1.05", c);
  ASSERT_EQ(box.p.size(), 1u);
  EXPECT_EQ(box.v.size(), 2u);
  const NetworkCase boxed = apply_box(c, box);
  const int b5 = c.bus_index(5);
  EXPECT_DOUBLE_EQ(boxed.p_min(b5), 2.0);
  EXPECT_DOUBLE_EQ(boxed.p_max(b5), 2.4);
  EXPECT_DOUBLE_EQ(boxed.buses[c.bus_index(1)].v_min, 1.0);
  EXPECT_DOUBLE_EQ(boxed.buses[c.bus_index(3)].v_min, c.buses[c.bus_index(3)].v_min);
}

TEST(SubBox, RejectsBadSpecs) {
  const NetworkCase c = resolve_case("wb5");
  EXPECT_THROW(parse_box("P5=2.0", c), std::invalid_argument);
  EXPECT_THROW(parse_box("Q5=0:1", c), std::invalid_argument);
  EXPECT_THROW(parse_box("P9=0:1", c), std::invalid_argument);
  EXPECT_THROW(parse_box("P5=a:1", c), std::invalid_argument);
  EXPECT_THROW(apply_box(c, parse_box("P5=2.0:60.0", c)), std::invalid_argument);
  EXPECT_THROW(apply_box(c, parse_box("P2=0:0", c)), std::invalid_argument);
  EXPECT_THROW(apply_box(c, parse_box("V5=1.1:1.0", c)), std::invalid_argument);
}
