#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <random>

#include "squasplat/random.hpp"
#include "squasplat/temporal.hpp"
#include "support/oracles.hpp"

using namespace squasplat;

namespace {

SuperquadricCluster cluster_at(const Vec3& p, std::vector<Vec3> scales) {
  SuperquadricCluster c;
  c.ref_point = p;
  c.semantics = one_hot(2, 0);
  for (const Vec3& s : scales) {
    ClusterMember m;
    m.scale = s;
    c.members.push_back(m);
  }
  return c;
}

QueryState random_query(std::mt19937_64& rng, std::uint64_t id, double spread) {
  std::uniform_real_distribution<double> u(-spread, spread), s(0.1, 3.0);
  const int k = 1 + static_cast<int>(rng() % 3);
  std::vector<Vec3> scales;
  for (int i = 0; i < k; ++i) scales.emplace_back(s(rng), s(rng), s(rng));
  return make_query(id, cluster_at(Vec3(u(rng), u(rng), u(rng)), scales));
}

FramePose random_pose(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-5, 5);
  return FramePose::from_quaternion(oracle::random_quaternion(rng),
                                    Vec3(u(rng), u(rng), u(rng)));
}

}  // namespace

TEST_CASE("counter generator") {
  // First SplitMix64 output for seed 0.
  CounterRng rng(0);
  CHECK(rng.next() == 0xE220A8397B1DCDAFULL);
  CounterRng again(0);
  again.next();
  CHECK(again.next() == rng.next());
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
  CHECK(derive_seed(1, 2) != derive_seed(2, 1));
}

TEST_CASE("sample indices is a partial Fisher-Yates draw") {
  for (std::uint64_t seed : {0ULL, 7ULL, 123456789ULL}) {
    const auto got = sample_indices(50, 20, seed);
    std::vector<std::size_t> slots(50);
    std::iota(slots.begin(), slots.end(), 0);
    for (std::size_t j = 0; j < 20; ++j) {
      const std::uint64_t r = mix64(seed + (j + 1) * kGoldenGamma);
      std::swap(slots[j], slots[j + r % (50 - j)]);
    }
    CHECK(got == std::vector<std::size_t>(slots.begin(), slots.begin() + 20));
    std::set<std::size_t> distinct(got.begin(), got.end());
    CHECK(distinct.size() == 20);
  }
  CHECK(sample_indices(5, 0, 1).empty());
  CHECK(sample_indices(5, 5, 1).size() == 5);
}

TEST_CASE("foreground score") {
  CHECK(foreground_score(cluster_at(Vec3::Zero(), {Vec3(1, 2, 3)})) == 3.0);
  CHECK(foreground_score(cluster_at(Vec3::Zero(), {Vec3(1, 2, 3), Vec3(0.5, 0.5, 4)})) ==
        4.0);
  CHECK_THROWS_AS(foreground_score(cluster_at(Vec3::Zero(), {})), std::invalid_argument);

  std::mt19937_64 rng(41);
  for (int t = 0; t < 200; ++t) {
    auto q = random_query(rng, 0, 10.0);
    double best = 0.0;
    for (const auto& m : q.cluster.members) {
      for (int a = 0; a < 3; ++a) best = std::max(best, m.scale[a]);
    }
    CHECK(foreground_score(q.cluster) == best);
    std::shuffle(q.cluster.members.begin(), q.cluster.members.end(), rng);
    for (auto& m : q.cluster.members) {
      m.rotation = oracle::random_quaternion(rng);
      m.offset = Vec3(1, 2, 3);
      m.opacity = 0.2;
    }
    q.cluster.semantics = one_hot(2, 1);
    CHECK(foreground_score(q.cluster) == best);
  }
}

TEST_CASE("pose algebra") {
  std::mt19937_64 rng(42);
  for (int t = 0; t < 100; ++t) {
    const FramePose a = random_pose(rng);
    const FramePose b = random_pose(rng);
    CHECK_NOTHROW(a.validate());
    const FramePose id = a.then(a.inverse());
    CHECK((id.rotation - Mat3::Identity()).norm() <= 1e-9);
    CHECK(id.translation.norm() <= 1e-9);
    const Vec3 p(0.3, -1.0, 2.0);
    CHECK((a.then(b).apply(p) - b.apply(a.apply(p))).norm() <= 1e-9);
  }
  FramePose bad;
  bad.rotation(0, 0) = 2.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("transform query") {
  SuperquadricCluster c = cluster_at(Vec3(1, 0, 0), {Vec3(1, 2, 3)});
  c.members[0].offset = Vec3(0.5, 0, 0);
  const QueryState q = make_query(3, c);
  CHECK(q.cluster.ref_point == q.ref_point);

  const QueryState same = transform_query(q, FramePose::identity());
  CHECK(same.ref_point == q.ref_point);
  CHECK(same.cluster.members[0].offset == q.cluster.members[0].offset);
  CHECK(same.cluster.members[0].rotation == q.cluster.members[0].rotation);

  FramePose shift;
  shift.translation = Vec3(1, 0, 0);
  const QueryState moved = transform_query(q, shift);
  CHECK(moved.ref_point == Vec3(2, 0, 0));
  CHECK(expand_cluster(moved.cluster)[0].center == Vec3(2.5, 0, 0));
  CHECK(moved.cluster.members[0].rotation == q.cluster.members[0].rotation);

  // 90 degree yaw then a lift of 2 m: (1,0,0) -> (0,1,2), the member center
  // (1.5,0,0) -> (0,1.5,2), identity orientation -> yaw quaternion.
  const FramePose yaw = FramePose::from_quaternion(
      quat_from_axis_angle(Vec3::UnitZ(), std::numbers::pi / 2), Vec3(0, 0, 2));
  const QueryState turned = transform_query(q, yaw);
  CHECK(turned.ref_point.isApprox(Vec3(0, 1, 2), 1e-12));
  CHECK(expand_cluster(turned.cluster)[0].center.isApprox(Vec3(0, 1.5, 2), 1e-12));
  const double h = std::sqrt(0.5);
  CHECK(turned.cluster.members[0].rotation.isApprox(Vec4(h, 0, 0, h), 1e-12));
  CHECK(turned.cluster.members[0].scale == Vec3(1, 2, 3));

  std::mt19937_64 rng(43);
  for (int t = 0; t < 100; ++t) {
    QueryState r = random_query(rng, 1, 5.0);
    for (auto& m : r.cluster.members) {
      m.rotation = oracle::random_quaternion(rng);
      m.offset = Vec3(0.1, -0.2, 0.3);
    }
    const FramePose p = random_pose(rng);
    const QueryState back = transform_query(transform_query(r, p), p.inverse());
    CHECK((back.ref_point - r.ref_point).norm() <= 1e-9);
    for (std::size_t k = 0; k < r.cluster.members.size(); ++k) {
      CHECK((back.cluster.members[k].offset - r.cluster.members[k].offset).norm() <= 1e-9);
      CHECK((quat_canonical(back.cluster.members[k].rotation) -
             quat_canonical(r.cluster.members[k].rotation)).norm() <= 1e-9);
    }
  }
}

TEST_CASE("distance threshold") {
  const std::vector<QueryState> prev = {make_query(0, cluster_at(Vec3::Zero(), {Vec3::Ones()}))};
  PropagateParams params;
  params.n_p = 1;
  params.n_q = 3;
  params.tau = 1.0;
  for (double d : {0.5, 1.0, 1.5}) {
    const std::vector<QueryState> pool = {
        make_query(10, cluster_at(Vec3(d, 0, 0), {Vec3::Ones()}))};
    const auto r = propagate(prev, FramePose::identity(), pool, params);
    CHECK(r.propagated == 1);
    CHECK(r.initialized == (d < 1.0 ? 0 : 1));  // exactly tau is kept
    CHECK(r.shortfall);
  }
}

TEST_CASE("propagate matches the brute-force reference") {
  std::mt19937_64 rng(44);
  for (int t = 0; t < 20; ++t) {
    oracle::PropagateCase pc;
    const int n_prev = t == 0 ? 500 : 50 + static_cast<int>(rng() % 400);
    for (int i = 0; i < n_prev; ++i) {
      pc.previous.push_back(random_query(rng, static_cast<std::uint64_t>(i), 30.0));
    }
    // A few exact ties exercise the id tie rule.
    for (int i = 0; i + 7 < n_prev; i += 7) {
      pc.previous[i].cluster.members = pc.previous[i + 7].cluster.members;
    }
    std::shuffle(pc.previous.begin(), pc.previous.end(), rng);
    for (int i = 0; i < 800; ++i) {
      pc.pool.push_back(random_query(rng, static_cast<std::uint64_t>(1000 + i), 30.0));
    }
    pc.pose = random_pose(rng);
    pc.params.n_p = t == 0 ? 500 : static_cast<int>(rng() % n_prev) + 1;
    pc.params.n_q = pc.params.n_p + (t == 0 ? 100 : static_cast<int>(rng() % 300));
    pc.params.tau = t == 0 ? 1.0 : 0.5 + (rng() % 30) / 10.0;
    pc.params.seed = rng();

    const auto r = propagate(pc.previous, pc.pose, pc.pool, pc.params);
    const auto want = oracle::propagate_reference(pc);
    REQUIRE(r.queries.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
      CHECK(r.queries[i].id == want[i].first);
      CHECK(r.queries[i].provenance == want[i].second);
    }
    CHECK(static_cast<int>(r.queries.size()) <= pc.params.n_q);
    // No initialized query sits within tau of a propagated one.
    for (const auto& a : r.queries) {
      if (a.provenance != Provenance::kInitialized) continue;
      for (const auto& b : r.queries) {
        if (b.provenance == Provenance::kPropagated) {
          CHECK((a.ref_point - b.ref_point).norm() >= pc.params.tau);
        }
      }
    }
    if (t == 0) {
      CHECK(r.propagated == 500);
      CHECK(r.initialized == 100);
    }
  }
}

TEST_CASE("propagate argument errors") {
  std::mt19937_64 rng(45);
  std::vector<QueryState> prev;
  for (int i = 0; i < 3; ++i) prev.push_back(random_query(rng, i, 1.0));
  PropagateParams p;
  p.n_p = 4;
  p.n_q = 10;
  CHECK_THROWS_AS(propagate(prev, FramePose::identity(), {}, p), std::invalid_argument);
  p.n_p = 3;
  p.n_q = 2;
  CHECK_THROWS_AS(propagate(prev, FramePose::identity(), {}, p), std::invalid_argument);
}

TEST_CASE("stream runs") {
  std::mt19937_64 rng(46);
  auto frame_clusters = [&](int n) {
    std::vector<SuperquadricCluster> out;
    for (int i = 0; i < n; ++i) out.push_back(random_query(rng, 0, 20.0).cluster);
    return out;
  };
  PropagateParams params;
  params.n_p = 40;
  params.n_q = 60;

  SUBCASE("single frame") {
    const auto r = run_stream({StreamFrame{FramePose::identity(), frame_clusters(80)}}, params);
    REQUIRE(r.report.size() == 1);
    CHECK(r.report[0].propagated == 0);
    CHECK(r.report[0].initialized == 60);
  }

  SUBCASE("static and moving ego") {
    for (const Vec3 v : {Vec3(0, 0, 0), Vec3(1.5, -0.5, 0)}) {
      std::vector<StreamFrame> frames;
      FramePose step;
      step.translation = -v;
      for (int f = 0; f < 5; ++f) frames.push_back({step, frame_clusters(80)});
      const auto r = run_stream(frames, params);
      const auto again = run_stream(frames, params);
      std::map<std::uint64_t, std::pair<int, Vec3>> first_seen;
      for (int f = 0; f < 5; ++f) {
        for (std::size_t i = 0; i < r.frames[f].size(); ++i) {
          const QueryState& q = r.frames[f][i];
          CHECK(q.id == again.frames[f][i].id);
          auto [it, fresh] = first_seen.try_emplace(q.id, f, q.ref_point);
          if (!fresh) {
            // Each frame moves the ego by v, so world-fixed points drift by -v.
            const Vec3 want = it->second.second - (f - it->second.first) * v;
            CHECK((q.ref_point - want).norm() <= 1e-12);
            CHECK(q.provenance == Provenance::kPropagated);
          }
        }
        if (f > 0) CHECK(r.report[f].propagated == 40);
      }
    }
  }
}
