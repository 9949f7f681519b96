#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "tiersim/profiler.hpp"
#include "tiersim/scenarios.hpp"

using namespace tiersim;
using Catch::Approx;

namespace {

AppSpec ls_probe(double slo_ns, double wss = 4.0, double access = 0.0) {
  return scenarios::ls_app("probe", 1, wss, access, slo_ns);
}

/// Independent exhaustive oracle: scan the grid from the tightest limit up.
ProfileResult grid_oracle(const AppSpec& app, const MachineSpec& m) {
  ProfileResult r;
  auto metric = [&](double limit, double cpu) {
    double p = cxl_fraction(app.wss_gb, std::min(app.wss_gb, limit));
    std::vector<AppLoad> loads{{app.cls, p, cpu, app.demand_bw_gbs, app.access_rate}};
    PerfSample s = solve_system(loads, m);
    return app.cls == AppClass::LS ? s.apps[0].latency_ns : s.apps[0].achieved_bw_gbs;
  };
  auto meets = [&](double limit, double cpu) {
    double v = metric(limit, cpu);
    return app.cls == AppClass::LS ? v <= app.slo.value : v >= app.slo.value;
  };
  if (!meets(app.wss_gb, 1.0)) return r;
  r.admissible = true;
  std::vector<double> grid;
  for (double v = 0.0; v < app.wss_gb - kEps; v += kMemGridGb) grid.push_back(v);
  grid.push_back(app.wss_gb);
  double limit = app.wss_gb;
  for (double g : grid) {
    if (meets(g, 1.0)) {
      limit = g;
      break;
    }
  }
  r.mem_limit_gb = limit;
  if (app.cls == AppClass::LS) return r;
  double cpu = 1.0;
  if (limit <= 0.0 && metric(0.0, 1.0) > app.slo.value) {
    for (int c = 1; c <= 100; ++c) {
      if (meets(0.0, c * kCpuGrid)) {
        cpu = c * kCpuGrid;
        break;
      }
    }
  }
  r.cpu_util = cpu;
  r.bw_gbs = metric(limit, cpu);
  return r;
}

double bisect(double lo, double hi, double (*f)(double), double target) {
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if (f(mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("profile finds the stated limits for the latency probe") {
  MachineSpec m;
  // SLO at the slow-tier base: everything may live remote.
  ProfileResult all_remote = profile_app(ls_probe(200.0), m);
  REQUIRE(all_remote.admissible);
  CHECK(all_remote.mem_limit_gb.value() == Approx(0.0));

  // SLO at the fast-tier base: only fully local qualifies.
  ProfileResult floor = profile_app(ls_probe(100.0), m);
  REQUIRE(floor.admissible);
  CHECK(floor.mem_limit_gb.value() == Approx(4.0));

  // Midpoint of the affine latency curve.
  ProfileResult mid = profile_app(ls_probe(150.0), m);
  REQUIRE(mid.admissible);
  CHECK(mid.mem_limit_gb.value() == Approx(2.0));

  // Below the physical floor.
  ProfileResult impossible = profile_app(ls_probe(90.0), m);
  CHECK_FALSE(impossible.admissible);
  CHECK_FALSE(impossible.mem_limit_gb.has_value());
}

TEST_CASE("profile walks the CPU cap down once memory hits zero") {
  MachineSpec m;
  AppSpec bi = scenarios::bi_app("gen", 1, 40.0, 40.0, 35.0);
  ProfileResult r = profile_app(bi, m);
  REQUIRE(r.admissible);
  CHECK(r.mem_limit_gb.value() == Approx(0.0));
  CHECK(r.cpu_util.value() == Approx(0.88));  // smallest 0.01 step with 40u >= 35
  CHECK(r.bw_gbs.value() == Approx(35.2));
}

TEST_CASE("profile stops at the memory limit when that suffices") {
  MachineSpec m;
  AppSpec bi = scenarios::bi_app("gen", 1, 40.0, 100.0, 70.0);
  ProfileResult r = profile_app(bi, m);
  REQUIRE(r.admissible);
  // (1-p)*100 + min(100p, 50) >= 70 first holds at p = 0.8.
  CHECK(r.mem_limit_gb.value() == Approx(8.0));
  CHECK(r.cpu_util.value() == Approx(1.0));
  CHECK(r.bw_gbs.value() == Approx(70.0));
}

TEST_CASE("profiled points are minimal on the grid") {
  MachineSpec m;
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> slo(101.0, 210.0);
  std::uniform_real_distribution<double> wss(1.0, 16.0);
  for (int i = 0; i < 30; ++i) {
    AppSpec app = ls_probe(slo(rng), std::ceil(wss(rng) / kMemGridGb) * kMemGridGb, 1e6);
    ProfileResult r = profile_app(app, m);
    REQUIRE(r.admissible);
    double limit = r.mem_limit_gb.value();
    CHECK(detail::isolated_slo_met(app, limit, 1.0, m));
    if (limit > kEps) {
      CHECK_FALSE(detail::isolated_slo_met(app, std::max(0.0, limit - kMemGridGb), 1.0, m));
    }
  }
}

TEST_CASE("looser SLOs never need more memory") {
  MachineSpec m;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> slo(100.0, 220.0);
  for (int i = 0; i < 30; ++i) {
    double a = slo(rng), b = slo(rng);
    double loose = std::max(a, b), tight = std::min(a, b);
    ProfileResult rl = profile_app(ls_probe(loose), m);
    ProfileResult rt = profile_app(ls_probe(tight), m);
    REQUIRE(rl.admissible);
    REQUIRE(rt.admissible);
    CHECK(rl.mem_limit_gb.value() <= rt.mem_limit_gb.value() + kEps);
  }
}

TEST_CASE("profile matches the exhaustive oracle") {
  MachineSpec m;
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> slo(95.0, 230.0);
  std::uniform_real_distribution<double> dmd(10.0, 240.0);
  std::uniform_real_distribution<double> fr(0.05, 1.1);
  for (int i = 0; i < 20; ++i) {
    AppSpec app = i % 2 == 0 ? ls_probe(slo(rng), 8.0, 1e6)
                             : scenarios::bi_app("g", 1, 16.0, dmd(rng), fr(rng) * dmd(rng));
    ProfileResult got = profile_app(app, m);
    ProfileResult want = grid_oracle(app, m);
    CHECK(got.admissible == want.admissible);
    if (got.admissible && want.admissible) {
      CHECK(got.mem_limit_gb.value() == Approx(want.mem_limit_gb.value()).margin(1e-12));
      if (app.cls == AppClass::BI) {
        CHECK(got.cpu_util.value() == Approx(want.cpu_util.value()).margin(1e-12));
      }
    }
  }
}

TEST_CASE("calibration pins the healthy bandwidth threshold") {
  MachineSpec m;
  Thresholds t = calibrate_thresholds(m);

  // Root-finder oracle: solve queue_delay(b/200, 40) = 10 ns.
  double b_star = bisect(0.0, 200.0, [](double b) { return queue_delay(b / 200.0, 40.0); },
                         10.0);
  CHECK(b_star == Approx(78.0776).margin(0.01));
  CHECK(t.thresh_local_bw_gbs == Approx(std::ceil(b_star)));  // first 1 GB/s step over
  CHECK(t.thresh_local_bw_gbs == Approx(79.0));
}

TEST_CASE("calibration pins the remote-fault threshold via the sweep oracle") {
  MachineSpec m;
  Thresholds t = calibrate_thresholds(m);

  // Independent sweep at 0.05 steps with the generator at the last healthy
  // bandwidth (78 GB/s under defaults).
  double healthy = t.thresh_local_bw_gbs - 1.0;
  double expected = -1.0;
  for (int k = 1; k <= 20; ++k) {
    double p = k * 0.05;
    double lat = 100.0 + queue_delay((1.0 - p) * healthy / 200.0, 40.0) +
                 20.0 * std::pow(p * healthy / 50.0, 2.0);
    if (lat >= 110.0) {
      expected = 1e-6 * p * (healthy * 1e9 / 64.0);
      break;
    }
  }
  REQUIRE(expected > 0.0);
  CHECK(t.thresh_numa == Approx(expected));
  CHECK(t.thresh_numa == Approx(487.5));  // p = 0.40 at 78 GB/s
}

TEST_CASE("degenerate coefficients make calibration unreachable") {
  MachineSpec m;
  m.kq_local_ns = 0.0;
  m.kq_cxl_ns = 0.0;
  m.coupling_c_ns = 0.0;
  CHECK_THROWS_AS(calibrate_thresholds(m), CalibrationError);
}

TEST_CASE("calibration is deterministic") {
  MachineSpec m;
  Thresholds a = calibrate_thresholds(m);
  Thresholds b = calibrate_thresholds(m);
  CHECK(a.thresh_local_bw_gbs == b.thresh_local_bw_gbs);
  CHECK(a.thresh_numa == b.thresh_numa);
}
