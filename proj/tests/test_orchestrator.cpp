#include "doctest.h"

#include "oracles.hpp"
#include "test_scenarios.hpp"
#include "uavmec/orchestrator.hpp"

using namespace uavmec;

TEST_SUITE_BEGIN("orchestrator");

TEST_CASE("ring initializer meets the velocity cap on the reference instance") {
  Scenario s = test_scenarios::paper_style(7);
  auto [traj, power] = init_state(s);
  REQUIRE(traj.steps() == 50);
  CHECK(traj.points.front() == s.uav.start_point);
  CHECK(traj.points.back() == s.uav.end_point);
  const double cap = s.uav.v_max * s.time.slot_len();
  for (int n = 0; n < 50; ++n)
    CHECK((traj.points[n + 1] - traj.points[n]).norm() <= cap * (1 + 1e-9));
  // p0 = 0.3 W exactly saturates E_U = 36 J over 50 slots of 2.4 s
  CHECK(power.p.minCoeff() == 0.3);
  CHECK(power.p.maxCoeff() == 0.3);
  const double used = power.p.row(0).sum() * s.time.slot_len();
  CHECK(used == doctest::Approx(36.0).epsilon(1e-12));
  // and the initial state passes the audit with zero-bit QoS
  Scenario loose = s;
  for (auto& ue : loose.ues) ue.min_bits = 0.0;
  Association a;
  a.b = MatXi::Zero(s.K(), s.N());
  for (int n = 0; n < s.N(); ++n) a.b(n % s.K(), n) = 1;
  // exactly binding budget: residual is zero up to summation rounding
  CHECK(audit(loose, traj, a, power).family_max("power_budget") <= 1e-12);
  CHECK(audit(loose, traj, a, power).family_max("velocity") <= 0.0);
}

TEST_CASE("degenerate geometry falls back to the straight chain") {
  Scenario s = test_scenarios::small(301, 1, 6);
  s.ues[0].position = Vec2(0, 0);
  s.uav.start_point = Vec2(0, 0);
  s.uav.end_point = Vec2(0, 0);
  s.ues[0].min_bits = 0.0;
  auto [traj, power] = init_state(s);
  for (const auto& p : traj.points) CHECK((p - Vec2(0, 0)).norm() == 0.0);
  (void)power;
}

TEST_CASE("huge tolerance stops after one iteration") {
  Scenario s = test_scenarios::small(311, 3, 10);
  RunConfig cfg;
  cfg.tol_bits = 1e30;
  cfg.scheme = Scheme::Proposed;
  auto rep = run(s, cfg);
  REQUIRE(rep.status == RunStatus::Converged);
  CHECK(rep.iterations == 1);
  CHECK(rep.max_residual <= 1e-6);
}

TEST_CASE("scheme II leaves trajectory and power at the initial state") {
  Scenario s = test_scenarios::small(313, 3, 10);
  RunConfig cfg;
  cfg.scheme = Scheme::SchemeII;
  auto rep = run(s, cfg);
  REQUIRE(rep.status == RunStatus::Converged);
  auto [traj0, power0] = init_state(s);
  REQUIRE(rep.trajectory.points.size() == traj0.points.size());
  for (size_t i = 0; i < traj0.points.size(); ++i)
    CHECK(rep.trajectory.points[i] == traj0.points[i]);
  CHECK((rep.power.p - power0.p).cwiseAbs().maxCoeff() == 0.0);
  // converged because nothing changes after the first association
  CHECK(rep.iterations == 2);
}

TEST_CASE("scheme ordering on a small instance") {
  for (std::uint64_t seed : {401u, 402u, 403u}) {
    Scenario s = test_scenarios::small(seed, 2, 6);
    RunConfig cfg;
    cfg.tol_rel = 1e-5;
    cfg.scheme = Scheme::Proposed;
    auto rp = run(s, cfg);
    cfg.scheme = Scheme::SchemeI;
    auto r1 = run(s, cfg);
    cfg.scheme = Scheme::SchemeII;
    auto r2 = run(s, cfg);
    REQUIRE(rp.status == RunStatus::Converged);
    REQUIRE(r1.status == RunStatus::Converged);
    REQUIRE(r2.status == RunStatus::Converged);
    CHECK(rp.s_bits >= r1.s_bits * (1.0 - 1e-6));
    CHECK(r1.s_bits >= r2.s_bits * (1.0 - 1e-6));
  }
}

TEST_CASE("monotone iteration ledger") {
  Scenario s = test_scenarios::small(419, 3, 12);
  RunConfig cfg;
  cfg.tol_rel = 1e-6;
  auto rep = run(s, cfg);
  REQUIRE((rep.status == RunStatus::Converged || rep.status == RunStatus::MaxIterations));
  REQUIRE(rep.records.size() >= 2);
  for (size_t i = 1; i < rep.records.size(); ++i)
    CHECK(rep.records[i].s_bits >=
          rep.records[i - 1].s_bits * (1.0 - 1e-6));
  for (const auto& rec : rep.records) CHECK(rec.max_residual <= 1e-6);
}

TEST_CASE("restoration") {
  SUBCASE("already feasible state is returned unchanged") {
    Scenario s = test_scenarios::small(431, 3, 10);
    auto [traj, power] = init_state(s);
    auto rest = restore_feasibility(s, traj, power);
    REQUIRE(rest.ok);
    for (size_t i = 0; i < traj.points.size(); ++i)
      CHECK(rest.trajectory.points[i] == traj.points[i]);
    CHECK((rest.power.p - power.p).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("zero QoS floors are trivially feasible") {
    Scenario s = test_scenarios::small(433, 3, 10);
    for (auto& ue : s.ues) ue.min_bits = 0.0;
    auto [traj, power] = init_state(s);
    auto rest = restore_feasibility(s, traj, power);
    CHECK(rest.ok);
    CHECK(rest.rounds == 1);
  }

  SUBCASE("QoS above the analytic ceiling fails") {
    Scenario s = test_scenarios::small(437, 2, 8);
    auto [traj, power] = init_state(s);
    const double dt = s.time.slot_len();
    const double cap_rate = rate(s.budget.energy_cap / dt,
                                 s.channel.ref_gain / (50.0 * 50.0),
                                 s.channel.noise_power);
    s.ues[0].min_bits = 1.01 * s.N() * dt * s.channel.bandwidth * cap_rate;
    auto rest = restore_feasibility(s, traj, power);
    CHECK(!rest.ok);
    CHECK(rest.reason.find("ceiling") != std::string::npos);
  }

  SUBCASE("a demanding far UE is restored by moving the trajectory") {
    Scenario s = test_scenarios::small(439, 2, 12);
    s.ues[0].position = Vec2(400.0, 0.0);
    s.ues[1].position = Vec2(-60.0, 30.0);
    // demand slightly more than the initial ring can deliver to UE 1 even
    // with every slot assigned to it; approaching the UE closes the gap
    auto [traj, power] = init_state(s);
    auto ilp0 = build_ilp(s, traj, power);
    double best_possible = 0.0;
    for (int n = 0; n < s.N(); ++n) best_possible += ilp0.weights(0, n);
    s.ues[0].min_bits = 1.05 * best_possible;
    s.ues[1].min_bits = 0.0;
    REQUIRE(solve_bnb(build_ilp(s, traj, power)).status == SolveStatus::Infeasible);

    RunConfig cfg;
    auto rep = run(s, cfg);
    REQUIRE(rep.status == RunStatus::Converged);
    CHECK(rep.max_residual <= 1e-6);
    CHECK(rep.s_per_ue[0] >= s.ues[0].min_bits * (1.0 - 1e-6));
  }
}

TEST_CASE("infeasible problem surfaces as such") {
  Scenario s = test_scenarios::small(443, 2, 8);
  s.ues[0].min_bits = 1e18; // beyond any ceiling
  auto rep = run(s, {});
  CHECK(rep.status == RunStatus::Infeasible);
  CHECK(rep.reason.find("QoS infeasible") != std::string::npos);
}

TEST_SUITE_END();
