#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "mppfc/nlp_solver.hpp"
#include "mppfc/transcription.hpp"

using namespace mppfc;

namespace {

QuadState at_reference(const Vec4& p) {
  QuadState x;
  x.position = p.head<3>();
  x.attitude(2) = p(3);
  return x;
}

OcpProblem spiral_problem(const PathState& z0 = {-1.0, 1e-4}) {
  const OcpConfig cfg = OcpConfig::defaults(false, 0.04);
  return build_ocp(at_reference(eval_spiral(-1.0)), z0, spiral_path(), cfg, ModelParams{});
}

OcpProblem corridor_problem() {
  const OcpConfig cfg = OcpConfig::defaults(true, 0.02);
  return build_ocp(at_reference(eval_sinusoid(-1.0)), {-1.0, 1e-4, 0.0, 0.0},
                   sinusoid_corridor_path(), cfg, ModelParams{});
}

// Random point inside the (finite part of the) box, away from path-domain edges.
Eigen::VectorXd random_point(const OcpProblem& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 0.95);
  Eigen::VectorXd w(p.num_variables());
  for (int i = 0; i < w.size(); ++i) {
    double lo = p.lower_bounds()(i), hi = p.upper_bounds()(i);
    if (!std::isfinite(lo)) lo = -1.0;
    if (!std::isfinite(hi)) hi = 1.0;
    w(i) = lo + u(rng) * (hi - lo);
  }
  const DecisionLayout& lay = p.layout();
  for (int k = 0; k <= lay.horizon; ++k) {
    w(lay.path_state(k)) = -0.95 + 0.9 * u(rng);  // s inside the path domain
    w(lay.state(k) + 8) = 0.3 + 0.4 * (u(rng) - 0.5);  // yaw near the reference, no wrap
  }
  return w;
}

double max_rel_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& fd) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double scale = std::max(1.0, std::abs(fd(i)));
    worst = std::max(worst, std::abs(a(i) - fd(i)) / scale);
  }
  return worst;
}

void check_jacobians(const OcpProblem& p, int trials, unsigned seed) {
  std::mt19937_64 rng(seed);
  const double h = 1e-6;
  for (int t = 0; t < trials; ++t) {
    const Eigen::VectorXd w = random_point(p, rng);
    NlpEvaluation ev, plus, minus;
    p.evaluate(w, ev, true);
    Eigen::MatrixXd jr(ev.residual.size(), w.size()), jc(ev.constraints.size(), w.size());
    for (int j = 0; j < w.size(); ++j) {
      Eigen::VectorXd wp = w, wm = w;
      wp(j) += h;
      wm(j) -= h;
      p.evaluate(wp, plus, false);
      p.evaluate(wm, minus, false);
      jr.col(j) = (plus.residual - minus.residual) / (2 * h);
      jc.col(j) = (plus.constraints - minus.constraints) / (2 * h);
    }
    EXPECT_LT(max_rel_error(ev.residual_jacobian, jr), 1e-5) << "trial " << t;
    EXPECT_LT(max_rel_error(ev.constraint_jacobian, jc), 1e-5) << "trial " << t;
  }
}

}  // namespace

TEST(Layout, ClassicSizes) {
  const OcpProblem p = spiral_problem();
  EXPECT_EQ(p.num_variables(), 6 * (9 + 2) + 5 * (4 + 1));
  EXPECT_EQ(p.num_variables(), 91);
  EXPECT_EQ(p.num_equalities(), 5 * 11 + 11);
  EXPECT_EQ(p.num_equalities(), 66);
}

TEST(Layout, CorridorSizes) {
  const OcpProblem p = corridor_problem();
  EXPECT_EQ(p.num_variables(), 6 * (9 + 4) + 5 * (4 + 2));
  EXPECT_EQ(p.num_equalities(), 6 * 13);
}

TEST(StageCost, Examples) {
  OcpConfig cfg = OcpConfig::defaults(false, 0.04);
  const Eigen::VectorXd zero1 = Eigen::VectorXd::Zero(1);
  EXPECT_EQ(stage_cost(Vec4::Zero(), Vec3::Zero(), zero1, QuadInput{}, zero1, cfg), 0.0);
  cfg.q = Eigen::MatrixXd::Identity(8, 8);
  EXPECT_EQ(stage_cost(Vec4(1, 0, 0, 0), Vec3::Zero(), zero1, QuadInput{}, zero1, cfg), 1.0);
  EXPECT_THROW((void)stage_cost(Vec4::Zero(), Vec3::Zero(), Eigen::VectorXd::Zero(2), QuadInput{},
                                zero1, cfg),
               std::invalid_argument);
}

TEST(TerminalCost, Examples) {
  OcpConfig cfg = OcpConfig::defaults(false, 0.04);
  cfg.terminal_weight = 10.0;
  EXPECT_EQ(terminal_cost({0.0, 0.04}, cfg), 0.0);
  EXPECT_EQ(terminal_cost({-1.0, 0.04}, cfg), 10.0);

  OcpConfig cc = OcpConfig::defaults(true, 0.02);
  cc.terminal_weight_s2 = 1.0;
  const double pi = std::numbers::pi;
  EXPECT_NEAR(terminal_cost({0.0, 0.02, 0.5 * pi, 0.0}, cc), pi * pi / 4, 1e-15);
}

TEST(TerminalSets, NotImplemented) {
  EXPECT_FALSE(terminal_sets_stub().implemented);
  EXPECT_FALSE(terminal_sets_stub().reason.empty());
  // Only pinning and gap rows: no terminal inequality rows.
  const OcpProblem p = spiral_problem();
  EXPECT_EQ(p.num_equalities(), (p.layout().horizon + 1) * (p.layout().nx + p.layout().nz));
}

TEST(Residual, CostEqualsQuadrature) {
  std::mt19937_64 rng(17);
  for (const OcpProblem& p : {spiral_problem(), corridor_problem()}) {
    for (int t = 0; t < 20; ++t) {
      const Eigen::VectorXd w = random_point(p, rng);
      NlpEvaluation ev;
      p.evaluate(w, ev, false);
      const double q = p.quadrature_cost(w);
      EXPECT_NEAR(ev.residual.squaredNorm(), q, 1e-10 * std::max(1.0, q));
    }
  }
}

TEST(Jacobians, MatchFiniteDifferencesClassic) { check_jacobians(spiral_problem(), 20, 31); }

TEST(Jacobians, MatchFiniteDifferencesCorridor) { check_jacobians(corridor_problem(), 20, 37); }

TEST(Constraints, RolloutIsFeasible) {
  const OcpProblem p = spiral_problem();
  const std::vector<QuadInput> u(5, QuadInput{0.01, 0.05, -0.02, 0.1});
  const std::vector<VirtualInput> v(5, VirtualInput{0.02, 0.0});
  const Eigen::VectorXd w = p.rollout(u, v);
  NlpEvaluation ev;
  p.evaluate(w, ev, false);
  EXPECT_LT(ev.constraints.lpNorm<Eigen::Infinity>(), 1e-14);
}

TEST(Constraints, GapsUseModelStep) {
  const OcpProblem p = spiral_problem();
  std::mt19937_64 rng(3);
  const Eigen::VectorXd w = random_point(p, rng);
  NlpEvaluation ev;
  p.evaluate(w, ev, false);
  const DecisionLayout& lay = p.layout();
  const int block = lay.nx + lay.nz;
  for (int k = 0; k < lay.horizon; ++k) {
    const StateVector expect =
        w.segment<9>(lay.state(k + 1)) -
        rk4_step(StateVector(w.segment<9>(lay.state(k))), InputVector(w.segment<4>(lay.input(k))),
                 0.05, ModelParams{});
    EXPECT_LT((ev.constraints.segment((k + 1) * block, 9) - expect).norm(), 1e-14);
  }
}

TEST(Hover, PathEndEquilibriumHasTinyCost) {
  const OcpConfig cfg = OcpConfig::defaults(false, 0.04);
  const double floor = cfg.s_dot_floor;
  const OcpProblem p = build_ocp(at_reference(eval_spiral(0.0)), {0.0, floor}, spiral_path(), cfg,
                                 ModelParams{});
  // Zero inputs, nu = 0: the plant stays put and s creeps forward at the floor rate.
  const Eigen::VectorXd w =
      p.rollout(std::vector<QuadInput>(5), std::vector<VirtualInput>(5));
  NlpEvaluation ev;
  p.evaluate(w, ev, false);
  EXPECT_LT(ev.constraints.lpNorm<Eigen::Infinity>(), 1e-14);
  const double cost = p.quadrature_cost(w);
  const double scale = cfg.q.maxCoeff() + cfg.terminal_weight;
  EXPECT_LT(cost, 100.0 * scale * floor * floor);
}

TEST(Bounds, OutOfBoxMeasurementIsWidenedAndLogged) {
  const OcpConfig cfg = OcpConfig::defaults(false, 0.04);
  QuadState x = at_reference(eval_spiral(-1.0));
  x.attitude(0) = 0.5;  // beyond the 0.35 roll bound
  const OcpProblem p = build_ocp(x, {-1.0, 1e-4}, spiral_path(), cfg, ModelParams{});
  ASSERT_EQ(p.clamp_events().size(), 1u);
  EXPECT_EQ(p.clamp_events()[0].variable, "roll");
  EXPECT_LT(p.lower_bounds()(6), 0.5);
  EXPECT_GT(p.upper_bounds()(6), 0.5);
  EXPECT_EQ(p.upper_bounds()(p.layout().state(1) + 6), 0.35);  // later stages keep the box

  const OcpProblem inside = spiral_problem();
  EXPECT_TRUE(inside.clamp_events().empty());
}

TEST(Config, RejectsBadWeights) {
  OcpConfig cfg = OcpConfig::defaults(false, 0.04);
  cfg.q(0, 0) = -1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = OcpConfig::defaults(false, 0.04);
  cfg.r = Eigen::MatrixXd::Identity(6, 6);
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = OcpConfig::defaults(false, 0.04);
  EXPECT_THROW(build_ocp(QuadState{}, {-1.0, 1e-4}, sinusoid_corridor_path(), cfg, ModelParams{}),
               std::invalid_argument);
}

TEST(PathState, PackRoundTrip) {
  const PathState z{-0.3, 0.02, 0.4, -0.1};
  const PathState c = unpack_path_state(pack_path_state(z, true), true);
  EXPECT_EQ(c.s, z.s);
  EXPECT_EQ(c.s_dot, z.s_dot);
  EXPECT_EQ(c.s2, z.s2);
  EXPECT_EQ(c.s2_dot, z.s2_dot);
  const PathState k = unpack_path_state(pack_path_state(z, false), false);
  EXPECT_EQ(k.s, z.s);
  EXPECT_EQ(k.s2, 0.0);
}
