#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "spincut/optim.hpp"

namespace spincut {
namespace {

double bowl(const ParamVector& p) { return (p[0] - 1.0) * (p[0] - 1.0) + (p[1] + 2.0) * (p[1] + 2.0); }

TEST(FiniteDifference, ConstantObjectiveHasZeroGradient) {
  const auto g = finite_difference_gradient([](const ParamVector&) { return 0.37; }, {1.0, -4.0, 9.0});
  for (double v : g) EXPECT_EQ(v, 0.0);
}

TEST(FiniteDifference, ExactOnQuadratics) {
  const auto g = finite_difference_gradient(bowl, {0.0, 0.0}, 0.1);
  EXPECT_NEAR(g[0], -2.0, 1e-12);
  EXPECT_NEAR(g[1], 4.0, 1e-12);
}

TEST(FiniteDifference, WorkerCountDoesNotChangeBits) {
  auto f = [](const ParamVector& p) { return std::sin(p[0]) * std::exp(p[1]) + p[2] * p[0]; };
  const ParamVector x{0.3, -0.2, 1.7};
  EXPECT_EQ(finite_difference_gradient(f, x, 0.1, 1), finite_difference_gradient(f, x, 0.1, 3));
}

// For x^3 the central difference is 3x^2 + h^2, so halving h quarters the error.
TEST(FiniteDifference, RichardsonRatioIsFour) {
  auto cube = [](const ParamVector& p) { return p[0] * p[0] * p[0]; };
  const double exact = 3.0 * 1.3 * 1.3;
  const double e1 = finite_difference_gradient(cube, {1.3}, 0.1)[0] - exact;
  const double e2 = finite_difference_gradient(cube, {1.3}, 0.05)[0] - exact;
  EXPECT_NEAR(e1, 0.01, 1e-12);
  EXPECT_NEAR(e1 / e2, 4.0, 1e-6);

  auto smooth = [](const ParamVector& p) { return std::sin(p[0]) + std::exp(0.5 * p[0]); };
  const double d = std::cos(0.4) + 0.5 * std::exp(0.2);
  const double s1 = finite_difference_gradient(smooth, {0.4}, 0.1)[0] - d;
  const double s2 = finite_difference_gradient(smooth, {0.4}, 0.05)[0] - d;
  EXPECT_NEAR(s1 / s2, 4.0, 0.01);
}

TEST(FiniteDifference, RejectsNonPositiveStep) {
  EXPECT_THROW(finite_difference_gradient(bowl, {0.0, 0.0}, 0.0), ArgumentError);
}

TEST(Bfgs, RecoversQuadraticMinimum) {
  const auto report = bfgs_maximize([](const ParamVector& p) { return -bowl(p); }, {0.0, 0.0});
  EXPECT_EQ(report.status, BfgsStatus::converged);
  EXPECT_NEAR(report.final_params[0], 1.0, 1e-6);
  EXPECT_NEAR(report.final_params[1], -2.0, 1e-6);
  EXPECT_LE(report.iterations, 10);
  EXPECT_LT(report.gradient_inf_norm, 1e-4);
  EXPECT_DOUBLE_EQ(report.initial_value, -5.0);
}

TEST(Bfgs, InverseHessianStaysSymmetricPositiveDefinite) {
  auto objective = [](const ParamVector& p) {
    return -(3.0 * p[0] * p[0] + p[0] * p[1] + 0.5 * p[1] * p[1] + p[2] * p[2] - p[0] + 2.0 * p[2]);
  };
  BfgsOptions options;
  options.max_iterations = 1;
  for (int iterations = 1; iterations <= 4; ++iterations) {
    options.max_iterations = iterations;
    const auto report = bfgs_maximize(objective, {1.0, 1.0, 1.0}, options);
    const Eigen::MatrixXd& h = report.inverse_hessian;
    EXPECT_LT((h - h.transpose()).cwiseAbs().maxCoeff(), 1e-10);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
    EXPECT_GT(solver.eigenvalues().minCoeff(), 0.0);
  }
}

TEST(Bfgs, DeterministicMonotoneTrace) {
  auto rosenbrock = [](const ParamVector& p) {
    return -((1.0 - p[0]) * (1.0 - p[0]) + 100.0 * (p[1] - p[0] * p[0]) * (p[1] - p[0] * p[0]));
  };
  BfgsOptions options;
  options.gradient_step = 1e-5;
  options.tolerance = 1e-6;
  const auto a = bfgs_maximize(rosenbrock, {-1.2, 1.0}, options);
  options.workers = 2;
  const auto b = bfgs_maximize(rosenbrock, {-1.2, 1.0}, options);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t k = 0; k < a.trace.size(); ++k) {
    EXPECT_EQ(a.trace[k].params, b.trace[k].params);
    EXPECT_EQ(a.trace[k].value, b.trace[k].value);
    if (k > 0) {
      EXPECT_GE(a.trace[k].value, a.trace[k - 1].value);
    }
  }
  EXPECT_NEAR(a.final_params[0], 1.0, 1e-3);
  EXPECT_NEAR(a.final_params[1], 1.0, 2e-3);
  EXPECT_GE(a.final_value, a.initial_value - 1e-12);
}

TEST(Bfgs, StallsWhenNoStepImproves) {
  // FD slope at the kink points downhill in both directions' average
  auto kink = [](const ParamVector& p) { return p[0] <= 0.0 ? p[0] : -2.0 * p[0]; };
  const auto report = bfgs_maximize(kink, {0.0});
  EXPECT_EQ(report.status, BfgsStatus::stalled);
  EXPECT_EQ(report.line_search_failures, 1);
  EXPECT_EQ(report.final_params, ParamVector{0.0});
  EXPECT_EQ(report.final_value, 0.0);
}

TEST(Bfgs, MaxIterationsAndEmptyParameterVector) {
  BfgsOptions options;
  options.max_iterations = 2;
  options.gradient_step = 1e-5;
  auto rosenbrock = [](const ParamVector& p) {
    return -((1.0 - p[0]) * (1.0 - p[0]) + 100.0 * (p[1] - p[0] * p[0]) * (p[1] - p[0] * p[0]));
  };
  const auto limited = bfgs_maximize(rosenbrock, {-1.2, 1.0}, options);
  EXPECT_EQ(limited.status, BfgsStatus::max_iterations);
  EXPECT_EQ(limited.iterations, 2);

  const auto empty = bfgs_maximize([](const ParamVector&) { return 0.5; }, {});
  EXPECT_EQ(empty.status, BfgsStatus::converged);
  EXPECT_EQ(empty.final_value, 0.5);
  EXPECT_THROW(bfgs_maximize(bowl, {NAN, 0.0}), ArgumentError);
}

TEST(Bfgs, MultistartKeepsBestPeak) {
  auto two_peaks = [](const ParamVector& p) {
    return std::exp(-(p[0] + 2.0) * (p[0] + 2.0)) + 2.0 * std::exp(-(p[0] - 3.0) * (p[0] - 3.0));
  };
  BfgsOptions options;
  options.gradient_step = 1e-4;
  const auto starts = grid_starts({-3.0}, {4.0}, 3);
  ASSERT_EQ(starts.size(), 3u);
  const auto best = bfgs_maximize_multistart(two_peaks, starts, options);
  EXPECT_NEAR(best.final_params[0], 3.0, 1e-3);
  EXPECT_EQ(grid_starts({0.0, 0.0}, {1.0, 2.0}, 2).size(), 4u);
}

TEST(Landscape, ConstantObjectiveIsFlat) {
  const auto grid = scan_landscape([](const ParamVector&) { return 0.25; }, {0.0, 0.0}, {0, -1.0, 1.0, 4},
                                   {1, -2.0, 2.0, 3});
  EXPECT_EQ(grid.values.size(), 12u);
  for (double v : grid.values) EXPECT_EQ(v, 0.25);
}

TEST(Landscape, MaximumLandsOnNearestCell) {
  auto peak = [](const ParamVector& p) { return -bowl(ParamVector{p[1], p[2]}); };
  const LandscapeAxis first{1, -3.0, 3.0, 13};
  const LandscapeAxis second{2, -4.0, 0.0, 9};
  const auto grid = scan_landscape(peak, {7.0, 0.0, 0.0}, first, second, 2);
  const auto [i, j] = grid.argmax();
  EXPECT_EQ(i, first.nearest_index(1.0));
  EXPECT_EQ(j, second.nearest_index(-2.0));
  EXPECT_DOUBLE_EQ(grid.max_value(), 0.0);
  EXPECT_EQ(grid.values, scan_landscape(peak, {7.0, 0.0, 0.0}, first, second, 1).values);
}

TEST(Landscape, RejectsBadAxes) {
  auto f = [](const ParamVector&) { return 0.0; };
  EXPECT_THROW(scan_landscape(f, {0.0, 0.0}, {0, 0.0, 1.0, 1}, {1, 0.0, 1.0, 3}), ArgumentError);
  EXPECT_THROW(scan_landscape(f, {0.0, 0.0}, {0, 0.0, 1.0, 3}, {2, 0.0, 1.0, 3}), ArgumentError);
  EXPECT_THROW(scan_landscape(f, {0.0, 0.0}, {0, 0.0, 1.0, 3}, {0, 0.0, 1.0, 3}), ArgumentError);
  EXPECT_THROW(scan_landscape(f, {0.0, 0.0}, {0, 1.0, 1.0, 3}, {1, 0.0, 1.0, 3}), ArgumentError);
}

TEST(Landscape, CsvLayout) {
  const auto grid = scan_landscape([](const ParamVector& p) { return p[0] + p[1]; }, {0.0, 0.0}, {0, 0.0, 1.0, 2},
                                   {1, 0.0, 2.0, 3});
  std::ostringstream out;
  write_landscape_csv(out, grid, ParamVector{0.5, 1.0});
  const std::string text = out.str();
  EXPECT_NE(text.find("# first: parameter=0 min=0 max=1 resolution=2\n"), std::string::npos);
  EXPECT_NE(text.find("# optimum: p1=0.5 p2=1\n"), std::string::npos);
  EXPECT_NE(text.find("p1,p2,fidelity\n0,0,0\n0,1,1\n0,2,2\n1,0,1\n"), std::string::npos);
}

TEST(FidelityObjective, GradientIsSmallAtTableOptimum) {
  const Objective f = fidelity_objective(ObjectiveSpec{ChainSpec::single_spin_cut(6, Topology::ring, 1.0, 2.0),
                                                       ScheduleKind::polynomial_cut, Direction::cut, 0.6,
                                                       Target::cut_fidelity, 300});
  EXPECT_NEAR(f({0.0, 0.0}), 0.865, 0.005);
  const auto g = finite_difference_gradient(f, {54.3, -36.3});
  EXPECT_LT(std::max(std::abs(g[0]), std::abs(g[1])), 0.05);
}

}  // namespace
}  // namespace spincut
