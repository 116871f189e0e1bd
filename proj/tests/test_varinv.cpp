#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include "doctest.h"
#include "subsurf/errors.hpp"
#include "subsurf/varinv/varinv.hpp"

using namespace subsurf;
using namespace subsurf::varinv;
namespace fs = std::filesystem;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> n;
  Eigen::MatrixXd m(r, c);
  for (auto& v : m.reshaped()) v = n(rng);
  return m;
}

}  // namespace

TEST_CASE("objective values") {
  const Eigen::VectorXd d = Eigen::VectorXd::Constant(240, 1.0);
  auto spec = map_objective(esmda::ObservationModel::iid(d, 0.02), 3);
  ForwardG exact = [&](const Eigen::VectorXd&) { return d; };
  CHECK(objective(Eigen::VectorXd::Zero(3), spec, exact) == 0.0);
  CHECK(objective(Eigen::Vector3d(0, 1, 0), spec, exact) == doctest::Approx(0.5));
  ForwardG off = [&](const Eigen::VectorXd&) { return Eigen::VectorXd(d.array() + 0.02); };
  CHECK(objective(Eigen::VectorXd::Zero(3), spec, off) == doctest::Approx(120.0));
  spec.prior_center = Eigen::Vector3d(1, 2, 3);
  CHECK(objective(Eigen::Vector3d(1, 2, 3), spec, exact) == 0.0);
  spec.prior_variance = Eigen::Vector3d(4, 1, 1);
  CHECK(objective(Eigen::Vector3d(3, 2, 3), spec, exact) == doctest::Approx(0.5));
  CHECK_THROWS_AS(objective(Eigen::Vector3d(NAN, 0, 0), spec, exact), DomainError);
}

TEST_CASE("finite-difference Jacobian") {
  const auto a = random_matrix(7, 3, 1);
  ForwardG lin = [&](const Eigen::VectorXd& z) { return Eigen::VectorXd(a * z); };
  const auto j = fd_jacobian(lin, Eigen::Vector3d(0.3, -1, 2), 1e-4);
  CHECK(j.rows() == 7);
  CHECK(j.cols() == 3);
  CHECK((j - a).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(fd_jacobian(lin, Eigen::Vector3d(0.3, -1, 2), 1e-4, 3) == j);

  ForwardG cube = [](const Eigen::VectorXd& z) { return Eigen::VectorXd::Constant(1, z[0] * z[0] * z[0]); };
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
  const double e1 = std::abs(fd_jacobian(cube, one, 1e-2)(0, 0) - 3.0);
  const double e2 = std::abs(fd_jacobian(cube, one, 5e-3)(0, 0) - 3.0);
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(1e-3));

  ForwardG shape = [](const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(240); };
  CHECK(fd_jacobian(shape, Eigen::VectorXd::Zero(9), 1e-3).rows() == 240);
  CHECK(fd_jacobian(shape, Eigen::VectorXd::Zero(9), 1e-3).cols() == 9);

  ForwardG bad = [](const Eigen::VectorXd& z) -> Eigen::VectorXd {
    if (z[1] > 0.5) throw NumericalError("boom");
    return z;
  };
  try {
    fd_jacobian(bad, Eigen::Vector3d(0, 0.5, 0), 0.1);
    FAIL("expected failure");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("column 1") != std::string::npos);
  }
  CHECK_THROWS_AS(fd_jacobian(lin, Eigen::Vector3d::Zero(), 0.0), DomainError);
}

TEST_CASE("step direction") {
  const auto spec = map_objective(esmda::ObservationModel::iid(Eigen::VectorXd::Zero(1), 1.0), 1);
  const Eigen::MatrixXd j = Eigen::MatrixXd::Ones(1, 1);
  CHECK(step_direction(j, Eigen::VectorXd::Constant(1, 2.0), Eigen::VectorXd::Zero(1), spec,
                       StepMode::gauss_newton)[0] == doctest::Approx(1.0));
  CHECK(step_direction(j, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1), spec,
                       StepMode::gauss_newton)[0] == 0.0);

  const auto a = random_matrix(10, 4, 3);
  const auto spec4 = map_objective(esmda::ObservationModel::iid(Eigen::VectorXd::Zero(10), 0.1), 4);
  const Eigen::VectorXd r = random_matrix(10, 1, 4);
  const Eigen::VectorXd z = Eigen::VectorXd::Zero(4);
  const auto damped = step_direction(a, r, z, spec4, StepMode::levenberg_marquardt, 1e12);
  const Eigen::VectorXd jtr = a.transpose() * (r / 0.01);
  CHECK(damped.norm() <= 1e-6 * jtr.norm());
  const auto gn = step_direction(a, r, z, spec4, StepMode::gauss_newton);
  const auto lm0 = step_direction(a, r, z, spec4, StepMode::levenberg_marquardt, 0.0);
  CHECK((gn - lm0).norm() <= 1e-12 * gn.norm());
}

TEST_CASE("gradient matches a direct finite difference of L") {
  const auto a = random_matrix(12, 5, 5);
  ForwardG lin = [&](const Eigen::VectorXd& z) { return Eigen::VectorXd(a * z); };
  const Eigen::VectorXd d_obs = random_matrix(12, 1, 6);
  const auto spec = map_objective(esmda::ObservationModel::iid(d_obs, 0.3), 5);
  const Eigen::VectorXd z = random_matrix(5, 1, 7);
  const auto g = objective_gradient(fd_jacobian(lin, z, 1e-3), d_obs - lin(z), z, spec);
  for (Eigen::Index k = 0; k < 5; ++k) {
    Eigen::VectorXd zp = z, zm = z;
    zp[k] += 1e-5;
    zm[k] -= 1e-5;
    const double direct = (objective(zp, spec, lin) - objective(zm, spec, lin)) / 2e-5;
    CHECK(std::abs(direct - g[k]) <= 1e-4 * std::max(1.0, std::abs(direct)));
  }
}

TEST_CASE("Gauss-Newton solves a quadratic objective in one iteration") {
  const auto a = random_matrix(20, 6, 8);
  ForwardG lin = [&](const Eigen::VectorXd& z) { return Eigen::VectorXd(a * z); };
  const Eigen::VectorXd d_obs = random_matrix(20, 1, 9);
  const double sigma = 0.2;
  const auto spec = map_objective(esmda::ObservationModel::iid(d_obs, sigma), 6);
  const Eigen::MatrixXd normal = a.transpose() * a / (sigma * sigma) + Eigen::MatrixXd::Identity(6, 6);
  const Eigen::VectorXd z_star = normal.ldlt().solve(a.transpose() * d_obs / (sigma * sigma));

  InversionPolicy pol;
  pol.gradient_tolerance = 1e-5;
  const auto t = run_variational(Eigen::VectorXd::Constant(6, 2.0), spec, lin, pol);
  REQUIRE(t.points.size() >= 2);
  CHECK((t.points[1].z - z_star).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(t.termination == Termination::gradient);
  CHECK(t.points.size() == 2);

  pol.mode = StepMode::levenberg_marquardt;
  const auto lm = run_variational(Eigen::VectorXd::Constant(6, 2.0), spec, lin, pol);
  CHECK((lm.final().z - z_star).cwiseAbs().maxCoeff() <= 1e-6);
  for (std::size_t k = 1; k < lm.points.size(); ++k) CHECK(lm.points[k].objective <= lm.points[k - 1].objective);
}

TEST_CASE("descent is monotone on a nonlinear, multimodal objective") {
  // d = sin(3 z) per component: several basins.
  ForwardG f = [](const Eigen::VectorXd& z) { return Eigen::VectorXd((3.0 * z.array()).sin()); };
  const Eigen::VectorXd d_obs = Eigen::Vector2d(0.5, -0.4);
  const auto spec = map_objective(esmda::ObservationModel::iid(d_obs, 0.05), 2);
  std::set<long> finals;
  for (int s = 0; s < 8; ++s) {
    for (auto mode : {StepMode::gauss_newton, StepMode::levenberg_marquardt}) {
      InversionPolicy pol;
      pol.mode = mode;
      const Eigen::VectorXd z0 = 2.0 * random_matrix(2, 1, 100 + s);
      const auto t = run_variational(z0, spec, f, pol);
      for (std::size_t k = 1; k < t.points.size(); ++k) CHECK(t.points[k].objective <= t.points[k - 1].objective);
      finals.insert(std::lround(t.final().objective * 100));
    }
  }
  MESSAGE("distinct final objectives: " << finals.size());
  CHECK(finals.size() >= 2);
}

TEST_CASE("termination reasons and policy validation") {
  ForwardG flat = [](const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(2); };
  const auto spec = map_objective(esmda::ObservationModel::iid(Eigen::VectorXd::Zero(2), 0.1), 2);
  InversionPolicy pol;
  CHECK(run_variational(Eigen::VectorXd::Zero(2), spec, flat, pol).termination == Termination::gradient);
  pol.max_iterations = 1;
  pol.gradient_tolerance = 1e-300;
  const auto t = run_variational(Eigen::Vector2d(1, 1), spec, flat, pol);
  CHECK(t.points.size() == 2);
  CHECK(t.final().objective <= 1e-20);

  // A step function: every step direction is zero -> collapse.
  CHECK(to_string(Termination::step_collapse) == "step_collapse");
  ForwardG kink = [](const Eigen::VectorXd& z) { return Eigen::VectorXd::Constant(2, std::abs(z[0] - 0.3)); };
  InversionPolicy bt;
  bt.max_iterations = 200;
  const auto k = run_variational(Eigen::Vector2d(2, 0), map_objective(esmda::ObservationModel::iid(
                                                                          Eigen::Vector2d(-1, -1), 0.01), 2),
                                 kink, bt);
  CHECK(k.termination != Termination::max_iterations);

  InversionPolicy badp;
  badp.backtrack = 1.0;
  CHECK_THROWS_AS(badp.validate(), DomainError);
  badp = {};
  badp.fd_step = 0;
  CHECK_THROWS_AS(badp.validate(), DomainError);
}

TEST_CASE("trajectory persistence") {
  const auto a = random_matrix(4, 2, 12);
  ForwardG lin = [&](const Eigen::VectorXd& z) { return Eigen::VectorXd(a * z); };
  const auto spec = map_objective(esmda::ObservationModel::iid(Eigen::VectorXd::Ones(4), 0.1), 2);
  const auto t = run_variational(Eigen::Vector2d(1, 1), spec, lin, {});
  const auto dir = fs::temp_directory_path() / "subsurf_varinv_traj";
  fs::remove_all(dir);
  write_trajectory(dir, t);
  CHECK(fs::exists(dir / "trajectory.csv"));
  CHECK(fs::exists(dir / "z_0.gfld"));
  fs::remove_all(dir);
}
