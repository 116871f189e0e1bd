#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "subsurf/errors.hpp"
#include "subsurf/esmda/esmda.hpp"
#include "subsurf/io.hpp"

using namespace subsurf;
using namespace subsurf::esmda;
namespace fs = std::filesystem;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> n;
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = n(rng);
  return m;
}

GridField as_column(const Eigen::VectorXd& z) {
  return GridField(std::size_t(z.size()), 1, std::vector<double>(z.data(), z.data() + z.size()));
}

Eigen::VectorXd from_column(const GridField& f) {
  return Eigen::Map<const Eigen::VectorXd>(f.values().data(), Eigen::Index(f.size()));
}

}  // namespace

TEST_CASE("constant inflation schedules") {
  for (std::size_t n : {1u, 4u, 8u}) {
    const auto s = constant_inflation(n);
    CHECK(s.size() == n);
    double sum = 0.0;
    for (double a : s.alphas) {
      CHECK(a == double(n));
      sum += 1.0 / a;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    CHECK_NOTHROW(s.validate());
  }
  CHECK_THROWS_AS(constant_inflation(0), DomainError);
  CHECK_THROWS_AS((InflationSchedule{{2.0, 3.0}}.validate()), DomainError);
  CHECK_NOTHROW((InflationSchedule{{2.0, 4.0, 4.0}}.validate()));
}

TEST_CASE("observation perturbations") {
  const auto m = ObservationModel::iid(Eigen::VectorXd::LinSpaced(3, -1.0, 1.0), 0.02);
  const auto a = perturb_observations(m, 8.0, 100000, 11);
  CHECK(perturb_observations(m, 8.0, 100000, 11) == a);
  for (Eigen::Index i = 0; i < 3; ++i) {
    const double mean = a.row(i).mean();
    const double sd = std::sqrt((a.row(i).array() - mean).square().sum() / (a.cols() - 1.0));
    CHECK(sd == doctest::Approx(std::sqrt(8.0) * 0.02).epsilon(0.01));
  }
  ObservationModel tiny = m;
  tiny.error_variance.setConstant(1e-300);
  const auto t = perturb_observations(tiny, 1.0, 10, 1);
  for (Eigen::Index j = 0; j < 10; ++j) CHECK((t.col(j) - m.d_obs).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK_THROWS_AS(perturb_observations(m, 0.0, 4, 1), DomainError);
}

TEST_CASE("ensemble covariances") {
  Eigen::MatrixXd z(1, 2), d(1, 2);
  z << 0, 2;
  d << 0, 4;
  const auto c = ensemble_covariances(z, d);
  // centered sums: (-1)(-2) + (1)(2) = 4 and (-2)^2 + 2^2 = 8, over N_r - 1 = 1
  CHECK(c.c_zd(0, 0) == doctest::Approx(4.0));
  CHECK(c.c_dd(0, 0) == doctest::Approx(8.0));

  const Eigen::MatrixXd same = Eigen::VectorXd::LinSpaced(4, 0, 3).replicate(1, 6);
  const auto zero = ensemble_covariances(same, same);
  CHECK(zero.c_zd.cwiseAbs().maxCoeff() == 0.0);
  CHECK(zero.c_dd.cwiseAbs().maxCoeff() == 0.0);

  const auto zr = random_matrix(5, 30, 1), dr = random_matrix(12, 30, 2);
  const auto cr = ensemble_covariances(zr, dr);
  CHECK((cr.c_dd - cr.c_dd.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
  // brute-force centered sum
  Eigen::MatrixXd ref = Eigen::MatrixXd::Zero(5, 12);
  for (int j = 0; j < 30; ++j)
    ref += (zr.col(j) - zr.rowwise().mean()) * (dr.col(j) - dr.rowwise().mean()).transpose();
  CHECK((cr.c_zd - ref / 29.0).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK_THROWS_AS(ensemble_covariances(zr.leftCols(1), dr.leftCols(1)), DomainError);
  CHECK_THROWS_AS(ensemble_covariances(zr, dr.leftCols(3)), DomainError);
}

TEST_CASE("covariance rank is bounded by N_r - 1") {
  for (int n_r : {3, 7, 15}) {
    const auto d = random_matrix(20, n_r, 40 + n_r);
    const auto c = ensemble_covariances(random_matrix(2, n_r, n_r), d);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c.c_dd);
    const double lmax = eig.eigenvalues().maxCoeff();
    int rank = 0;
    for (double l : eig.eigenvalues()) rank += l > 1e-10 * lmax;
    CHECK(rank == n_r - 1);
  }
}

TEST_CASE("truncated pseudo-inverse") {
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(4, 4);
  const auto pi = truncated_pseudo_inverse(eye, {1.0});
  CHECK(pi.retained == 4);
  CHECK((pi.inverse - eye).cwiseAbs().maxCoeff() <= 1e-14);

  const Eigen::MatrixXd d = Eigen::Vector3d(4.0, 1.0, 1e-12).asDiagonal();
  const auto pd = truncated_pseudo_inverse(d, {0.99});
  CHECK(pd.retained == 1);
  Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(3, 3);
  expect(0, 0) = 0.25;
  CHECK((pd.inverse - expect).cwiseAbs().maxCoeff() <= 1e-15);

  const auto a = random_matrix(5, 5, 3);
  const Eigen::MatrixXd spd = a * a.transpose() + 5.0 * Eigen::MatrixXd::Identity(5, 5);
  const auto ps = truncated_pseudo_inverse(spd, {1.0});
  CHECK(ps.retained == 5);
  CHECK((ps.inverse * spd - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((ps.inverse - spd.inverse()).cwiseAbs().maxCoeff() <= 1e-10);

  // Noise floor: a 1e-20 eigenvalue is dropped even at E = 1.
  const Eigen::MatrixXd tiny = Eigen::Vector2d(1.0, 1e-20).asDiagonal();
  CHECK(truncated_pseudo_inverse(tiny, {1.0}).retained == 1);

  Eigen::MatrixXd asym = eye;
  asym(0, 1) = 1e-3;
  CHECK_THROWS_AS(truncated_pseudo_inverse(asym, {0.99}), DomainError);
  CHECK_THROWS_AS(truncated_pseudo_inverse(Eigen::MatrixXd::Zero(3, 3), {0.99}), NumericalError);
  CHECK_THROWS_AS(truncated_pseudo_inverse(-eye, {0.99}), NumericalError);
  CHECK_THROWS_AS(truncated_pseudo_inverse(eye, {0.0}), DomainError);
}

TEST_CASE("update step limits") {
  const auto z = random_matrix(3, 50, 5);
  const auto d = random_matrix(6, 50, 6);
  const auto m = ObservationModel::iid(Eigen::VectorXd::Zero(6), 0.1);
  CHECK(esmda_iterate(z, d, d, m, 1.0, {}) == z);

  const auto d_uc = perturb_observations(m, 1.0, 50, 3);
  const auto big = esmda_iterate(z, d, d_uc, m, 1e12, {});
  CHECK((big - z).cwiseAbs().maxCoeff() <= 1e-6 * z.cwiseAbs().maxCoeff());
}

TEST_CASE("scalar Kalman oracle") {
  const double sigma = 0.1, d_obs = 0.7;
  const auto m = ObservationModel::iid(Eigen::VectorXd::Constant(1, d_obs), sigma);
  Rng rng = make_stream(17);
  std::normal_distribution<double> n;
  Eigen::MatrixXd z(1, 5000);
  for (auto& v : z.reshaped()) v = n(rng);
  const auto d_uc = perturb_observations(m, 1.0, 5000, 18);
  const auto post = esmda_iterate(z, z, d_uc, m, 1.0, {1.0});
  CHECK(post.mean() == doctest::Approx(d_obs / (1 + sigma * sigma)).epsilon(0.03));
}

TEST_CASE("update is equivariant under latent rescaling") {
  const auto z = random_matrix(4, 40, 8);
  const auto d = random_matrix(7, 40, 9);
  const auto m = ObservationModel::iid(Eigen::VectorXd::Constant(7, 0.3), 0.2);
  const auto d_uc = perturb_observations(m, 4.0, 40, 10);
  const Eigen::Vector4d s(2.0, 0.5, -3.0, 10.0);
  const auto plain = esmda_iterate(z, d, d_uc, m, 4.0, {});
  const auto scaled = esmda_iterate(s.asDiagonal() * z, d, d_uc, m, 4.0, {});
  CHECK((s.cwiseInverse().asDiagonal() * scaled - plain).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("run_esmda on a linear model") {
  const Eigen::Index n_z = 4, n_obs = 8;
  const auto a = random_matrix(n_obs, n_z, 21);
  const Eigen::Vector4d z_true(1.0, -0.5, 0.8, 1.5);
  const double sigma = 0.1;
  const auto m = ObservationModel::iid(a * z_true, sigma);
  ForwardFn fwd = [&](const GridField& k) { return Eigen::VectorXd(a * from_column(k)); };
  GeneratorFn gen = [](const Eigen::VectorXd& z) { return as_column(z); };
  EsmdaOptions opt;
  opt.n_z = n_z;
  opt.threads = 1;
  const auto rec = run_esmda(fwd, gen, m, 4, 2000, {}, 5, opt);
  CHECK(rec.ensembles.size() == 5);
  CHECK(rec.simulations.size() == 5);
  CHECK(rec.misfit.size() == 5);
  CHECK(rec.retained.size() == 4);
  for (std::size_t k = 1; k < rec.misfit.size(); ++k) CHECK(rec.misfit[k].mean <= rec.misfit[k - 1].mean);

  const Eigen::MatrixXd prec = a.transpose() * a / (sigma * sigma) + Eigen::MatrixXd::Identity(n_z, n_z);
  const Eigen::VectorXd mu = prec.ldlt().solve(a.transpose() * m.d_obs / (sigma * sigma));
  const Eigen::VectorXd mean = rec.final_ensemble().rowwise().mean();
  for (Eigen::Index i = 0; i < n_z; ++i) CHECK(mean[i] == doctest::Approx(mu[i]).epsilon(0.05));

  opt.threads = 3;
  const auto again = run_esmda(fwd, gen, m, 4, 2000, {}, 5, opt);
  CHECK(again.final_ensemble() == rec.final_ensemble());
  CHECK(again.simulations.back() == rec.simulations.back());

  // Iteration-local perturbation streams: the first update does not depend on N_a.
  const auto shorter = run_esmda(fwd, gen, m, 2, 2000, {}, 5, opt);
  const auto s2 = InflationSchedule{{2.0, 4.0, 4.0}};
  EsmdaOptions o2 = opt;
  o2.schedule = s2;
  const auto custom = run_esmda(fwd, gen, m, 3, 2000, {}, 5, o2);
  CHECK((custom.ensembles[1] - shorter.ensembles[1]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("run_esmda errors and initial ensembles") {
  const auto m = ObservationModel::iid(Eigen::VectorXd::Zero(2), 0.1);
  GeneratorFn gen = [](const Eigen::VectorXd& z) { return as_column(z); };
  ForwardFn fails = [](const GridField& k) -> Eigen::VectorXd {
    if (k[0] > 1.0) throw NumericalError("solver blew up");
    return Eigen::VectorXd::Constant(2, k[0]);
  };
  EsmdaOptions opt;
  opt.threads = 1;
  Eigen::MatrixXd init = Eigen::MatrixXd::Zero(1, 4);
  init(0, 2) = 5.0;
  opt.initial = init;
  try {
    run_esmda(fails, gen, m, 2, 4, {}, 1, opt);
    FAIL("expected failure");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("member 2") != std::string::npos);
  }
  opt.initial = Eigen::MatrixXd::Zero(1, 3);
  CHECK_THROWS_AS(run_esmda(fails, gen, m, 2, 4, {}, 1, opt), DomainError);
  opt.initial.reset();
  CHECK_THROWS_AS(run_esmda(fails, gen, m, 2, 4, {}, 1, opt), DomainError);
  opt.n_z = 1;
  CHECK_THROWS_AS(run_esmda(fails, gen, m, 2, 1, {}, 1, opt), DomainError);
}

TEST_CASE("record persistence") {
  const auto m = ObservationModel::iid(Eigen::Vector3d(0.1, 0.2, 0.3), 0.05);
  GeneratorFn gen = [](const Eigen::VectorXd& z) { return as_column(z); };
  ForwardFn fwd = [](const GridField& k) { return Eigen::VectorXd(from_column(k)); };
  EsmdaOptions opt;
  opt.n_z = 3;
  const auto rec = run_esmda(fwd, gen, m, 2, 10, {}, 2, opt);
  const auto dir = fs::temp_directory_path() / "subsurf_esmda_record";
  fs::remove_all(dir);
  write_record(dir, rec);
  for (int k = 0; k < 3; ++k) {
    const auto sub = dir / ("iter_" + std::to_string(k));
    CHECK(read_matrix(sub / "Z.gfld") == rec.ensembles[k]);
    CHECK(fs::exists(sub / "D.csv"));
  }
  CHECK(fs::exists(dir / "misfit.csv"));
  fs::remove_all(dir);
}
