#include "doctest.h"
#include "helpers.hpp"
#include "povmopt/qdsc.hpp"

using namespace povmopt;
using namespace testing;

namespace {

Povm z_povm() {
  return Povm({DensityMatrix::pure(basis_ket(2, 0)).op(), DensityMatrix::pure(basis_ket(2, 1)).op()});
}

Eigen::Vector3d bloch_vector(const DensityMatrix& rho) {
  return {hs_inner(rho.matrix(), pauli::x()), hs_inner(rho.matrix(), pauli::y()), hs_inner(rho.matrix(), pauli::z())};
}

/// Random rotation of R^3 and the matching qubit unitary exp(-i theta n.sigma / 2).
struct Rotation {
  Eigen::Matrix3d R;
  Matrix U;
};

Rotation random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector3d axis(n(rng), n(rng), n(rng));
  axis.normalize();
  const double theta = 3.0 * n(rng);
  Rotation r;
  r.R = Eigen::AngleAxisd(theta, axis).toRotationMatrix();
  const Matrix ns = axis.x() * pauli::x() + axis.y() * pauli::y() + axis.z() * pauli::z();
  r.U = std::cos(theta / 2) * Matrix::Identity(2, 2) - Complex(0, std::sin(theta / 2)) * ns;
  return r;
}

/// Noisy frequencies of a random POVM on the standard probes.
QdscData noisy_data(const Povm& p, std::uint64_t seed) {
  return QdscData::from_counts(simulate_counts(p, qdsc_probes(), 200, seed));
}

RealMatrix random_symmetric(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  RealMatrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) a(i, k) = g(rng);
  return 0.5 * (a + a.transpose());
}

}  // namespace

TEST_SUITE("qdsc") {
  TEST_CASE("bloch_decompose examples") {
    const auto z = bloch_decompose(z_povm());
    CHECK(z.a.isApprox(Eigen::Vector2d(0.5, 0.5)));
    RealMatrix expected(2, 2);
    expected << 0.25, -0.25, -0.25, 0.25;
    CHECK((z.N - expected).norm() < 1e-15);

    const auto half = HermitianOperator::identity(2) * 0.5;
    const auto coin = bloch_decompose(Povm({half, half}));
    CHECK(coin.N.norm() == 0.0);
    CHECK(coin.B.norm() == 0.0);
    CHECK(coin.N_pinv.norm() == 0.0);

    const auto sic = bloch_decompose(sic_povm_qubit());
    for (int l = 0; l < 4; ++l) CHECK(sic.N(l, l) == doctest::Approx(1.0 / 16).epsilon(1e-12));

    CHECK_THROWS_AS(bloch_decompose(target_povm(Scenario::OneQutrit)), UnsupportedDimension);
  }

  TEST_CASE("bloch model invariants on random POVMs") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const auto p = random_povm(2, 2 + static_cast<int>(seed % 5), seed);
      const auto m = bloch_decompose(p);
      CHECK((m.B.transpose() * m.B - m.N).norm() < 1e-10);
      CHECK(hermitian_eigenvalues(m.N.cast<Complex>()).minCoeff() > -1e-12);
      for (int l = 0; l < p.size(); ++l) CHECK(m.a(l) * m.a(l) - m.N(l, l) >= -1e-9);
      CHECK(m.B(0, 0) == 0.0);
      CHECK(m.B(1, 0) == 0.0);
      CHECK(m.B(1, 1) == 0.0);
      CHECK(m.B(2, 0) >= 0.0);
      CHECK(m.B(0, 1) >= 0.0);
      CHECK((m.N * m.N_pinv * m.N - m.N).norm() < 1e-9);
    }
  }

  TEST_CASE("factor_to_bloch examples") {
    RealMatrix n(2, 2);
    n << 0.25, -0.25, -0.25, 0.25;
    const auto f = factor_to_bloch(n);
    CHECK((f.B.col(0) - Eigen::Vector3d(0, 0, 0.5)).norm() < 1e-12);
    CHECK((f.B.col(1) - Eigen::Vector3d(0, 0, -0.5)).norm() < 1e-12);
    CHECK_FALSE(f.rank_clamped);

    const auto zero = factor_to_bloch(RealMatrix::Zero(3, 3));
    CHECK(zero.B.norm() == 0.0);

    const auto clamped = factor_to_bloch(RealMatrix::Identity(4, 4));
    CHECK(clamped.rank_clamped);
    CHECK(clamped.B.rows() == 3);

    RealMatrix negative = RealMatrix::Identity(2, 2);
    negative(1, 1) = -1e-6;
    CHECK_THROWS_AS(factor_to_bloch(negative), InvalidInput);
    RealMatrix asymmetric = RealMatrix::Identity(2, 2);
    asymmetric(0, 1) = 0.1;
    CHECK_THROWS_AS(factor_to_bloch(asymmetric), InvalidInput);
  }

  TEST_CASE("factor_to_bloch reproduces random Gram matrices") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
      const int L = 2 + trial % 6;
      RealMatrix B(3, L);
      for (int i = 0; i < 3; ++i)
        for (int l = 0; l < L; ++l) B(i, l) = g(rng);
      const RealMatrix N = B.transpose() * B;
      const auto f = factor_to_bloch(N);
      CHECK((f.B.transpose() * f.B - N).norm() <= 1e-8);
      CHECK(f.B(0, 0) == 0.0);
      CHECK(f.B(1, 0) == 0.0);
      CHECK(f.B(1, 1) == 0.0);
    }
  }

  TEST_CASE("pseudo_inverse agrees with a complete orthogonal decomposition") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
      const int L = 3 + trial % 4;
      RealMatrix B(3, L);
      for (int i = 0; i < 3; ++i)
        for (int l = 0; l < L; ++l) B(i, l) = g(rng);
      const RealMatrix N = B.transpose() * B;
      const RealMatrix oracle = N.completeOrthogonalDecomposition().pseudoInverse();
      CHECK((pseudo_inverse(N) - oracle).norm() < 1e-8 * std::max(1.0, oracle.norm()));
    }
  }

  TEST_CASE("SIC POVM and probe examples") {
    const auto sic = sic_povm_qubit();
    CHECK(sic.size() == 4);
    CHECK(is_valid_povm(sic));
    Matrix sum = Matrix::Zero(2, 2);
    for (int l = 0; l < 4; ++l) {
      sum += sic[l].matrix();
      CHECK(sic[l].trace() == doctest::Approx(0.5).epsilon(1e-12));
      for (int k = l + 1; k < 4; ++k) CHECK(hs_inner(sic[l], sic[k]) == doctest::Approx(1.0 / 12).epsilon(1e-12));
    }
    CHECK(frob(sum, Matrix::Identity(2, 2)) < 1e-12);

    const auto probes = qdsc_probes();
    CHECK(probes.size() == 50);
    int equator = 0;
    for (const auto& rho : probes.states()) {
      const auto v = bloch_vector(rho);
      CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-12));
      if (std::abs(v.z()) < 1e-12) ++equator;
    }
    // i = 2 and i = 6 both give cos(i pi / 4) = 0.
    CHECK(equator == 16);
    CHECK(bloch_vector(probes.states()[0]).z() == doctest::Approx(1.0));
    CHECK(bloch_vector(probes.states()[1]).z() == doctest::Approx(-1.0));
  }

  TEST_CASE("QdscData validation") {
    RealMatrix f(2, 1);
    f << 0.4, 0.5;
    CHECK_THROWS_AS(QdscData{f}, InvalidInput);
    f << -0.1, 1.1;
    CHECK_THROWS_AS(QdscData{f}, InvalidInput);
    const auto counts = simulate_counts(sic_povm_qubit(), qdsc_probes(), 200, 1);
    const auto data = QdscData::from_counts(counts);
    CHECK(data.outcomes() == 4);
    CHECK(data.probes() == 50);
    CHECK(data.freqs()(0, 0) == doctest::Approx(counts.counts()(0, 0) / 200.0));
  }

  TEST_CASE("cost examples") {
    const auto sic = sic_povm_qubit();
    const auto model = bloch_decompose(sic);
    const auto exact = QdscData::exact(sic, qdsc_probes());
    CHECK(qdsc_cost(model, exact) < 1e-20);

    const RealMatrix at_a = model.a.replicate(1, 50);
    CHECK(qdsc_cost(model, QdscData(at_a)) == doctest::Approx(50.0).epsilon(1e-12));
    CHECK(qdsc_cost(model.a, RealMatrix::Zero(4, 4), exact) == doctest::Approx(50.0).epsilon(1e-12));

    const auto g = qdsc_gradients(model, exact);
    CHECK(g.a.norm() < 1e-9);
    CHECK(g.N_pinv.norm() < 1e-9);
  }

  TEST_CASE("cost depends only on a and N") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
      const auto p = random_povm(2, 4, rng());
      const auto data = noisy_data(sic_povm_qubit(), rng());
      const auto rot = random_rotation(rng);
      std::vector<HermitianOperator> rotated;
      for (const auto& e : p.elements()) rotated.push_back(HermitianOperator::symmetrized(rot.U * e.matrix() * rot.U.adjoint()));
      const double base = qdsc_cost(bloch_decompose(p), data);
      CHECK(qdsc_cost(bloch_decompose(Povm(rotated)), data) == doctest::Approx(base).epsilon(1e-9));

      const auto m = bloch_decompose(p);
      const RealMatrix rotated_B = rot.R * m.B;
      CHECK((rotated_B.transpose() * rotated_B - m.N).norm() < 1e-12);
    }
  }

  TEST_CASE("Bloch round trip preserves gauge-invariant quantities") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 20; ++trial) {
      const auto p = random_povm(2, 2 + trial % 5, rng());
      const auto m = bloch_decompose(p);
      const auto q = bloch_operators(m.a, m.B);
      REQUIRE(static_cast<int>(q.size()) == p.size());
      for (int i = 0; i < p.size(); ++i) {
        CHECK(std::abs(q[static_cast<std::size_t>(i)].trace() - p[i].trace()) < 1e-9);
        for (int k = 0; k < p.size(); ++k) {
          CHECK(std::abs(hs_inner(q[static_cast<std::size_t>(i)], q[static_cast<std::size_t>(k)]) - hs_inner(p[i], p[k])) <
                1e-9);
        }
      }
      const auto g = gauge_fixed(p);
      const auto mg = bloch_decompose(g);
      CHECK((mg.N - m.N).norm() < 1e-9);
    }
  }

  TEST_CASE("analytic gradients match central finite differences") {
    std::mt19937_64 rng(7);
    const double h = 1e-6;
    for (int trial = 0; trial < 20; ++trial) {
      const int L = 3 + trial % 3;
      const auto data = noisy_data(random_povm(2, L, rng()), rng());
      const auto model = bloch_decompose(random_povm(2, L, rng()));
      // A symmetric N+ from the model plus a non-symmetric perturbation.
      RealMatrix np = model.N_pinv + 0.1 * random_symmetric(L, rng);
      np(0, L - 1) += 0.05;
      const RealVector a = model.a;
      const auto g = qdsc_gradients(a, np, data);

      const double scale_a = std::max(1.0, g.a.cwiseAbs().maxCoeff());
      for (int l = 0; l < L; ++l) {
        RealVector ap = a, am = a;
        ap(l) += h;
        am(l) -= h;
        const double fd = (qdsc_cost(ap, np, data) - qdsc_cost(am, np, data)) / (2 * h);
        CHECK(std::abs(fd - g.a(l)) <= 1e-5 * scale_a);
      }
      const double scale_n = std::max(1.0, g.N_pinv.cwiseAbs().maxCoeff());
      for (int i = 0; i < L; ++i) {
        for (int k = 0; k < L; ++k) {
          RealMatrix p = np, m = np;
          p(i, k) += h;
          m(i, k) -= h;
          const double fd = (qdsc_cost(a, p, data) - qdsc_cost(a, m, data)) / (2 * h);
          CHECK(std::abs(fd - g.N_pinv(i, k)) <= 1e-5 * scale_n);
        }
      }
    }
  }

  TEST_CASE("symmetric N+ gives grad_a = sum 4 s N+ r") {
    const auto model = bloch_decompose(random_povm(2, 4, 8));
    const auto data = noisy_data(sic_povm_qubit(), 9);
    const auto g = qdsc_gradients(model, data);
    RealVector expected = RealVector::Zero(4);
    for (int m = 0; m < data.probes(); ++m) {
      const RealVector r = data.freqs().col(m) - model.a;
      const double s = 1.0 - r.dot(model.N_pinv * r);
      expected += 4.0 * s * model.N_pinv * r;
    }
    CHECK((g.a - expected).norm() <= 1e-10 * std::max(1.0, expected.norm()));
  }

  TEST_CASE("POVM-space objective gradient matches finite differences") {
    std::mt19937_64 rng(10);
    const double h = 1e-6;
    for (int trial = 0; trial < 10; ++trial) {
      const auto objective = make_qdsc_objective(noisy_data(sic_povm_qubit(), rng()));
      const auto p = random_povm(2, 4, rng());
      const auto grad = objective.grad(p);
      double scale = 1.0;
      for (const auto& x : grad) scale = std::max(scale, x.matrix().cwiseAbs().maxCoeff());
      for (int l = 0; l < 3; ++l) {
        for (int idx = 0; idx < 4; ++idx) {
          const auto dir = basis_direction(2, idx);
          std::vector<HermitianOperator> plus(p.free_elements().begin(), p.free_elements().end());
          auto minus = plus;
          plus[static_cast<std::size_t>(l)] += dir * h;
          minus[static_cast<std::size_t>(l)] -= dir * h;
          const double fd = (objective.eval(Povm::complete(plus)) - objective.eval(Povm::complete(minus))) / (2 * h);
          CHECK(std::abs(fd - hs_inner(grad[static_cast<std::size_t>(l)], dir)) <= 1e-5 * scale);
        }
      }
    }
  }

  TEST_CASE("config validation") {
    QdscConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.shots = 0;
    CHECK_THROWS_AS(cfg.validate(), InvalidInput);
    cfg = {};
    cfg.beta = 0.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  }

  TEST_CASE("exact data reconstructs the SIC POVM") {
    const auto sic = sic_povm_qubit();
    QdscConfig cfg;
    cfg.record_iterates = true;
    const auto r = reconstruct_qdsc(QdscData::exact(sic, qdsc_probes()), cfg, &sic);
    CHECK(r.iterations <= 50);
    for (double f : r.fidelity.per_element) CHECK(f >= 0.999);
    for (const auto& rec : r.trace.records) {
      REQUIRE(rec.iterate.has_value());
      CHECK(is_valid_povm(*rec.iterate, 1e-8));
    }
  }

  TEST_CASE("noisy runs keep every iterate valid and accepted costs monotone") {
    QdscConfig cfg;
    cfg.record_iterates = true;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const auto r = run_qdsc(seed, cfg);
      const auto costs = r.trace.accepted_objectives();
      for (std::size_t i = 1; i < costs.size(); ++i) CHECK(costs[i] <= costs[i - 1]);
      for (const auto& rec : r.trace.records) CHECK(is_valid_povm(*rec.iterate, 1e-8));
      CHECK(is_valid_povm(r.povm, 1e-8));
    }
  }

  TEST_CASE("runs are deterministic per seed") {
    const auto a = run_qdsc(4);
    const auto b = run_qdsc(4);
    CHECK(a.iterations == b.iterations);
    CHECK(a.cost == b.cost);
    for (int l = 0; l < 4; ++l) CHECK(a.povm[l].matrix() == b.povm[l].matrix());
  }
}
