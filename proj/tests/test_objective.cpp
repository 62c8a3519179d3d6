#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "mdc/objective.hpp"

using namespace mdc;

namespace {

EmbeddingMatrix random_embeddings(int tf, int d, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  EmbeddingMatrix V;
  V.data.resize(tf, d);
  for (int i = 0; i < tf; ++i) {
    for (int j = 0; j < d; ++j) V.data(i, j) = gauss(rng);
    V.data.row(i).normalize();
  }
  V.n_frames = 1;
  V.n_freqs = tf;
  V.dim = d;
  return V;
}

std::vector<int> random_labels(int tf, int n, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, n - 1);
  std::vector<int> labels(tf);
  for (auto& l : labels) l = pick(rng);
  return labels;
}

}  // namespace

TEST_CASE("loss is zero when V rows equal Y rows") {
  for (TargetMode mode : {TargetMode::OneHot, TargetMode::Simplex}) {
    const TargetMatrix Y = make_targets({0, 1, 0, 1, 1}, 2, mode);
    EmbeddingMatrix V;
    V.data = Y.data;
    V.n_frames = 1;
    V.n_freqs = 5;
    V.dim = 2;
    CHECK(affinity_loss_expanded(V, Y).value == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(affinity_loss_pairwise(V, Y).value == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("collapsed different-speaker pair: DC loss 2, M-DC loss 8") {
  // TF=2, D=1, both embeddings at the same point, different speakers.
  EmbeddingMatrix V;
  V.data.resize(2, 1);
  V.data << 1.0, 1.0;
  V.n_frames = 1;
  V.n_freqs = 2;
  V.dim = 1;
  const TargetMatrix onehot = make_targets({0, 1}, 2, TargetMode::OneHot);
  const TargetMatrix simplex = make_targets({0, 1}, 2, TargetMode::Simplex);
  CHECK(affinity_loss_expanded(V, onehot).value ==
        doctest::Approx(2.0).epsilon(1e-12));
  CHECK(affinity_loss_expanded(V, simplex).value ==
        doctest::Approx(8.0).epsilon(1e-12));
}

TEST_CASE("penalty ratio is (N/(N-1))^2 for a collapsed pair") {
  for (int n : {2, 3, 4, 5}) {
    EmbeddingMatrix V;
    V.data.resize(2, 1);
    V.data << 1.0, 1.0;
    V.n_frames = 1;
    V.n_freqs = 2;
    V.dim = 1;
    const double dc =
        affinity_loss_expanded(V, make_targets({0, 1}, n, TargetMode::OneHot))
            .value;
    const double mdc =
        affinity_loss_expanded(V, make_targets({0, 1}, n, TargetMode::Simplex))
            .value;
    const double expected = (static_cast<double>(n) / (n - 1)) *
                            (static_cast<double>(n) / (n - 1));
    CHECK(mdc / dc == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("expanded and pairwise forms agree on random inputs") {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int> tf_pick(2, 200), d_pick(1, 10),
      n_pick(2, 4);
  for (int trial = 0; trial < 40; ++trial) {
    const int tf = tf_pick(rng), d = d_pick(rng), n = n_pick(rng);
    const EmbeddingMatrix V = random_embeddings(tf, d, rng);
    for (TargetMode mode : {TargetMode::OneHot, TargetMode::Simplex}) {
      const TargetMatrix Y = make_targets(random_labels(tf, n, rng), n, mode);
      const double expanded = affinity_loss_expanded(V, Y).value;
      const double pairwise = affinity_loss_pairwise(V, Y).value;
      CHECK(std::abs(expanded - pairwise) / pairwise < 1e-10);
    }
  }
}

TEST_CASE("pairwise loss edge cases") {
  std::mt19937_64 rng(7);
  SUBCASE("single bin is always zero") {
    const EmbeddingMatrix V = random_embeddings(1, 3, rng);
    const TargetMatrix Y = make_targets({0}, 2, TargetMode::OneHot);
    CHECK(affinity_loss_pairwise(V, Y).value ==
          doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("all-equal rows, one speaker everywhere") {
    EmbeddingMatrix V;
    V.data = Eigen::MatrixXd::Zero(6, 2);
    V.data.col(0).setOnes();
    V.n_frames = 1;
    V.n_freqs = 6;
    V.dim = 2;
    const TargetMatrix Y =
        make_targets({1, 1, 1, 1, 1, 1}, 2, TargetMode::OneHot);
    CHECK(affinity_loss_pairwise(V, Y).value ==
          doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("TF cap is enforced") {
    const EmbeddingMatrix V = random_embeddings(10, 2, rng);
    const TargetMatrix Y =
        make_targets(random_labels(10, 2, rng), 2, TargetMode::OneHot);
    CHECK_THROWS_AS(affinity_loss_pairwise(V, Y, 5), std::invalid_argument);
  }
}

TEST_CASE("shape and normalization validation") {
  std::mt19937_64 rng(3);
  EmbeddingMatrix V = random_embeddings(4, 2, rng);
  const TargetMatrix Y = make_targets({0, 1, 0}, 2, TargetMode::OneHot);
  CHECK_THROWS_AS(affinity_loss_expanded(V, Y), std::invalid_argument);
  V.data(0, 0) *= 2.0;  // break normalization
  const TargetMatrix Y4 = make_targets({0, 1, 0, 1}, 2, TargetMode::OneHot);
  CHECK_THROWS_AS(affinity_loss_expanded(V, Y4), std::invalid_argument);
}

TEST_CASE("gradient vanishes at the minimum V = Y") {
  const TargetMatrix Y = make_targets({0, 1, 1, 0}, 2, TargetMode::Simplex);
  EmbeddingMatrix V;
  V.data = Y.data;
  V.n_frames = 1;
  V.n_freqs = 4;
  V.dim = 2;
  const LossValue lv = affinity_loss_gradient(V, Y);
  CHECK(lv.gradient->cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gradient matches central finite differences") {
  std::mt19937_64 rng(11);
  auto raw_loss = [](const Eigen::MatrixXd& V, const Eigen::MatrixXd& Y) {
    return (V.transpose() * V).squaredNorm() +
           (Y.transpose() * Y).squaredNorm() -
           2.0 * (V.transpose() * Y).squaredNorm();
  };
  std::uniform_int_distribution<int> coord(0, 1 << 20);
  for (TargetMode mode : {TargetMode::OneHot, TargetMode::Simplex}) {
    const int tf = 30, d = 5, n = 3;
    const EmbeddingMatrix V = random_embeddings(tf, d, rng);
    const TargetMatrix Y = make_targets(random_labels(tf, n, rng), n, mode);
    const LossValue lv = affinity_loss_gradient(V, Y);
    const double h = 1e-5;
    for (int c = 0; c < 50; ++c) {
      const int i = coord(rng) % tf, j = coord(rng) % d;
      Eigen::MatrixXd plus = V.data, minus = V.data;
      plus(i, j) += h;
      minus(i, j) -= h;
      const double fd =
          (raw_loss(plus, Y.data) - raw_loss(minus, Y.data)) / (2 * h);
      const double an = (*lv.gradient)(i, j);
      CHECK(std::abs(an - fd) / std::max(std::abs(fd), 1e-6) < 1e-6);
    }
  }
}

TEST_CASE("gradient odd-symmetry under V -> -V") {
  // Both terms of 4V(V'V) - 4Y(Y'V) flip sign with V.
  std::mt19937_64 rng(13);
  const EmbeddingMatrix V = random_embeddings(20, 4, rng);
  const TargetMatrix Y =
      make_targets(random_labels(20, 3, rng), 3, TargetMode::Simplex);
  EmbeddingMatrix negV = V;
  negV.data = -V.data;
  const LossValue g1 = affinity_loss_gradient(V, Y);
  const LossValue g2 = affinity_loss_gradient(negV, Y);
  CHECK((*g2.gradient + *g1.gradient).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("loss depends on V only through its Gram matrix") {
  std::mt19937_64 rng(17);
  const int d = 6;
  const EmbeddingMatrix V = random_embeddings(50, d, rng);
  const TargetMatrix Y =
      make_targets(random_labels(50, 2, rng), 2, TargetMode::OneHot);
  // Random orthogonal Q via QR of a Gaussian matrix.
  Eigen::MatrixXd G(d, d);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) G(i, j) = gauss(rng);
  }
  const Eigen::MatrixXd Q =
      Eigen::HouseholderQR<Eigen::MatrixXd>(G).householderQ();
  EmbeddingMatrix VQ = V;
  VQ.data = V.data * Q;
  CHECK(affinity_loss_expanded(VQ, Y).value ==
        doctest::Approx(affinity_loss_expanded(V, Y).value).epsilon(1e-10));
}

TEST_CASE("chimera loss endpoints and affinity in alpha") {
  std::mt19937_64 rng(23);
  const int T = 4, F = 5, N = 2;
  const EmbeddingMatrix V = random_embeddings(T * F, 3, rng);
  const TargetMatrix Y =
      make_targets(random_labels(T * F, N, rng), N, TargetMode::Simplex);
  MaskInferenceInputs mi;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  mi.mix_mag = Eigen::MatrixXd::NullaryExpr(T, F, [&]() { return unit(rng); });
  for (int n = 0; n < N; ++n) {
    mi.src_mags.push_back(
        Eigen::MatrixXd::NullaryExpr(T, F, [&]() { return unit(rng); }));
    mi.masks.push_back(
        Eigen::MatrixXd::NullaryExpr(T, F, [&]() { return unit(rng); }));
  }

  const double tf = T * F;
  const ChimeraLoss at1 = chimera_loss(V, Y, mi, 1.0);
  CHECK(at1.value ==
        doctest::Approx(affinity_loss_expanded(V, Y).value / tf).epsilon(1e-12));

  const ChimeraLoss at0 = chimera_loss(V, Y, mi, 0.0);
  CHECK(at0.dc_term == 0.0);

  const ChimeraLoss mid = chimera_loss(V, Y, mi, 0.5);
  CHECK(mid.value ==
        doctest::Approx(0.5 * (at0.value + at1.value)).epsilon(1e-12));

  // Affine in alpha across the grid.
  for (double a : {0.25, 0.75}) {
    const ChimeraLoss at_a = chimera_loss(V, Y, mi, a);
    CHECK(at_a.value ==
          doctest::Approx(a * at1.value + (1 - a) * at0.value).epsilon(1e-12));
  }

  CHECK_THROWS_AS(chimera_loss(V, Y, mi, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(chimera_loss(V, Y, mi, -0.1), std::invalid_argument);
}

TEST_CASE("chimera MI term is zero for ideal masks on disjoint sources") {
  const int T = 3, F = 4, N = 2;
  // TF-disjoint sources: speaker 0 owns the left half, speaker 1 the right.
  MaskInferenceInputs mi;
  mi.src_mags.assign(N, Eigen::MatrixXd::Zero(T, F));
  mi.masks.assign(N, Eigen::MatrixXd::Zero(T, F));
  for (int t = 0; t < T; ++t) {
    for (int f = 0; f < F; ++f) {
      const int owner = f < F / 2 ? 0 : 1;
      mi.src_mags[owner](t, f) = 0.5 + 0.1 * t + 0.05 * f;
      mi.masks[owner](t, f) = 1.0;
    }
  }
  mi.mix_mag = mi.src_mags[0] + mi.src_mags[1];
  EmbeddingMatrix V;  // unused at alpha = 0
  TargetMatrix Y;
  const ChimeraLoss loss = chimera_loss(V, Y, mi, 0.0);
  CHECK(loss.value == doctest::Approx(0.0).epsilon(1e-12));
  // Swapped masks are recovered by the permutation search.
  std::swap(mi.masks[0], mi.masks[1]);
  const ChimeraLoss swapped = chimera_loss(V, Y, mi, 0.0);
  CHECK(swapped.value == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(swapped.permutation == std::vector<int>{1, 0});
}

TEST_CASE("chimera mask gradients match finite differences") {
  std::mt19937_64 rng(31);
  const int T = 3, F = 4, N = 2;
  std::uniform_real_distribution<double> unit(0.1, 0.9);
  MaskInferenceInputs mi;
  mi.mix_mag = Eigen::MatrixXd::NullaryExpr(T, F, [&]() { return unit(rng); });
  for (int n = 0; n < N; ++n) {
    mi.src_mags.push_back(
        Eigen::MatrixXd::NullaryExpr(T, F, [&]() { return unit(rng); }));
    mi.masks.push_back(
        Eigen::MatrixXd::NullaryExpr(T, F, [&]() { return unit(rng); }));
  }
  EmbeddingMatrix V;
  TargetMatrix Y;
  const ChimeraLoss loss = chimera_loss(V, Y, mi, 0.0, true);
  const double h = 1e-6;
  for (int n = 0; n < N; ++n) {
    for (int t = 0; t < T; ++t) {
      for (int f = 0; f < F; ++f) {
        MaskInferenceInputs p = mi, m = mi;
        p.masks[n](t, f) += h;
        m.masks[n](t, f) -= h;
        const double fd = (chimera_loss(V, Y, p, 0.0).value -
                           chimera_loss(V, Y, m, 0.0).value) /
                          (2 * h);
        CHECK((*loss.grad_masks)[n](t, f) == doctest::Approx(fd).epsilon(1e-5));
      }
    }
  }
}
