#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <random>

#include "fplfix/compare.hpp"
#include "fplfix/embedding.hpp"
#include "helpers.hpp"

using namespace fplfix;

namespace {

double dnorm(const std::vector<double>& v) {
  double n = 0;
  for (double x : v) n += x * x;
  return std::sqrt(n);
}

std::vector<double> random_unit_d(std::mt19937& rng, std::size_t dim) {
  std::normal_distribution<double> normal(0, 1);
  std::vector<double> v(dim);
  double n2 = 0;
  for (auto& x : v) {
    x = normal(rng);
    n2 += x * x;
  }
  const double inv = 1.0 / std::sqrt(n2);
  for (auto& x : v) x *= inv;
  return v;
}

// Power-iteration oracle for the leading eigenvalue of a covariance matrix,
// independent of the library's eigensolver.
double power_iteration_top_eigenvalue(const std::vector<std::vector<double>>& cov) {
  const std::size_t n = cov.size();
  std::vector<double> v(n, 1.0 / std::sqrt(static_cast<double>(n)));
  double lambda = 0;
  for (int iter = 0; iter < 5000; ++iter) {
    std::vector<double> w(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) w[i] += cov[i][j] * v[j];
    }
    const double norm = dnorm(w);
    if (norm == 0) return 0;
    for (std::size_t i = 0; i < n; ++i) w[i] /= norm;
    double next = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0;
      for (std::size_t j = 0; j < n; ++j) acc += cov[i][j] * w[j];
      next += w[i] * acc;
    }
    if (std::abs(next - lambda) < 1e-13 * std::max(1.0, std::abs(next))) {
      return next;
    }
    lambda = next;
    v = std::move(w);
  }
  return lambda;
}

}  // namespace

TEST_CASE("l2_normalize analytic cases", "[embedding]") {
  const std::vector<double> v = l2_normalize(std::vector<double>{3, 4});
  CHECK_THAT(v[0], Catch::Matchers::WithinAbs(0.6, 1e-15));
  CHECK_THAT(v[1], Catch::Matchers::WithinAbs(0.8, 1e-15));

  std::mt19937 rng(2);
  const std::vector<double> unit = random_unit_d(rng, 32);
  const std::vector<double> again = l2_normalize(unit);
  for (std::size_t i = 0; i < unit.size(); ++i) {
    CHECK_THAT(again[i], Catch::Matchers::WithinAbs(unit[i], 1e-9));
  }
  CHECK_THAT(dnorm(again), Catch::Matchers::WithinAbs(1.0, 1e-9));

  CHECK_THROWS_AS(l2_normalize(std::vector<double>{0, 0, 0}), DegenerateInput);
}

TEST_CASE("concat analytic case and length arithmetic", "[embedding]") {
  const std::vector<double> t{1, 0};
  const std::vector<double> m{0, 1};
  const auto c = concat_branches(t, m);
  REQUIRE(c.size() == 4);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  CHECK_THAT(c[0], Catch::Matchers::WithinAbs(inv_sqrt2, 1e-15));
  CHECK_THAT(c[1], Catch::Matchers::WithinAbs(0, 1e-15));
  CHECK_THAT(c[3], Catch::Matchers::WithinAbs(inv_sqrt2, 1e-15));
  CHECK_THAT(dnorm(c), Catch::Matchers::WithinAbs(1.0, 1e-9));

  std::mt19937 rng(5);
  CHECK(concat_branches(random_unit_d(rng, 256), random_unit_d(rng, 256)).size() == 512);

  CHECK_THROWS_AS(concat_branches(std::vector<double>{1, 1}, m), ContractViolation);
}

TEST_CASE("concat cosine identity on random unit vectors", "[embedding]") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const auto t1 = random_unit_d(rng, 24);
    const auto t2 = random_unit_d(rng, 24);
    const auto m1 = random_unit_d(rng, 16);
    const auto m2 = random_unit_d(rng, 16);
    const double lhs = 2 * cosine(concat_branches(t1, m1), concat_branches(t2, m2));
    const double rhs = cosine(t1, t2) + cosine(m1, m2);
    CHECK_THAT(lhs, Catch::Matchers::WithinAbs(rhs, 1e-9));
  }
}

TEST_CASE("PCA on a line finds the line", "[embedding]") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-2, 2);
  const std::vector<double> direction = l2_normalize(std::vector<double>{1.0, -2.0, 0.5});
  std::vector<std::vector<float>> train;
  for (int i = 0; i < 40; ++i) {
    const double s = u(rng);
    train.push_back({static_cast<float>(s * direction[0]), static_cast<float>(s * direction[1]),
                     static_cast<float>(s * direction[2])});
  }
  const ProjectionModel model = fit_projection(train, 1);
  REQUIRE(model.output_dim == 1);
  double dot = 0;
  for (int j = 0; j < 3; ++j) dot += model.basis[j] * direction[j];
  CHECK(std::abs(dot) >= 1.0 - 1e-6);
  CHECK(model.explained_variance.size() == 1);
}

TEST_CASE("full-dimension projection acts as a rotation", "[embedding]") {
  std::mt19937 rng(13);
  const std::size_t dim = 12;
  std::vector<std::vector<float>> train;
  for (int i = 0; i < 60; ++i) train.push_back(testutil::random_unit_vector(rng, dim));
  // Mean-center the data so the projection's centering is a no-op.
  std::vector<double> mean(dim, 0.0);
  for (const auto& v : train) {
    for (std::size_t j = 0; j < dim; ++j) mean[j] += v[j];
  }
  for (auto& m : mean) m /= train.size();
  for (auto& v : train) {
    for (std::size_t j = 0; j < dim; ++j) v[j] = static_cast<float>(v[j] - mean[j]);
  }

  const ProjectionModel model = fit_projection(train, static_cast<std::uint32_t>(dim));
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t a = rng() % train.size();
    const std::size_t b = rng() % train.size();
    if (a == b) continue;
    const auto pa = project(model, train[a]);
    const auto pb = project(model, train[b]);
    const auto na = l2_normalize(train[a]);
    const auto nb = l2_normalize(train[b]);
    CHECK_THAT(cosine(pa, pb), Catch::Matchers::WithinAbs(cosine(na, nb), 1e-6));
  }
}

TEST_CASE("explained variance is non-increasing and matches power iteration", "[embedding]") {
  std::mt19937 rng(17);
  std::normal_distribution<double> normal(0, 1);
  const std::size_t dim = 16;
  std::vector<std::vector<float>> train;
  for (int i = 0; i < 100; ++i) {
    std::vector<float> v(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      // Anisotropic scales so the spectrum is spread out.
      v[j] = static_cast<float>(normal(rng) * (1.0 + static_cast<double>(dim - j)));
    }
    train.push_back(std::move(v));
  }
  const ProjectionModel model = fit_projection(train, 4);
  for (std::size_t i = 1; i < model.explained_variance.size(); ++i) {
    CHECK(model.explained_variance[i] <= model.explained_variance[i - 1]);
  }

  // Cross-check the top eigenvalue with an independent power iteration.
  std::vector<double> mean(dim, 0.0);
  for (const auto& v : train) {
    for (std::size_t j = 0; j < dim; ++j) mean[j] += v[j];
  }
  for (auto& m : mean) m /= train.size();
  std::vector<std::vector<double>> cov(dim, std::vector<double>(dim, 0.0));
  for (const auto& v : train) {
    for (std::size_t i = 0; i < dim; ++i) {
      for (std::size_t j = 0; j < dim; ++j) {
        cov[i][j] += (v[i] - mean[i]) * (v[j] - mean[j]);
      }
    }
  }
  for (auto& row : cov) {
    for (auto& x : row) x /= (train.size() - 1);
  }
  const double top = power_iteration_top_eigenvalue(cov);
  CHECK_THAT(model.explained_variance[0], Catch::Matchers::WithinRel(top, 1e-8));
}

TEST_CASE("fit_projection is deterministic and validates inputs", "[embedding]") {
  std::mt19937 rng(19);
  std::vector<std::vector<float>> train;
  for (int i = 0; i < 30; ++i) train.push_back(testutil::random_unit_vector(rng, 8));
  const ProjectionModel a = fit_projection(train, 3);
  const ProjectionModel b = fit_projection(train, 3);
  CHECK(a.basis == b.basis);
  CHECK(a.mean == b.mean);
  CHECK(a.explained_variance == b.explained_variance);

  CHECK_THROWS_AS(fit_projection(train, 9), InvalidArgument);   // N > input_dim
  CHECK_THROWS_AS(fit_projection({train[0]}, 1), InvalidArgument);
  CHECK_THROWS_AS(fit_projection(train, 30), InvalidArgument);  // |train| <= N
}

TEST_CASE("gram-route PCA agrees with the covariance route", "[embedding]") {
  // dim > samples forces the Gram path; a widened copy of the same geometry
  // checked against explicit covariance eigenvalues via power iteration.
  std::mt19937 rng(23);
  std::normal_distribution<double> normal(0, 1);
  const std::size_t dim = 20;
  std::vector<std::vector<float>> train;
  for (int i = 0; i < 12; ++i) {
    std::vector<float> v(dim);
    for (auto& x : v) x = static_cast<float>(normal(rng));
    train.push_back(std::move(v));
  }
  const ProjectionModel model = fit_projection(train, 5);
  REQUIRE(model.output_dim == 5);
  // Basis rows orthonormal.
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t s = r; s < 5; ++s) {
      double dot = 0;
      for (std::size_t j = 0; j < dim; ++j) {
        dot += model.basis[r * dim + j] * model.basis[s * dim + j];
      }
      CHECK_THAT(dot, Catch::Matchers::WithinAbs(r == s ? 1.0 : 0.0, 1e-8));
    }
  }
  for (std::size_t i = 1; i < model.explained_variance.size(); ++i) {
    CHECK(model.explained_variance[i] <= model.explained_variance[i - 1]);
  }
}

TEST_CASE("project handles identity and degenerate cases", "[embedding]") {
  ProjectionModel identity;
  identity.input_dim = 3;
  identity.output_dim = 3;
  identity.mean = {0, 0, 0};
  identity.basis = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  identity.explained_variance = {1, 1, 1};
  const std::vector<float> v = {0.6f, 0.8f, 0.0f};
  const auto out = project(identity, v);
  for (std::size_t i = 0; i < 3; ++i) CHECK_THAT(out[i], Catch::Matchers::WithinAbs(v[i], 1e-7));

  std::mt19937 rng(29);
  std::vector<std::vector<float>> train;
  for (int i = 0; i < 20; ++i) train.push_back(testutil::random_unit_vector(rng, 6));
  const ProjectionModel model = fit_projection(train, 2);
  // The mean itself centers to the zero vector.
  CHECK_THROWS_AS(project(model, model.mean), DegenerateInput);
  CHECK_THROWS_AS(project(model, std::vector<float>(5, 0.1f)), InvalidArgument);
}

TEST_CASE("truncate keeps the leading coordinates", "[embedding]") {
  const std::vector<double> v{0.6, 0.8, 0, 0};
  const auto t = truncate(v, 2);
  REQUIRE(t.size() == 2);
  CHECK_THAT(t[0], Catch::Matchers::WithinAbs(0.6, 1e-12));
  CHECK_THAT(t[1], Catch::Matchers::WithinAbs(0.8, 1e-12));

  std::mt19937 rng(31);
  const auto u = random_unit_d(rng, 64);
  CHECK(truncate(u, 64) == u);
  CHECK_THAT(dnorm(truncate(u, 32)), Catch::Matchers::WithinAbs(1.0, 1e-9));

  CHECK_THROWS_AS(truncate(std::vector<double>{0, 0, 1}, 2), DegenerateInput);
  CHECK_THROWS_AS(truncate(std::vector<double>{1}, 2), InvalidArgument);
}

TEST_CASE("projection model round-trips through the model file", "[embedding]") {
  std::mt19937 rng(37);
  std::vector<std::vector<float>> train;
  for (int i = 0; i < 25; ++i) train.push_back(testutil::random_unit_vector(rng, 10));
  const ProjectionModel model = fit_projection(train, 4);
  testutil::TempDir dir("proj");
  write_projection(model, dir.file("m.fppj"));
  const ProjectionModel back = read_projection(dir.file("m.fppj"));
  CHECK(back.input_dim == model.input_dim);
  CHECK(back.output_dim == model.output_dim);
  CHECK(back.mean == model.mean);
  CHECK(back.basis == model.basis);

  auto bytes = detail::read_file_bytes(dir.file("m.fppj"));
  bytes[0] = 'Z';
  {
    std::ofstream out(dir.file("bad.fppj"), std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
  }
  CHECK_THROWS_AS(read_projection(dir.file("bad.fppj")), FormatError);
}
