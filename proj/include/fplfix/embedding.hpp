#pragma once

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fplfix/core.hpp"
#include "fplfix/dataset.hpp"

namespace fplfix {

template <typename T>
std::vector<T> l2_normalize(const std::vector<T>& v) {
  double norm2 = 0;
  for (T x : v) norm2 += static_cast<double>(x) * x;
  if (norm2 <= 0) throw DegenerateInput("cannot normalize a zero vector");
  const double inv = 1.0 / std::sqrt(norm2);
  std::vector<T> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<T>(v[i] * inv);
  return out;
}

namespace detail {

template <typename T>
double vector_norm(const std::vector<T>& v) {
  double norm2 = 0;
  for (T x : v) norm2 += static_cast<double>(x) * x;
  return std::sqrt(norm2);
}

}  // namespace detail

// Concatenates two unit-norm branch embeddings with equal energy per branch:
// (t ⊕ m) / sqrt(2). The result is unit-norm.
template <typename T>
std::vector<T> concat_branches(const std::vector<T>& texture, const std::vector<T>& minutiae) {
  if (std::abs(detail::vector_norm(texture) - 1.0) > 1e-6 ||
      std::abs(detail::vector_norm(minutiae) - 1.0) > 1e-6) {
    throw ContractViolation("concat_branches requires unit-norm inputs");
  }
  constexpr double kInvSqrt2 = 0.7071067811865476;
  std::vector<T> out;
  out.reserve(texture.size() + minutiae.size());
  for (T v : texture) out.push_back(static_cast<T>(v * kInvSqrt2));
  for (T v : minutiae) out.push_back(static_cast<T>(v * kInvSqrt2));
  return out;
}

// Learned linear reduction: mean centering plus projection onto the leading
// principal components.
struct ProjectionModel {
  std::uint32_t input_dim = 0;
  std::uint32_t output_dim = 0;
  std::vector<double> mean;                // input_dim
  std::vector<double> basis;               // row-major, output_dim x input_dim
  std::vector<double> explained_variance;  // non-increasing

  // Sub-model over the leading n components; shares the same fit.
  ProjectionModel head(std::uint32_t n) const {
    if (n > output_dim) throw InvalidArgument("head: n exceeds output_dim");
    ProjectionModel m;
    m.input_dim = input_dim;
    m.output_dim = n;
    m.mean = mean;
    m.basis.assign(basis.begin(), basis.begin() + static_cast<std::size_t>(n) * input_dim);
    m.explained_variance.assign(explained_variance.begin(), explained_variance.begin() + n);
    return m;
  }
};

namespace detail {

// Fixes the sign of each basis row so its largest-magnitude entry (first such
// entry on ties) is positive. Makes the decomposition deterministic.
inline void fix_basis_signs(Eigen::MatrixXd& basis_rows) {
  for (Eigen::Index r = 0; r < basis_rows.rows(); ++r) {
    Eigen::Index arg = 0;
    double best = -1;
    for (Eigen::Index c = 0; c < basis_rows.cols(); ++c) {
      const double mag = std::abs(basis_rows(r, c));
      if (mag > best) {
        best = mag;
        arg = c;
      }
    }
    if (basis_rows(r, arg) < 0) basis_rows.row(r) *= -1.0;
  }
}

// Replaces numerically void rows (rank-deficient training data) with
// deterministic orthonormal completions drawn from the canonical basis.
inline void complete_basis(Eigen::MatrixXd& basis_rows, Eigen::Index from_row) {
  const Eigen::Index dim = basis_rows.cols();
  Eigen::Index next_canonical = 0;
  for (Eigen::Index r = from_row; r < basis_rows.rows(); ++r) {
    while (next_canonical < dim) {
      Eigen::VectorXd cand = Eigen::VectorXd::Zero(dim);
      cand(next_canonical++) = 1.0;
      for (Eigen::Index p = 0; p < r; ++p) {
        cand -= basis_rows.row(p).dot(cand) * basis_rows.row(p).transpose();
      }
      const double norm = cand.norm();
      if (norm > 1e-6) {
        basis_rows.row(r) = cand.transpose() / norm;
        break;
      }
    }
    if (next_canonical > dim) throw Error("basis completion failed");
  }
}

}  // namespace detail

// Principal-component fit. Deterministic: eigenvalues sorted descending,
// component signs fixed by the largest-magnitude-entry convention. When the
// feature dimension exceeds the sample count the Gram-matrix route is used.
inline ProjectionModel fit_projection(const std::vector<std::vector<float>>& train,
                                      std::uint32_t n_components) {
  if (train.size() < 2) throw InvalidArgument("fit_projection needs at least 2 samples");
  const std::size_t dim = train[0].size();
  for (const auto& v : train) {
    if (v.size() != dim) throw InvalidArgument("fit_projection: inconsistent vector lengths");
  }
  if (n_components < 1 || n_components > dim) {
    throw InvalidArgument("fit_projection: N must lie in [1, input_dim]");
  }
  if (train.size() <= n_components) {
    throw InvalidArgument("fit_projection needs more samples than components");
  }

  const Eigen::Index M = static_cast<Eigen::Index>(train.size());
  const Eigen::Index D = static_cast<Eigen::Index>(dim);
  const Eigen::Index N = static_cast<Eigen::Index>(n_components);
  Eigen::MatrixXd X(M, D);
  for (Eigen::Index i = 0; i < M; ++i) {
    for (Eigen::Index j = 0; j < D; ++j) X(i, j) = train[static_cast<std::size_t>(i)][j];
  }
  const Eigen::RowVectorXd mean = X.colwise().mean();
  X.rowwise() -= mean;

  Eigen::VectorXd eigenvalues;      // descending, length >= N
  Eigen::MatrixXd components;       // N x D, rows = principal directions
  if (D <= M) {
    const Eigen::MatrixXd cov = (X.transpose() * X) / static_cast<double>(M - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw Error("eigendecomposition failed");
    eigenvalues = solver.eigenvalues().reverse();
    components.resize(N, D);
    for (Eigen::Index r = 0; r < N; ++r) {
      components.row(r) = solver.eigenvectors().col(D - 1 - r).transpose();
    }
  } else {
    const Eigen::MatrixXd gram = (X * X.transpose()) / static_cast<double>(M - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
    if (solver.info() != Eigen::Success) throw Error("eigendecomposition failed");
    eigenvalues = solver.eigenvalues().reverse();
    components.resize(N, D);
    const double lambda_max = std::max(eigenvalues(0), 0.0);
    Eigen::Index valid = 0;
    for (Eigen::Index r = 0; r < N; ++r) {
      const double lambda = eigenvalues(r);
      if (lambda <= 1e-12 * std::max(lambda_max, 1.0)) break;
      // Left singular vector u -> right singular direction X^T u / |X^T u|.
      Eigen::VectorXd dir = X.transpose() * solver.eigenvectors().col(M - 1 - r);
      components.row(r) = dir.transpose() / dir.norm();
      ++valid;
    }
    detail::complete_basis(components, valid);
  }
  detail::fix_basis_signs(components);

  ProjectionModel model;
  model.input_dim = static_cast<std::uint32_t>(D);
  model.output_dim = n_components;
  model.mean.assign(mean.data(), mean.data() + D);
  model.basis.resize(static_cast<std::size_t>(N) * dim);
  for (Eigen::Index r = 0; r < N; ++r) {
    for (Eigen::Index c = 0; c < D; ++c) {
      model.basis[static_cast<std::size_t>(r) * dim + c] = components(r, c);
    }
  }
  model.explained_variance.resize(n_components);
  for (Eigen::Index r = 0; r < N; ++r) {
    model.explained_variance[r] = std::max(eigenvalues(r), 0.0);
  }
  return model;
}

// Projects onto the model's components and re-normalizes to unit length.
template <typename T>
std::vector<float> project(const ProjectionModel& model, const std::vector<T>& v) {
  if (v.size() != model.input_dim) {
    throw InvalidArgument("project: dimension mismatch (got " + std::to_string(v.size()) +
                          ", model expects " + std::to_string(model.input_dim) + ")");
  }
  std::vector<double> projected(model.output_dim, 0.0);
  std::vector<double> centered(model.input_dim);
  for (std::size_t j = 0; j < centered.size(); ++j) centered[j] = v[j] - model.mean[j];
  for (std::size_t r = 0; r < model.output_dim; ++r) {
    const double* row = &model.basis[r * model.input_dim];
    double acc = 0;
    for (std::size_t j = 0; j < centered.size(); ++j) acc += row[j] * centered[j];
    projected[r] = acc;
  }
  double norm2 = 0;
  for (double x : projected) norm2 += x * x;
  if (norm2 < 1e-24) throw DegenerateInput("projection collapsed to the zero vector");
  const double inv = 1.0 / std::sqrt(norm2);
  std::vector<float> out(model.output_dim);
  for (std::size_t r = 0; r < out.size(); ++r) {
    out[r] = static_cast<float>(projected[r] * inv);
  }
  return out;
}

// Naive baseline: keep the first N coordinates and re-normalize.
template <typename T>
std::vector<T> truncate(const std::vector<T>& v, std::size_t n) {
  if (n > v.size()) throw InvalidArgument("truncate: N exceeds vector length");
  std::vector<T> head(v.begin(), v.begin() + n);
  double norm2 = 0;
  for (T x : head) norm2 += static_cast<double>(x) * x;
  if (norm2 <= 0) throw DegenerateInput("truncate: leading coordinates are all zero");
  const double inv = 1.0 / std::sqrt(norm2);
  for (T& x : head) x = static_cast<T>(x * inv);
  return head;
}

inline constexpr char kProjectionMagic[4] = {'F', 'P', 'P', 'J'};
inline constexpr std::uint16_t kProjectionVersion = 1;

inline void write_projection(const ProjectionModel& model, const std::string& path) {
  std::string out;
  out.append(kProjectionMagic, 4);
  detail::put_u16(out, kProjectionVersion);
  detail::put_u32(out, model.input_dim);
  detail::put_u32(out, model.output_dim);
  for (double v : model.mean) detail::put_f64(out, v);
  for (double v : model.basis) detail::put_f64(out, v);
  detail::write_file_bytes(path, out);
}

inline ProjectionModel read_projection(const std::string& path) {
  const auto bytes = detail::read_file_bytes(path);
  detail::ByteReader in(bytes.data(), bytes.size());
  char magic[4];
  for (char& c : magic) c = static_cast<char>(in.u8());
  if (std::memcmp(magic, kProjectionMagic, 4) != 0) {
    throw FormatError("bad projection magic: " + path);
  }
  if (in.u16() != kProjectionVersion) throw FormatError("unsupported projection version: " + path);
  ProjectionModel model;
  model.input_dim = in.u32();
  model.output_dim = in.u32();
  if (model.output_dim > model.input_dim) {
    throw FormatError("projection output_dim exceeds input_dim: " + path);
  }
  const std::size_t expect =
      (std::size_t{model.input_dim} + std::size_t{model.output_dim} * model.input_dim) * 8;
  if (in.remaining() != expect) {
    throw FormatError("projection payload size inconsistent with dims: " + path);
  }
  model.mean.resize(model.input_dim);
  for (auto& v : model.mean) v = in.f64();
  model.basis.resize(std::size_t{model.output_dim} * model.input_dim);
  for (auto& v : model.basis) v = in.f64();
  return model;
}

}  // namespace fplfix
