#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "vcfs/error.hpp"
#include "vcfs/spline.hpp"

namespace vcfs {

// Relative pivot tolerance for rank decisions on spline blocks.
inline constexpr double kRankTolerance = 1e-10;

struct FitResult {
  std::vector<int> index_set;
  Eigen::VectorXd gamma;  // stacked per covariate, L entries each, in index_set order
  double sigma_sq = 0.0;
  bool rank_ok = true;
  int dim_L = 0;

  /// gamma_j for covariate j, or throws MissingCovariate.
  Eigen::VectorXd gamma_of(int j) const {
    auto it = std::find(index_set.begin(), index_set.end(), j);
    if (it == index_set.end()) {
      throw MissingCovariate("covariate " + std::to_string(j) + " is not in the fitted set");
    }
    const auto pos = static_cast<Eigen::Index>(it - index_set.begin());
    return gamma.segment(pos * dim_L, dim_L);
  }
};

/// Least-squares fit of y on the stacked blocks. sigma_sq = RSS / n.
inline FitResult fit_full(const std::vector<DesignBlock>& blocks, const Eigen::VectorXd& y) {
  const Eigen::Index n = y.size();
  FitResult fit;
  fit.sigma_sq = y.squaredNorm() / static_cast<double>(n);
  if (blocks.empty()) return fit;

  const Eigen::Index L = blocks.front().matrix.cols();
  fit.dim_L = static_cast<int>(L);
  const Eigen::Index cols = L * static_cast<Eigen::Index>(blocks.size());
  if (cols > n) {
    throw OverParameterized("fit needs " + std::to_string(cols) + " parameters but only " +
                            std::to_string(n) + " observations are available");
  }
  Eigen::MatrixXd design(n, cols);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& m = blocks[b].matrix;
    if (m.rows() != n || m.cols() != L) throw ShapeError("fit_full: inconsistent block shapes");
    design.middleCols(static_cast<Eigen::Index>(b) * L, L) = m;
    fit.index_set.push_back(blocks[b].covariate);
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(kRankTolerance);
  if (qr.rank() == cols) {
    fit.gamma = qr.solve(y);
  } else {
    fit.rank_ok = false;
    Eigen::MatrixXd gram = design.transpose() * design;
    const double ridge = kRankTolerance * gram.diagonal().mean();
    if (!(ridge > 0.0)) throw SingularDesign("design matrix is identically zero");
    gram.diagonal().array() += ridge;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      throw SingularDesign("design Gram matrix is singular after ridge fallback");
    }
    fit.gamma = ldlt.solve(design.transpose() * y);
  }
  fit.sigma_sq = (y - design * fit.gamma).squaredNorm() / static_cast<double>(n);
  return fit;
}

/// Result of scoring one candidate against the current projection.
struct CandidateScore {
  double delta = 0.0;        // sigma^2_S - sigma^2_{S(l)}
  double corr_norm = 0.0;    // |W~^T Y~|
  Eigen::VectorXd gamma;     // gamma_l of the extended marginal model
};

/// Scores an already-residualized block `resid_block` against residual `resid_y`.
/// `scale` is the largest column norm of the unresidualized block, used as the
/// reference for the relative rank test. Returns nullopt if the residualized
/// block has lost rank (candidate collinear with the current model).
inline std::optional<CandidateScore> score_residualized(
    const Eigen::Ref<const Eigen::MatrixXd>& resid_block,
    const Eigen::Ref<const Eigen::VectorXd>& resid_y, double scale) {
  const Eigen::Index n = resid_block.rows();
  const Eigen::Index L = resid_block.cols();
  if (!(scale > 0.0)) return std::nullopt;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(resid_block);
  const auto& r = qr.matrixR();
  for (Eigen::Index i = 0; i < L; ++i) {
    if (std::abs(r(i, i)) <= kRankTolerance * scale) return std::nullopt;
  }
  CandidateScore out;
  out.corr_norm = (resid_block.transpose() * resid_y).norm();
  Eigen::VectorXd qty = qr.householderQ().adjoint() * resid_y;
  out.delta = qty.head(L).squaredNorm() / static_cast<double>(n);
  Eigen::VectorXd z = r.topLeftCorner(L, L).triangularView<Eigen::Upper>().solve(qty.head(L));
  out.gamma = qr.colsPermutation() * z;
  return out;
}

inline double max_column_norm(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  return m.cols() == 0 ? 0.0 : m.colwise().norm().maxCoeff();
}

/// Orthonormal basis of span(W_S) plus the residual of y against it.
///
/// Blocks are added one at a time; each new block is projected off the
/// existing basis (twice, to hold orthogonality) and its Householder Q
/// factor is appended.
class ProjectionCache {
 public:
  explicit ProjectionCache(Eigen::VectorXd y)
      : residual_y_(std::move(y)), basis_(residual_y_.size(), 0) {
    update_sigma();
  }

  static ProjectionCache build(const std::vector<DesignBlock>& blocks, const Eigen::VectorXd& y) {
    ProjectionCache cache(y);
    const Eigen::Index n = y.size();
    Eigen::Index cols = 0;
    for (const auto& b : blocks) cols += b.matrix.cols();
    if (cols > n) {
      throw OverParameterized("projection needs " + std::to_string(cols) +
                              " columns but only " + std::to_string(n) + " observations");
    }
    for (const auto& b : blocks) cache.extend(b);
    return cache;
  }

  Eigen::Index n() const noexcept { return residual_y_.size(); }
  const std::vector<int>& index_set() const noexcept { return index_set_; }
  const Eigen::VectorXd& residual_y() const noexcept { return residual_y_; }
  const Eigen::MatrixXd& orthonormal_basis() const noexcept { return basis_; }
  double sigma_sq() const noexcept { return sigma_sq_; }
  bool contains(int j) const {
    return std::find(index_set_.begin(), index_set_.end(), j) != index_set_.end();
  }

  /// W - P_S W, with one reorthogonalization pass.
  Eigen::MatrixXd residualize(const Eigen::Ref<const Eigen::MatrixXd>& block) const {
    if (block.rows() != n()) throw ShapeError("residualize: row count mismatch");
    Eigen::MatrixXd out = block;
    if (basis_.cols() == 0) return out;
    for (int pass = 0; pass < 2; ++pass) {
      out.noalias() -= basis_ * (basis_.transpose() * out);
    }
    return out;
  }

  /// Adds a block to S and returns the newly appended orthonormal columns.
  Eigen::MatrixXd extend(const DesignBlock& block) {
    if (contains(block.covariate)) {
      throw SingularDesign("covariate " + std::to_string(block.covariate) + " already in the model");
    }
    const Eigen::Index L = block.matrix.cols();
    if (basis_.cols() + L > n()) {
      throw OverParameterized("adding covariate " + std::to_string(block.covariate) +
                              " exceeds the number of observations");
    }
    Eigen::MatrixXd resid = residualize(block.matrix);
    const double scale = max_column_norm(block.matrix);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(resid);
    const auto& r = qr.matrixQR();
    for (Eigen::Index i = 0; i < L; ++i) {
      if (!(std::abs(r(i, i)) > kRankTolerance * scale)) {
        throw SingularDesign("covariate " + std::to_string(block.covariate) +
                             " is collinear with the current model");
      }
    }
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n(), L);
    residual_y_.noalias() -= q * (q.transpose() * residual_y_);
    basis_.conservativeResize(Eigen::NoChange, basis_.cols() + L);
    basis_.rightCols(L) = q;
    index_set_.push_back(block.covariate);
    update_sigma();
    return q;
  }

 private:
  void update_sigma() { sigma_sq_ = residual_y_.squaredNorm() / static_cast<double>(n()); }

  Eigen::VectorXd residual_y_;
  Eigen::MatrixXd basis_;
  std::vector<int> index_set_;
  double sigma_sq_ = 0.0;
};

inline ProjectionCache build_projection_cache(const std::vector<DesignBlock>& blocks,
                                              const Eigen::VectorXd& y) {
  return ProjectionCache::build(blocks, y);
}

/// RSS reduction from adding `candidate` to the cached model, plus gamma_l.
/// nullopt is the candidate-degenerate signal.
inline std::optional<CandidateScore> rss_reduction(const ProjectionCache& cache,
                                                   const DesignBlock& candidate) {
  if (cache.contains(candidate.covariate)) return std::nullopt;
  const Eigen::MatrixXd resid = cache.residualize(candidate.matrix);
  return score_residualized(resid, cache.residual_y(), max_column_norm(candidate.matrix));
}

/// |W~_l^T Y~|, the sequential-Lasso style score.
inline double score_candidate_alt(const ProjectionCache& cache, const DesignBlock& candidate) {
  return (cache.residualize(candidate.matrix).transpose() * cache.residual_y()).norm();
}

/// sum over j in Q of gamma_j^T B(t) x_j; `x_values` follows fit.index_set.
inline double predict(const FitResult& fit, const SplineBasis& basis, double t,
                      const Eigen::Ref<const Eigen::VectorXd>& x_values) {
  if (x_values.size() != static_cast<Eigen::Index>(fit.index_set.size())) {
    throw ShapeError("predict: expected " + std::to_string(fit.index_set.size()) + " covariate values");
  }
  const Eigen::VectorXd b = basis.eval(t);
  double out = 0.0;
  for (Eigen::Index k = 0; k < x_values.size(); ++k) {
    out += fit.gamma.segment(k * basis.dim(), basis.dim()).dot(b) * x_values(k);
  }
  return out;
}

/// beta_j(t) = gamma_j^T B(t) over a grid.
inline Eigen::VectorXd coefficient_curve(const FitResult& fit, const SplineBasis& basis, int j,
                                         const Eigen::Ref<const Eigen::VectorXd>& grid) {
  const Eigen::VectorXd g = fit.gamma_of(j);
  Eigen::VectorXd out(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) out(i) = g.dot(basis.eval(grid(i)));
  return out;
}

}  // namespace vcfs
