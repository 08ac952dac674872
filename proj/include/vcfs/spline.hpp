#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <string>
#include <vector>

#include "vcfs/error.hpp"

namespace vcfs {

/// Clamped B-spline basis on [0,1] with equi-spaced interior knots.
///
/// `order` is degree + 1; `dim` is the number of basis functions. The knot
/// vector has `dim + order` entries: `order` zeros, `dim - order` interior
/// knots at k / (dim - order + 1), then `order` ones. Immutable once built.
class SplineBasis {
 public:
  SplineBasis(int dim, int order) : dim_(dim), order_(order) {
    if (order < 2) {
      throw InvalidConfiguration("spline order must be >= 2, got " + std::to_string(order));
    }
    if (dim < order) {
      throw InvalidConfiguration("basis dimension L=" + std::to_string(dim) +
                                 " is smaller than order " + std::to_string(order));
    }
    const int interior = dim - order;
    knots_.reserve(static_cast<std::size_t>(dim + order));
    knots_.insert(knots_.end(), static_cast<std::size_t>(order), 0.0);
    for (int k = 1; k <= interior; ++k) {
      knots_.push_back(static_cast<double>(k) / static_cast<double>(interior + 1));
    }
    knots_.insert(knots_.end(), static_cast<std::size_t>(order), 1.0);
  }

  int dim() const noexcept { return dim_; }
  int order() const noexcept { return order_; }
  const std::vector<double>& knots() const noexcept { return knots_; }

  std::vector<double> interior_knots() const {
    return {knots_.begin() + order_, knots_.end() - order_};
  }

  /// Index mu of the knot span [knots[mu], knots[mu+1]) holding t.
  /// t = 1 maps to the last nonempty span.
  int span(double t) const {
    if (t >= 1.0) return dim_ - 1;
    auto it = std::upper_bound(knots_.begin() + order_, knots_.begin() + dim_, t);
    return static_cast<int>(it - knots_.begin()) - 1;
  }

  /// Writes the `order` possibly nonzero values B_{mu-order+1..mu}(t) into
  /// `local` and returns mu. Cox-de Boor triangle, O(order^2).
  int eval_local(double t, double* local) const {
    check_domain(t);
    const int mu = span(t);
    const int k = order_;
    double left[16];
    double right[16];
    local[0] = 1.0;
    for (int j = 1; j < k; ++j) {
      left[j] = t - knots_[static_cast<std::size_t>(mu + 1 - j)];
      right[j] = knots_[static_cast<std::size_t>(mu + j)] - t;
      double saved = 0.0;
      for (int r = 0; r < j; ++r) {
        const double denom = right[r + 1] + left[j - r];
        const double tmp = local[r] / denom;
        local[r] = saved + right[r + 1] * tmp;
        saved = left[j - r] * tmp;
      }
      local[j] = saved;
    }
    return mu;
  }

  /// Full length-`dim` basis vector B(t).
  Eigen::VectorXd eval(double t) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(dim_);
    double local[16];
    const int mu = eval_local(t, local);
    for (int r = 0; r < order_; ++r) out(mu - order_ + 1 + r) = local[r];
    return out;
  }

  /// n x dim matrix whose row i is B(t_i).
  Eigen::MatrixXd basis_matrix(const Eigen::Ref<const Eigen::VectorXd>& t_values) const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(t_values.size(), dim_);
    double local[16];
    for (Eigen::Index i = 0; i < t_values.size(); ++i) {
      const int mu = eval_local(t_values(i), local);
      for (int r = 0; r < order_; ++r) out(i, mu - order_ + 1 + r) = local[r];
    }
    return out;
  }

 private:
  static void check_domain(double t) {
    if (!(t >= 0.0 && t <= 1.0)) {
      throw DomainError("index value " + std::to_string(t) + " outside [0,1]; rescale first");
    }
  }

  int dim_;
  int order_;
  std::vector<double> knots_;
};

inline SplineBasis build_basis(int dim, int order = 4) {
  if (order > 16) throw InvalidConfiguration("spline order above 16 is not supported");
  return SplineBasis(dim, order);
}

inline Eigen::VectorXd eval_basis(const SplineBasis& basis, double t) { return basis.eval(t); }

/// Spline regressors of one covariate: row i is B(T_i) * X_ij.
struct DesignBlock {
  int covariate = 0;
  Eigen::MatrixXd matrix;
};

inline DesignBlock design_block(const SplineBasis& basis,
                                const Eigen::Ref<const Eigen::VectorXd>& t_values,
                                const Eigen::Ref<const Eigen::VectorXd>& x_column,
                                int covariate = 0) {
  if (t_values.size() != x_column.size()) {
    throw ShapeError("design_block: t has " + std::to_string(t_values.size()) +
                     " rows but x has " + std::to_string(x_column.size()));
  }
  DesignBlock block{covariate, basis.basis_matrix(t_values)};
  block.matrix.array().colwise() *= x_column.array();
  return block;
}

/// Same as design_block, reusing a precomputed basis matrix.
inline DesignBlock design_block_from(const Eigen::MatrixXd& basis_rows,
                                     const Eigen::Ref<const Eigen::VectorXd>& x_column,
                                     int covariate) {
  if (basis_rows.rows() != x_column.size()) {
    throw ShapeError("design_block: basis rows and covariate length differ");
  }
  DesignBlock block{covariate, basis_rows};
  block.matrix.array().colwise() *= x_column.array();
  return block;
}

}  // namespace vcfs
