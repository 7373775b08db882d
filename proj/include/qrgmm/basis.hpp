#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "qrgmm/errors.hpp"

namespace qrgmm {

enum class BasisKind { identity, polynomial };

// Declarative feature map b(x), shared by fitting and prediction.
//
// identity:   b(x) = x, unchanged. The caller's design matrix carries the
//             constant column if an intercept is wanted.
// polynomial: all monomials of total degree <= degree in the input_dim raw
//             covariates, constant term first. Order is graded
//             lexicographic and frozen: degree blocks ascending, and within
//             a block exponent vectors in descending lexicographic order,
//             e.g. degree 3 on (x1,x2):
//             1, x1, x2, x1^2, x1*x2, x2^2, x1^3, x1^2*x2, x1*x2^2, x2^3.
//             Serialized coefficient tables rely on this order being stable.
struct BasisSpec {
  BasisKind kind = BasisKind::identity;
  int degree = 0;  // polynomial only
  int input_dim = 0;

  static BasisSpec identity(int input_dim);
  static BasisSpec polynomial(int input_dim, int degree);

  int output_dim() const;
  bool operator==(const BasisSpec&) const = default;
};

// Exponent vectors of the polynomial basis, in the frozen canonical order.
std::vector<std::vector<int>> monomial_exponents(int input_dim, int degree);

Eigen::VectorXd expand_basis(const BasisSpec& spec,
                             const Eigen::Ref<const Eigen::VectorXd>& x);

// Row-wise expansion of a design matrix (n x input_dim -> n x output_dim).
Eigen::MatrixXd expand_design(const BasisSpec& spec,
                              const Eigen::Ref<const Eigen::MatrixXd>& X);

std::string to_string(BasisKind kind);
BasisKind basis_kind_from_string(const std::string& s);

}  // namespace qrgmm
