#include "qrgmm/basis.hpp"

#include <algorithm>

namespace qrgmm {

BasisSpec BasisSpec::identity(int input_dim) {
  if (input_dim < 1) throw InvalidArgument("identity basis needs input_dim >= 1");
  BasisSpec spec;
  spec.kind = BasisKind::identity;
  spec.degree = 0;
  spec.input_dim = input_dim;
  return spec;
}

BasisSpec BasisSpec::polynomial(int input_dim, int degree) {
  if (input_dim < 1) throw InvalidArgument("polynomial basis needs input_dim >= 1");
  if (degree < 1) throw InvalidArgument("polynomial basis needs degree >= 1");
  BasisSpec spec;
  spec.kind = BasisKind::polynomial;
  spec.degree = degree;
  spec.input_dim = input_dim;
  return spec;
}

int BasisSpec::output_dim() const {
  if (kind == BasisKind::identity) return input_dim;
  // Number of monomials of total degree <= degree in input_dim variables:
  // binomial(input_dim + degree, degree).
  long long count = 1;
  for (int i = 1; i <= degree; ++i) {
    count = count * (input_dim + i) / i;
  }
  return static_cast<int>(count);
}

namespace {

void enumerate(int remaining_vars, int remaining_degree, std::vector<int>& current,
               std::vector<std::vector<int>>& out) {
  if (remaining_vars == 1) {
    current.push_back(remaining_degree);
    out.push_back(current);
    current.pop_back();
    return;
  }
  for (int e = remaining_degree; e >= 0; --e) {
    current.push_back(e);
    enumerate(remaining_vars - 1, remaining_degree - e, current, out);
    current.pop_back();
  }
}

}  // namespace

std::vector<std::vector<int>> monomial_exponents(int input_dim, int degree) {
  std::vector<std::vector<int>> out;
  std::vector<int> current;
  for (int total = 0; total <= degree; ++total) {
    enumerate(input_dim, total, current, out);
  }
  return out;
}

Eigen::VectorXd expand_basis(const BasisSpec& spec,
                             const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != spec.input_dim) {
    throw DimensionMismatch("basis expects input of length " +
                            std::to_string(spec.input_dim) + ", got " +
                            std::to_string(x.size()));
  }
  if (spec.kind == BasisKind::identity) return x;

  const auto exponents = monomial_exponents(spec.input_dim, spec.degree);
  // Power table: powers(i, e) = x_i^e.
  Eigen::MatrixXd powers(spec.input_dim, spec.degree + 1);
  powers.col(0).setOnes();
  for (int e = 1; e <= spec.degree; ++e) {
    powers.col(e) = powers.col(e - 1).cwiseProduct(x);
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(exponents.size()));
  for (std::size_t k = 0; k < exponents.size(); ++k) {
    double value = 1.0;
    for (int i = 0; i < spec.input_dim; ++i) value *= powers(i, exponents[k][i]);
    out[static_cast<Eigen::Index>(k)] = value;
  }
  return out;
}

Eigen::MatrixXd expand_design(const BasisSpec& spec,
                              const Eigen::Ref<const Eigen::MatrixXd>& X) {
  if (X.cols() != spec.input_dim) {
    throw DimensionMismatch("basis expects design with " +
                            std::to_string(spec.input_dim) + " columns, got " +
                            std::to_string(X.cols()));
  }
  if (spec.kind == BasisKind::identity) return X;
  Eigen::MatrixXd out(X.rows(), spec.output_dim());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    out.row(i) = expand_basis(spec, X.row(i).transpose()).transpose();
  }
  return out;
}

std::string to_string(BasisKind kind) {
  return kind == BasisKind::identity ? "identity" : "polynomial";
}

BasisKind basis_kind_from_string(const std::string& s) {
  if (s == "identity") return BasisKind::identity;
  if (s == "polynomial") return BasisKind::polynomial;
  throw InvalidArgument("unknown basis kind: " + s);
}

}  // namespace qrgmm
