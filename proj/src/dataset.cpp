#include "qrgmm/dataset.hpp"

#include <string>
#include <utility>

namespace qrgmm {

Eigen::VectorXd Dataset::y() const {
  if (!single_output()) {
    throw DimensionMismatch("dataset has " + std::to_string(response.cols()) +
                            " response columns, expected 1");
  }
  return response.col(0);
}

Dataset validate_dataset(Eigen::MatrixXd design, Eigen::MatrixXd response) {
  if (design.rows() != response.rows()) {
    throw DimensionMismatch("design has " + std::to_string(design.rows()) +
                            " rows but response has " +
                            std::to_string(response.rows()));
  }
  if (design.cols() < 1 || response.cols() < 1) {
    throw DimensionMismatch("design and response need at least one column");
  }
  if (design.rows() < design.cols()) {
    throw DimensionMismatch("need n >= p, got n=" + std::to_string(design.rows()) +
                            ", p=" + std::to_string(design.cols()));
  }
  if (!design.allFinite()) throw NonFinite("design contains NaN or infinity");
  if (!response.allFinite()) throw NonFinite("response contains NaN or infinity");
  // Rank deficiency is deliberately not checked here; the solver owns it.
  return Dataset{std::move(design), std::move(response)};
}

Dataset validate_dataset(Eigen::MatrixXd design, Eigen::VectorXd response) {
  Eigen::MatrixXd r(response.size(), 1);
  r.col(0) = response;
  return validate_dataset(std::move(design), std::move(r));
}

Dataset add_intercept(const Dataset& data) {
  Eigen::MatrixXd design(data.n(), data.p() + 1);
  design.col(0).setOnes();
  design.rightCols(data.p()) = data.design;
  return Dataset{std::move(design), data.response};
}

}  // namespace qrgmm
