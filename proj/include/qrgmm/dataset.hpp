#pragma once

#include <Eigen/Dense>

#include "qrgmm/errors.hpp"

namespace qrgmm {

// Offline record of n simulation runs: one design row of covariates per run
// and one response row (d = 1 column for scalar output, d columns for
// multi-output). Immutable after validation.
struct Dataset {
  Eigen::MatrixXd design;    // n x p
  Eigen::MatrixXd response;  // n x d

  Eigen::Index n() const { return design.rows(); }
  Eigen::Index p() const { return design.cols(); }
  Eigen::Index outputs() const { return response.cols(); }
  bool single_output() const { return response.cols() == 1; }

  Eigen::VectorXd y() const;  // single-output response as a vector
};

Dataset validate_dataset(Eigen::MatrixXd design, Eigen::MatrixXd response);
Dataset validate_dataset(Eigen::MatrixXd design, Eigen::VectorXd response);

// Same rows with a column of ones prepended to the design.
Dataset add_intercept(const Dataset& data);

}  // namespace qrgmm
