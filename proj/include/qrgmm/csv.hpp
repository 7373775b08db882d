#pragma once

#include <string>

#include <Eigen/Dense>

#include "qrgmm/dataset.hpp"

namespace qrgmm {

// Dataset files: header "x1,...,xp,y1,...,yd", one row per observation,
// '.' decimal separator, values as shortest round-trippable decimals.
// Covariates are raw — the intercept column is never written; pass the
// loaded dataset through add_intercept when the model wants one.
void write_dataset_csv(const Dataset& data, const std::string& path);
Dataset read_dataset_csv(const std::string& path);

// Sample files: header "y1,...,yd" only.
void write_samples_csv(const Eigen::Ref<const Eigen::MatrixXd>& samples,
                       const std::string& path);
Eigen::MatrixXd read_samples_csv(const std::string& path);

}  // namespace qrgmm
