#pragma once

#include <Eigen/Dense>

#include "geofuse/fusion.hpp"
#include "geofuse/image.hpp"

namespace geofuse {

struct PcaResult {
    Eigen::VectorXd mean;
    Eigen::MatrixXd components;   // one component per row, descending eigenvalue
    Eigen::VectorXd eigenvalues;  // matching order
};

/// Principal components of the row vectors in `rows` (one sample per row).
/// Component signs are fixed so the largest-magnitude entry is positive.
PcaResult pca_fit(const Eigen::MatrixXd& rows, int n_components);

/// Top-3 PCA projection of the occupied pixels' feature vectors, each output
/// channel min-max normalized to [0,1]. Channels whose projection range is
/// negligible against the feature magnitude render as 0.5; unoccupied pixels
/// are black. Needs >= 3 occupied pixels.
ImageF export_feature_pca(const SparseFeatureMap<float>& fmap);

}  // namespace geofuse
