#include "geofuse/pca.hpp"

#include <algorithm>

#include "geofuse/errors.hpp"

namespace geofuse {

PcaResult pca_fit(const Eigen::MatrixXd& rows, int n_components) {
    const Eigen::Index n = rows.rows(), d = rows.cols();
    if (n < 1) throw DataError("pca: no samples");
    if (n_components < 1 || n_components > d) throw DataError("pca: bad component count");

    PcaResult res;
    res.mean = rows.colwise().mean();
    Eigen::MatrixXd centered = rows.rowwise() - res.mean.transpose();
    Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw DataError("pca: eigensolver failed");

    // Eigen returns ascending eigenvalues; take the top from the back.
    res.components.resize(n_components, d);
    res.eigenvalues.resize(n_components);
    for (int k = 0; k < n_components; ++k) {
        Eigen::Index src = d - 1 - k;
        Eigen::VectorXd v = solver.eigenvectors().col(src);
        Eigen::Index imax = 0;
        v.cwiseAbs().maxCoeff(&imax);
        if (v[imax] < 0) v = -v;
        res.components.row(k) = v.transpose();
        res.eigenvalues[k] = solver.eigenvalues()[src];
    }
    return res;
}

ImageF export_feature_pca(const SparseFeatureMap<float>& fmap) {
    const int w = fmap.width, h = fmap.height, c = fmap.channels;
    std::size_t plane = static_cast<std::size_t>(w) * h;

    std::vector<std::size_t> occupied;
    for (std::size_t px = 0; px < plane; ++px)
        if (fmap.occupied[px]) occupied.push_back(px);
    if (occupied.size() < 3)
        throw DataError("export_feature_pca: need at least 3 occupied pixels, have " +
                        std::to_string(occupied.size()));

    Eigen::MatrixXd rows(static_cast<Eigen::Index>(occupied.size()), c);
    for (std::size_t i = 0; i < occupied.size(); ++i)
        for (int ch = 0; ch < c; ++ch)
            rows(static_cast<Eigen::Index>(i), ch) =
                fmap.values.v[static_cast<std::size_t>(ch) * plane + occupied[i]];

    PcaResult pca = pca_fit(rows, 3);
    Eigen::MatrixXd proj =
        (rows.rowwise() - pca.mean.transpose()) * pca.components.transpose();  // [M,3]

    // A projection range that is negligible against the feature magnitude is
    // rounding noise from a flat direction; stretching it to [0,1] would
    // paint pure noise, so those channels render mid-gray instead.
    double flat_below = 1e-9 * (1.0 + pca.mean.cwiseAbs().maxCoeff());

    ImageF out(w, h, 3);  // zero-filled: unoccupied stays black
    for (int ch = 0; ch < 3; ++ch) {
        double lo = proj.col(ch).minCoeff(), hi = proj.col(ch).maxCoeff();
        double range = hi - lo;
        for (std::size_t i = 0; i < occupied.size(); ++i) {
            std::size_t px = occupied[i];
            double v = range > flat_below ? (proj(static_cast<Eigen::Index>(i), ch) - lo) / range
                                          : 0.5;
            out.pixels[px * 3 + static_cast<std::size_t>(ch)] = static_cast<float>(v);
        }
    }
    return out;
}

}  // namespace geofuse
