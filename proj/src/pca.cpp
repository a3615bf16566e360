#include "eegdm/pca.hpp"

#include <Eigen/Eigenvalues>

namespace eegdm {

void PcaBasis::validate() const {
    if (window < 1 || components < 1 || components > window) throw ConfigError("invalid PCA geometry");
    if (basis.rows() != components || basis.cols() != window) throw ConfigError("basis shape mismatch");
    if (mean.size() != window || eigenvalues.size() != components || coeff_scale.size() != components)
        throw ConfigError("basis shape mismatch");
    Mat gram = basis * basis.transpose();
    double err = (gram - Mat::Identity(components, components)).cwiseAbs().maxCoeff();
    if (err > 1e-6) throw NumericError("basis rows are not orthonormal");
    for (int i = 1; i < components; ++i)
        if (eigenvalues(i) > eigenvalues(i - 1) + 1e-12) throw NumericError("eigenvalues not descending");
}

PcaBasis pca_fit(const Mat& windows, int components, bool scale_coeffs) {
    const int n = int(windows.rows());
    const int omega = int(windows.cols());
    if (components < 1 || omega < components) throw ConfigError("require 1 <= k <= window");
    if (n < components) throw ConfigError("fewer windows than components");

    Vec mean = windows.colwise().mean();
    Mat centered = windows.rowwise() - mean.transpose();
    Mat cov = centered.transpose() * centered / double(n);
    if (cov.trace() < 1e-12) throw NumericError("degenerate covariance");

    Eigen::SelfAdjointEigenSolver<Mat> solver(cov);
    if (solver.info() != Eigen::Success) throw NumericError("eigen-decomposition failed");

    PcaBasis out;
    out.window = omega;
    out.components = components;
    out.mean = mean;
    out.basis = Mat(components, omega);
    out.eigenvalues = Vec(components);
    out.scale_coeffs = scale_coeffs;

    // solver returns ascending order; take the top-k reversed
    for (int i = 0; i < components; ++i) {
        int src = omega - 1 - i;
        Vec v = solver.eigenvectors().col(src);
        // sign convention: the largest-magnitude entry is positive
        int arg = 0;
        for (int j = 1; j < omega; ++j)
            if (std::abs(v(j)) > std::abs(v(arg))) arg = j;
        if (v(arg) < 0.0) v = -v;
        out.basis.row(i) = v.transpose();
        out.eigenvalues(i) = std::max(0.0, solver.eigenvalues()(src));
    }

    out.coeff_scale = Vec::Ones(components);
    if (scale_coeffs)
        for (int i = 0; i < components; ++i)
            out.coeff_scale(i) = out.eigenvalues(i) > 1e-12 ? std::sqrt(out.eigenvalues(i)) : 1.0;
    return out;
}

PcaBasis pca_identity(const Mat& windows, int window, bool scale_coeffs) {
    PcaBasis out;
    out.window = window;
    out.components = window;
    out.basis = Mat::Identity(window, window);
    out.mean = Vec::Zero(window);
    out.eigenvalues = Vec::Zero(window);
    out.coeff_scale = Vec::Ones(window);
    out.scale_coeffs = scale_coeffs;
    if (windows.rows() > 0) {
        if (windows.cols() != window) throw ConfigError("window width mismatch");
        Vec mean = windows.colwise().mean();
        for (int j = 0; j < window; ++j) {
            double var = (windows.col(j).array() - mean(j)).square().mean();
            out.eigenvalues(j) = var;
            if (scale_coeffs) out.coeff_scale(j) = var > 1e-12 ? std::sqrt(var) : 1.0;
        }
    }
    return out;
}

LatentBlock pca_project(const Sample& sample, const PcaBasis& basis) {
    const int C = sample.channels();
    const int T = sample.length();
    if (T % basis.window != 0) throw ConfigError("window does not tile sample");

    LatentBlock out;
    out.channels = C;
    out.n_windows = T / basis.window;
    out.k = basis.components;
    out.data = Mat(out.tokens(), out.k);

    for (int c = 0; c < C; ++c) {
        for (int w = 0; w < out.n_windows; ++w) {
            Vec win(basis.window);
            for (int j = 0; j < basis.window; ++j) win(j) = sample.data(c, w * basis.window + j);
            Vec coeff = basis.basis * (win - basis.mean);
            if (basis.scale_coeffs) coeff = coeff.cwiseQuotient(basis.coeff_scale);
            out.data.row(c * out.n_windows + w) = coeff.transpose();
        }
    }
    return out;
}

Sample pca_reconstruct(const LatentBlock& latent, const PcaBasis& basis) {
    if (latent.k != basis.components || latent.data.rows() != latent.tokens() ||
        latent.data.cols() != latent.k)
        throw ConfigError("latent shape does not match basis");

    Sample out;
    out.data = MatF(latent.channels, latent.n_windows * basis.window);
    for (int c = 0; c < latent.channels; ++c) {
        for (int w = 0; w < latent.n_windows; ++w) {
            Vec coeff = latent.data.row(c * latent.n_windows + w).transpose();
            if (basis.scale_coeffs) coeff = coeff.cwiseProduct(basis.coeff_scale);
            Vec win = basis.basis.transpose() * coeff + basis.mean;
            for (int j = 0; j < basis.window; ++j)
                out.data(c, w * basis.window + j) = float(win(j));
        }
    }
    return out;
}

Mat collect_windows(const std::vector<Sample>& samples, int window) {
    size_t total = 0;
    for (const auto& s : samples) {
        if (s.length() % window != 0) throw ConfigError("window does not tile sample");
        total += size_t(s.channels()) * (s.length() / window);
    }
    Mat out(total, window);
    size_t row = 0;
    for (const auto& s : samples) {
        const int nw = s.length() / window;
        for (int c = 0; c < s.channels(); ++c)
            for (int w = 0; w < nw; ++w, ++row)
                for (int j = 0; j < window; ++j) out(row, j) = s.data(c, w * window + j);
    }
    return out;
}

}  // namespace eegdm
