#ifndef EEGDM_PCA_HPP
#define EEGDM_PCA_HPP

#include <vector>

#include "eegdm/recording.hpp"

namespace eegdm {

// Orthonormal windowed PCA basis. Rows of `basis` are the top-k unit
// eigenvectors of the centered window covariance; no whitening is folded in,
// so the transpose is the exact inverse on the retained subspace.
struct PcaBasis {
    int window = 0;      // omega
    int components = 0;  // k
    Mat basis;           // k x omega, orthonormal rows
    Vec mean;            // omega
    Vec eigenvalues;     // k, descending, clamped at 0
    Vec coeff_scale;     // k, per-dimension std of the training coefficients
    bool scale_coeffs = true;

    void validate() const;
};

// Latent tensor (C, n_windows, k) stored with one row per (channel, window)
// token in channel-major order.
struct LatentBlock {
    int channels = 0;
    int n_windows = 0;
    int k = 0;
    Mat data;  // (channels * n_windows) x k

    int tokens() const { return channels * n_windows; }
};

// windows: one row per omega-length training window.
PcaBasis pca_fit(const Mat& windows, int components, bool scale_coeffs = true);

// Identity basis used by the no-PCA ablation: k = omega, zero mean; the
// coefficient scaling (when enabled) is still estimated from the windows.
PcaBasis pca_identity(const Mat& windows, int window, bool scale_coeffs);

LatentBlock pca_project(const Sample& sample, const PcaBasis& basis);
Sample pca_reconstruct(const LatentBlock& latent, const PcaBasis& basis);

// All non-overlapping omega-windows of the samples pooled over channels and
// positions, one per row.
Mat collect_windows(const std::vector<Sample>& samples, int window);

}  // namespace eegdm

#endif
