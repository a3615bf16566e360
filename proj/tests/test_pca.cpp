#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "eegdm/pca.hpp"
#include "test_util.hpp"

using namespace eegdm;

namespace {

Mat gaussian_windows(int n, int omega, uint64_t seed, const Vec& stddevs) {
    Rng rng(seed);
    Mat w(n, omega);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < omega; ++j) w(i, j) = stddevs(j) * rng.normal();
    return w;
}

double train_mse(const Mat& windows, const PcaBasis& basis) {
    double total = 0.0;
    for (int i = 0; i < windows.rows(); ++i) {
        Vec w = windows.row(i).transpose();
        Vec coeff = basis.basis * (w - basis.mean);
        Vec back = basis.basis.transpose() * coeff + basis.mean;
        total += (w - back).squaredNorm();
    }
    return total / windows.rows();
}

}  // namespace

TEST_CASE("rank-1 windows give the normalized direction with positive max entry") {
    Vec v(4);
    v << 0.5, -2.0, 1.0, 0.25;
    Rng rng(3);
    Mat windows(50, 4);
    for (int i = 0; i < 50; ++i) windows.row(i) = (rng.normal() * v).transpose();
    PcaBasis basis = pca_fit(windows, 1, false);
    Vec dir = basis.basis.row(0).transpose();
    CHECK(std::abs(dir.norm() - 1.0) < 1e-9);
    // sign convention: largest-magnitude entry positive; for v that is entry 1
    CHECK(dir(1) > 0.0);
    Vec expected = -v / v.norm();
    for (int j = 0; j < 4; ++j) CHECK(dir(j) == doctest::Approx(expected(j)).epsilon(1e-6));
}

TEST_CASE("complete basis round trip is the identity") {
    Mat windows = gaussian_windows(200, 8, 5, Vec::Ones(8));
    PcaBasis basis = pca_fit(windows, 8, true);
    Sample s = test::random_sample(2, 32, 17);
    LatentBlock z = pca_project(s, basis);
    Sample back = pca_reconstruct(z, basis);
    double err = (back.data - s.data).cwiseAbs().maxCoeff();
    CHECK(err < 1e-5);

    // idempotence: project(reconstruct(z)) == z
    LatentBlock z2 = pca_project(back, basis);
    CHECK((z2.data - z.data).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("known diagonal covariance is recovered against an independent eigen oracle") {
    Vec stddevs(3);
    stddevs << 2.0, 1.0, 0.5;  // variances 4, 1, 0.25
    Mat windows = gaussian_windows(20000, 3, 7, stddevs);
    PcaBasis basis = pca_fit(windows, 2, false);
    CHECK(basis.eigenvalues(0) == doctest::Approx(4.0).epsilon(0.08));
    CHECK(basis.eigenvalues(1) == doctest::Approx(1.0).epsilon(0.08));

    // oracle: covariance built directly from the raw windows + eigensolver
    Vec mean = windows.colwise().mean();
    Mat centered = windows.rowwise() - mean.transpose();
    Mat cov = centered.transpose() * centered / double(windows.rows());
    Eigen::SelfAdjointEigenSolver<Mat> solver(cov);
    CHECK(basis.eigenvalues(0) == doctest::Approx(solver.eigenvalues()(2)).epsilon(1e-9));
    CHECK(basis.eigenvalues(1) == doctest::Approx(solver.eigenvalues()(1)).epsilon(1e-9));
}

TEST_CASE("orthonormality and the residual-energy identity") {
    Rng rng(9);
    // correlated windows so the spectrum is nontrivial
    Mat mixing = Mat(16, 16);
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 16; ++j) mixing(i, j) = rng.normal() / std::sqrt(16.0);
    Mat windows = gaussian_windows(5000, 16, 10, Vec::Ones(16)) * mixing;

    PcaBasis basis = pca_fit(windows, 5, true);
    Mat gram = basis.basis * basis.basis.transpose();
    CHECK((gram - Mat::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-6);

    // full decomposition for the discarded tail
    PcaBasis full = pca_fit(windows, 16, false);
    double discarded = 0.0;
    for (int i = 5; i < 16; ++i) discarded += full.eigenvalues(i);
    double mse = train_mse(windows, basis);
    CHECK(mse == doctest::Approx(discarded).epsilon(0.05));
}

TEST_CASE("training reconstruction error is non-increasing in k") {
    Rng rng(21);
    Mat mixing = Mat(12, 12);
    for (int i = 0; i < 12; ++i)
        for (int j = 0; j < 12; ++j) mixing(i, j) = rng.normal() / std::sqrt(12.0);
    Mat windows = gaussian_windows(2000, 12, 22, Vec::Ones(12)) * mixing;
    double prev = std::numeric_limits<double>::max();
    for (int k : {1, 2, 4, 8, 12}) {
        double mse = train_mse(windows, pca_fit(windows, k, false));
        CHECK(mse <= prev + 1e-9);
        prev = mse;
    }
}

TEST_CASE("k < omega reconstruction equals the explicit projector oracle") {
    Mat windows = gaussian_windows(1000, 8, 31, Vec::Ones(8));
    PcaBasis basis = pca_fit(windows, 3, true);
    Sample s = test::random_sample(1, 8, 77);
    Sample back = pca_reconstruct(pca_project(s, basis), basis);

    Mat projector = basis.basis.transpose() * basis.basis;  // omega x omega
    Vec x = s.data.row(0).cast<double>().transpose();
    Vec expected = projector * (x - basis.mean) + basis.mean;
    for (int j = 0; j < 8; ++j)
        CHECK(double(back.data(0, j)) == doctest::Approx(expected(j)).epsilon(1e-5));
}

TEST_CASE("mean window projects to zero and zero latent reconstructs the mean") {
    Mat windows = gaussian_windows(500, 6, 13, Vec::Ones(6));
    windows.rowwise() += Vec::LinSpaced(6, 1.0, 2.0).transpose();
    PcaBasis basis = pca_fit(windows, 4, true);

    MatF mean_row(1, 6);
    for (int j = 0; j < 6; ++j) mean_row(0, j) = float(basis.mean(j));
    LatentBlock z = pca_project(test::make_sample(mean_row), basis);
    CHECK(z.data.cwiseAbs().maxCoeff() < 1e-5);

    LatentBlock zero;
    zero.channels = 1;
    zero.n_windows = 1;
    zero.k = 4;
    zero.data = Mat::Zero(1, 4);
    Sample back = pca_reconstruct(zero, basis);
    for (int j = 0; j < 6; ++j)
        CHECK(double(back.data(0, j)) == doctest::Approx(basis.mean(j)).epsilon(1e-6));
}

TEST_CASE("pca error cases") {
    Mat few = gaussian_windows(3, 8, 1, Vec::Ones(8));
    CHECK_THROWS_WITH_AS(pca_fit(few, 5, false), "fewer windows than components", ConfigError);

    Mat flat = Mat::Zero(100, 8);
    flat.rowwise() += Vec::Ones(8).transpose();
    CHECK_THROWS_WITH_AS(pca_fit(flat, 2, false), "degenerate covariance", NumericError);

    Mat windows = gaussian_windows(100, 8, 2, Vec::Ones(8));
    PcaBasis basis = pca_fit(windows, 2, false);
    Sample bad = test::random_sample(1, 12, 3);  // 8 does not divide 12
    CHECK_THROWS_WITH_AS(pca_project(bad, basis), "window does not tile sample", ConfigError);

    LatentBlock wrong;
    wrong.channels = 1;
    wrong.n_windows = 1;
    wrong.k = 3;
    wrong.data = Mat::Zero(1, 3);
    CHECK_THROWS_AS(pca_reconstruct(wrong, basis), ConfigError);
}

TEST_CASE("latent scaling standardizes training coefficients and stays invertible") {
    Rng rng(41);
    Mat mixing = Mat(8, 8);
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) mixing(i, j) = rng.normal();
    Mat windows = gaussian_windows(4000, 8, 42, Vec::Ones(8)) * mixing;
    PcaBasis scaled = pca_fit(windows, 4, true);

    // scaled coefficient variance should be ~1 in every retained dimension
    Mat coeffs(windows.rows(), 4);
    for (int i = 0; i < windows.rows(); ++i) {
        Vec w = windows.row(i).transpose();
        Vec c = (scaled.basis * (w - scaled.mean)).cwiseQuotient(scaled.coeff_scale);
        coeffs.row(i) = c.transpose();
    }
    for (int j = 0; j < 4; ++j) {
        double var = (coeffs.col(j).array() - coeffs.col(j).mean()).square().mean();
        CHECK(var == doctest::Approx(1.0).epsilon(0.05));
    }

    Sample s = test::random_sample(1, 8, 4);
    PcaBasis unscaled = pca_fit(windows, 4, false);
    Sample a = pca_reconstruct(pca_project(s, scaled), scaled);
    Sample b = pca_reconstruct(pca_project(s, unscaled), unscaled);
    CHECK((a.data - b.data).cwiseAbs().maxCoeff() < 1e-5);
}
