#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace gridtwin {

// Rank-k factor model X = L F + R fitted by SVD. Rows of X are scaled to
// comparable size (robust to dead rows) before extracting the principal
// right singular vectors; loadings are then the projections of the original
// rows, so X reconstructs exactly and the residue rows are orthogonal to
// every factor.
struct FactorDecomposition {
    Eigen::MatrixXd factors;   // k x T, orthonormal rows
    Eigen::MatrixXd loadings;  // N x k
    Eigen::MatrixXd residues;  // N x T
    int num_factors = 0;
};

FactorDecomposition factor_decompose(const Eigen::MatrixXd& x, int num_factors);

struct SpectrumOptions {
    // z-score each row before forming the covariance; degenerate rows throw.
    bool standardize_rows = true;
    // Rescale the Marchenko-Pastur bulk so its median matches the empirical
    // median eigenvalue. Off, the bulk is the unit-variance law.
    bool fit_variance = false;
    // Half-width of the spike cutoff above the bulk edge, in units of the
    // Tracy-Widom finite-size scale T^(-2/3) (1+sqrt(y)) (1+1/sqrt(y))^(1/3).
    double spike_allowance = 3.0;
    // When positive, use this bulk variance instead of fitting one. Lets two
    // spectra be measured against the same null model.
    double sigma2_override = 0.0;
};

struct SpectrumReport {
    Eigen::VectorXd eigenvalues;  // ascending, of (1/T) R R^T after preprocessing
    double aspect_ratio = 0.0;    // y = N / T
    double sigma2 = 1.0;          // bulk variance used for the reference law
    double lambda_minus = 0.0;    // bulk edges, already scaled by sigma2
    double lambda_plus = 0.0;
    double spike_threshold = 0.0;
    std::vector<double> spikes;  // eigenvalues above the threshold, descending
    double ks_distance = 0.0;    // empirical spectrum vs the reference law
};

SpectrumReport spectrum_report(const Eigen::MatrixXd& r, const SpectrumOptions& opts = {});

// CDF of the Marchenko-Pastur law with unit variance and aspect ratio y,
// including the point mass at zero when y > 1.
double mp_cdf(double lambda, double aspect_ratio);

// Divides each column, then each row, by its robust scale (1.4826 MAD).
// Brings separable row-by-column noise to unit size without letting a few
// large entries distort the normalization.
Eigen::MatrixXd robust_scale_normalize(const Eigen::MatrixXd& m);

// Number of eigenvalues above the spike threshold of the default
// (row-standardized) spectrum; a starting point for num_factors.
int suggest_num_factors(const Eigen::MatrixXd& x);

struct BiasSpectraComparison {
    SpectrumReport a;
    SpectrumReport b;
    int num_factors = 0;
};

// Bias-matrix preprocessing used for comparisons: optional factor removal,
// robust scale normalization, then a scale-preserving spectrum with a
// fitted bulk.
SpectrumReport bias_spectrum(const Eigen::MatrixXd& bias, int num_factors);

// Spectral comparison of two bias matrices on an equal footing: factor
// removal with a common count, robust scales pooled across the pair, and one
// shared bulk variance matched to the quieter spectrum's edge. Per-matrix
// normalization would let a strong corruption inflate its own null and hide
// from the spike count; against the shared envelope, structural corruption
// shows up as extra spikes on its side, and a clean pair reports none.
BiasSpectraComparison compare_bias_spectra(const Eigen::MatrixXd& bias_a,
                                           const Eigen::MatrixXd& bias_b, int num_factors);

std::string spectrum_to_json(const SpectrumReport& report);

}  // namespace gridtwin
