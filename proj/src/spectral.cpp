#include "gridtwin/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "gridtwin/errors.hpp"
#include "json.hpp"

namespace gridtwin {

namespace {

double median_of(std::vector<double> values) {
    const std::size_t n = values.size();
    if (n == 0) return 0.0;
    auto mid = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(values.begin(), mid, values.end());
    if (n % 2 == 1) return *mid;
    const double hi = *mid;
    const double lo = *std::max_element(values.begin(), mid);
    return 0.5 * (lo + hi);
}

double robust_scale(std::vector<double> values, double floor_value) {
    const double med = median_of(values);
    for (double& v : values) v = std::abs(v - med);
    const double mad = median_of(std::move(values));
    return std::max(1.4826 * mad, floor_value);
}

// Median of the unit-variance law by bisection on the bulk support.
double mp_median(double aspect_ratio) {
    const double sy = std::sqrt(aspect_ratio);
    double lo = (1.0 - sy) * (1.0 - sy);
    double hi = (1.0 + sy) * (1.0 + sy);
    if (mp_cdf(lo, aspect_ratio) >= 0.5)
        throw ConfigError("cannot fit a bulk variance at aspect ratio " +
                          std::to_string(aspect_ratio));
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (mp_cdf(mid, aspect_ratio) < 0.5 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

double mp_cdf(double lambda, double aspect_ratio) {
    if (aspect_ratio <= 0.0) throw ConfigError("aspect ratio must be positive");
    const double y = aspect_ratio;
    const double sy = std::sqrt(y);
    const double lo = (1.0 - sy) * (1.0 - sy);
    const double hi = (1.0 + sy) * (1.0 + sy);
    const double base = y > 1.0 ? 1.0 - 1.0 / y : 0.0;  // point mass at zero

    if (lambda < 0.0) return 0.0;
    if (lambda <= lo) return base;
    if (lambda >= hi) return 1.0;

    // t = lo + (hi - lo) sin^2 u removes both edge singularities, leaving a
    // smooth integrand for Simpson's rule.
    const double span = hi - lo;
    const double u_max = std::asin(std::sqrt((lambda - lo) / span));
    auto integrand = [&](double u) {
        const double s = std::sin(u);
        const double c = std::cos(u);
        const double t = lo + span * s * s;
        // t vanishes only when lo == 0 (square aspect) and u == 0; the
        // integrand limit there is span / (pi y).
        if (t == 0.0) return span / (std::numbers::pi * y);
        return span * span * s * s * c * c / (std::numbers::pi * y * t);
    };
    const int panels = 512;
    const double h = u_max / panels;
    double acc = integrand(0.0) + integrand(u_max);
    for (int i = 1; i < panels; ++i) acc += integrand(h * i) * (i % 2 == 1 ? 4.0 : 2.0);
    const double integral = acc * h / 3.0;
    return std::min(1.0, base + integral);
}

FactorDecomposition factor_decompose(const Eigen::MatrixXd& x, int num_factors) {
    const Eigen::Index n = x.rows();
    const Eigen::Index t = x.cols();
    const auto max_rank = static_cast<int>(std::min(n, t));
    if (num_factors < 0 || num_factors >= max_rank)
        throw DimensionError("num_factors " + std::to_string(num_factors) +
                             " outside [0, " + std::to_string(max_rank) + ")");

    FactorDecomposition out;
    out.num_factors = num_factors;
    if (num_factors == 0) {
        out.factors.resize(0, t);
        out.loadings.resize(n, 0);
        out.residues = x;
        return out;
    }

    Eigen::MatrixXd scaled = x;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mean = x.row(i).mean();
        const double sd = std::sqrt((x.row(i).array() - mean).square().mean());
        if (sd > 0.0) scaled.row(i) /= sd;
    }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(scaled, Eigen::ComputeThinV);
    out.factors = svd.matrixV().leftCols(num_factors).transpose();
    out.loadings = x * out.factors.transpose();
    out.residues = x - out.loadings * out.factors;
    return out;
}

SpectrumReport spectrum_report(const Eigen::MatrixXd& r, const SpectrumOptions& opts) {
    const Eigen::Index n = r.rows();
    const Eigen::Index t = r.cols();
    if (n < 1 || t < 2) throw DimensionError("spectrum needs at least 1 row and 2 columns");

    Eigen::MatrixXd work = r;
    if (opts.standardize_rows) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const double mean = work.row(i).mean();
            const double sd = std::sqrt((work.row(i).array() - mean).square().mean());
            if (sd == 0.0)
                throw ValidationError("row " + std::to_string(i) +
                                      " has zero variance, cannot standardize");
            work.row(i) = (work.row(i).array() - mean) / sd;
        }
    }

    const Eigen::MatrixXd cov = work * work.transpose() / static_cast<double>(t);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw Error("eigenvalue decomposition failed");

    SpectrumReport report;
    report.eigenvalues = eig.eigenvalues().cwiseMax(0.0);
    report.aspect_ratio = static_cast<double>(n) / static_cast<double>(t);

    const double sy = std::sqrt(report.aspect_ratio);
    const double unit_lo = (1.0 - sy) * (1.0 - sy);
    const double unit_hi = (1.0 + sy) * (1.0 + sy);

    report.sigma2 = 1.0;
    if (opts.sigma2_override > 0.0) {
        report.sigma2 = opts.sigma2_override;
    } else if (opts.fit_variance) {
        std::vector<double> eigs(report.eigenvalues.data(),
                                 report.eigenvalues.data() + report.eigenvalues.size());
        const double med = median_of(std::move(eigs));
        report.sigma2 = med > 0.0 ? med / mp_median(report.aspect_ratio) : 1.0;
    }
    report.lambda_minus = report.sigma2 * unit_lo;
    report.lambda_plus = report.sigma2 * unit_hi;

    const double tw_scale = std::pow(static_cast<double>(t), -2.0 / 3.0) * (1.0 + sy) *
                            std::cbrt(1.0 + 1.0 / sy);
    report.spike_threshold = report.lambda_plus + opts.spike_allowance * report.sigma2 * tw_scale;

    for (Eigen::Index i = report.eigenvalues.size() - 1; i >= 0; --i) {
        if (report.eigenvalues[i] > report.spike_threshold)
            report.spikes.push_back(report.eigenvalues[i]);
        else
            break;
    }

    double ks = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double fhat_lo = static_cast<double>(i) / static_cast<double>(n);
        const double fhat_hi = static_cast<double>(i + 1) / static_cast<double>(n);
        const double f = mp_cdf(report.eigenvalues[i] / report.sigma2, report.aspect_ratio);
        ks = std::max({ks, std::abs(f - fhat_lo), std::abs(f - fhat_hi)});
    }
    report.ks_distance = ks;
    return report;
}

Eigen::MatrixXd robust_scale_normalize(const Eigen::MatrixXd& m) {
    if (m.size() == 0) return m;
    const double floor_value = 1e-12 * (m.cwiseAbs().maxCoeff() + 1e-300);
    Eigen::MatrixXd out = m;
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
        std::vector<double> col(out.col(j).data(), out.col(j).data() + out.rows());
        out.col(j) /= robust_scale(std::move(col), floor_value);
    }
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        std::vector<double> row(static_cast<std::size_t>(out.cols()));
        for (Eigen::Index j = 0; j < out.cols(); ++j) row[static_cast<std::size_t>(j)] = out(i, j);
        out.row(i) /= robust_scale(std::move(row), floor_value);
    }
    return out;
}

int suggest_num_factors(const Eigen::MatrixXd& x) {
    return static_cast<int>(spectrum_report(x).spikes.size());
}

SpectrumReport bias_spectrum(const Eigen::MatrixXd& bias, int num_factors) {
    SpectrumOptions opts;
    opts.standardize_rows = false;
    opts.fit_variance = true;
    const Eigen::MatrixXd resid =
        num_factors > 0 ? factor_decompose(bias, num_factors).residues : bias;
    return spectrum_report(robust_scale_normalize(resid), opts);
}

BiasSpectraComparison compare_bias_spectra(const Eigen::MatrixXd& bias_a,
                                           const Eigen::MatrixXd& bias_b, int num_factors) {
    if (bias_a.rows() != bias_b.rows() || bias_a.cols() != bias_b.cols())
        throw DimensionError("bias matrices have different shapes");
    Eigen::MatrixXd ra = num_factors > 0 ? factor_decompose(bias_a, num_factors).residues : bias_a;
    Eigen::MatrixXd rb = num_factors > 0 ? factor_decompose(bias_b, num_factors).residues : bias_b;

    // One set of robust scales for the pair, so off-corruption entries keep
    // identical normalized values on both sides.
    const double floor_value =
        1e-12 * (std::max(ra.cwiseAbs().maxCoeff(), rb.cwiseAbs().maxCoeff()) + 1e-300);
    auto pooled_scale = [&](const auto& va, const auto& vb) {
        std::vector<double> pool(va.data(), va.data() + va.size());
        pool.insert(pool.end(), vb.data(), vb.data() + vb.size());
        return robust_scale(std::move(pool), floor_value);
    };
    for (Eigen::Index j = 0; j < ra.cols(); ++j) {
        const double s = pooled_scale(Eigen::VectorXd(ra.col(j)), Eigen::VectorXd(rb.col(j)));
        ra.col(j) /= s;
        rb.col(j) /= s;
    }
    for (Eigen::Index i = 0; i < ra.rows(); ++i) {
        const double s = pooled_scale(Eigen::VectorXd(ra.row(i)), Eigen::VectorXd(rb.row(i)));
        ra.row(i) /= s;
        rb.row(i) /= s;
    }

    SpectrumOptions opts;
    opts.standardize_rows = false;
    BiasSpectraComparison cmp;
    cmp.num_factors = num_factors;
    cmp.a = spectrum_report(ra, opts);
    cmp.b = spectrum_report(rb, opts);

    // One bulk variance for both reports, scaled so the quieter spectrum just
    // fits under the bulk edge. These error spectra carry correlated tails
    // that no entrywise normalization flattens to the i.i.d. law, so a
    // median-matched edge would land inside a dense tail and count bulk
    // eigenvalues on both sides; against the envelope of the quieter side,
    // only genuine excess structure registers.
    const double quiet_top =
        std::min(cmp.a.eigenvalues[cmp.a.eigenvalues.size() - 1],
                 cmp.b.eigenvalues[cmp.b.eigenvalues.size() - 1]);
    const double sy = std::sqrt(cmp.a.aspect_ratio);
    const double unit_hi = (1.0 + sy) * (1.0 + sy);
    opts.sigma2_override = quiet_top > 0.0 ? quiet_top / unit_hi : 1.0;
    cmp.a = spectrum_report(ra, opts);
    cmp.b = spectrum_report(rb, opts);
    return cmp;
}

std::string spectrum_to_json(const SpectrumReport& report) {
    nlohmann::json doc;
    doc["aspect_ratio"] = report.aspect_ratio;
    doc["sigma2"] = report.sigma2;
    doc["lambda_minus"] = report.lambda_minus;
    doc["lambda_plus"] = report.lambda_plus;
    doc["spike_threshold"] = report.spike_threshold;
    doc["ks_distance"] = report.ks_distance;
    doc["num_spikes"] = report.spikes.size();
    doc["spikes"] = report.spikes;
    std::vector<double> eigs(report.eigenvalues.data(),
                             report.eigenvalues.data() + report.eigenvalues.size());
    doc["eigenvalues"] = eigs;
    return doc.dump(1) + "\n";
}

}  // namespace gridtwin
