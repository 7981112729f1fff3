#include "volspec/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace volspec {

namespace {

// Parlett-Reinsch balancing with powers of two: returns d such that
// diag(d)^{-1} A diag(d) has comparable row and column norms.
RVector balance_scaling(const CMatrix& a) {
    const Eigen::Index n = a.rows();
    RVector d = RVector::Ones(n);
    CMatrix b = a;
    constexpr double radix = 2.0;
    bool converged = false;
    for (int sweep = 0; sweep < 100 && !converged; ++sweep) {
        converged = true;
        for (Eigen::Index i = 0; i < n; ++i) {
            double c = 0.0;
            double r = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == i) continue;
                c += std::abs(b(j, i));
                r += std::abs(b(i, j));
            }
            if (c == 0.0 || r == 0.0) continue;
            double g = r / radix;
            double f = 1.0;
            const double s = c + r;
            while (c < g) {
                f *= radix;
                c *= radix * radix;
            }
            g = r * radix;
            while (c > g) {
                f /= radix;
                c /= radix * radix;
            }
            if ((c + r) / f < 0.95 * s) {
                converged = false;
                d(i) *= f;
                b.row(i) /= f;
                b.col(i) *= f;
            }
        }
    }
    return d;
}

SpectralDecomposition decompose_once(const CMatrix& a) {
    const RVector d = balance_scaling(a);
    const CMatrix balanced = d.cwiseInverse().asDiagonal() * a * d.asDiagonal();

    Eigen::ComplexEigenSolver<CMatrix> solver(balanced, /*computeEigenvectors=*/true);
    if (solver.info() != Eigen::Success) {
        throw DiagonalizationError("complex Schur iteration did not converge",
                                   std::numeric_limits<double>::infinity());
    }

    SpectralDecomposition dec;
    dec.eigenvalues = solver.eigenvalues();
    dec.right_vectors = d.asDiagonal() * solver.eigenvectors();
    for (Eigen::Index n = 0; n < dec.right_vectors.cols(); ++n) {
        const double norm = dec.right_vectors.col(n).norm();
        if (norm > 0.0) dec.right_vectors.col(n) /= norm;
    }
    Eigen::PartialPivLU<CMatrix> lu(dec.right_vectors);
    dec.inverse_rows = lu.inverse();
    const double cond = inf_norm(dec.right_vectors) * inf_norm(dec.inverse_rows);
    dec.condition = std::isfinite(cond) ? cond : std::numeric_limits<double>::infinity();
    return dec;
}

}  // namespace

SpectralDecomposition diagonalize(const CMatrix& a, const DiagonalizeOptions& opts) {
    if (a.rows() != a.cols()) throw DomainError("diagonalize: matrix is not square");
    if (!a.allFinite()) throw DomainError("diagonalize: matrix has non-finite entries");

    SpectralDecomposition dec = decompose_once(a);
    if (dec.condition <= opts.max_condition) return dec;

    // Eigenvalue collisions are non-generic; one small off-diagonal
    // perturbation separates them.
    std::mt19937_64 rng(opts.perturbation_seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const double scale = opts.perturbation * std::max(inf_norm(a), 1e-300);
    CMatrix perturbed = a;
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            if (i != j) perturbed(i, j) += scale * unit(rng);

    SpectralDecomposition retry = decompose_once(perturbed);
    if (retry.condition > opts.max_condition) {
        std::ostringstream msg;
        msg << "eigenvector matrix is numerically singular (condition estimate "
            << retry.condition << ")";
        throw DiagonalizationError(msg.str(), retry.condition);
    }
    retry.perturbed = true;
    return retry;
}

SpectralDecomposition diagonalize(const RMatrix& a, const DiagonalizeOptions& opts) {
    return diagonalize(CMatrix(a.cast<Complex>()), opts);
}

CMatrix apply_function(const SpectralDecomposition& dec, std::span<const Complex> values) {
    if (values.size() != dec.dim()) throw DomainError("apply_function: dimension mismatch");
    const Eigen::Map<const CVector> v(values.data(), static_cast<Eigen::Index>(values.size()));
    return dec.right_vectors * v.asDiagonal() * dec.inverse_rows;
}

CMatrix apply_function(const SpectralDecomposition& dec,
                       const std::function<Complex(Complex)>& phi) {
    std::vector<Complex> values(dec.dim());
    for (std::size_t n = 0; n < values.size(); ++n)
        values[n] = phi(dec.eigenvalues(static_cast<Eigen::Index>(n)));
    return apply_function(dec, values);
}

CVector apply_function_row(const SpectralDecomposition& dec, std::size_t state,
                           std::span<const Complex> values) {
    if (values.size() != dec.dim() || state >= dec.dim())
        throw DomainError("apply_function_row: dimension mismatch");
    const Eigen::Map<const CVector> v(values.data(), static_cast<Eigen::Index>(values.size()));
    const CVector weighted =
        dec.right_vectors.row(static_cast<Eigen::Index>(state)).transpose().cwiseProduct(v);
    return (weighted.transpose() * dec.inverse_rows).transpose();
}

void KernelDiagnostics::merge(const KernelDiagnostics& other) {
    max_imag = std::max(max_imag, other.max_imag);
    min_entry = std::min(min_entry, other.min_entry);
    max_row_sum_error = std::max(max_row_sum_error, other.max_row_sum_error);
}

namespace {

constexpr double kResidueError = 1e-6;

std::vector<Complex> exp_values(const SpectralDecomposition& dec, double dt) {
    std::vector<Complex> values(dec.dim());
    for (std::size_t n = 0; n < values.size(); ++n)
        values[n] = std::exp(dec.eigenvalues(static_cast<Eigen::Index>(n)) * dt);
    return values;
}

void check_residue(double residue) {
    if (residue > kResidueError) {
        std::ostringstream msg;
        msg << "transition kernel imaginary residue " << residue << " exceeds "
            << kResidueError;
        throw NumericalError(msg.str(), residue);
    }
}

}  // namespace

TransitionKernel transition_kernel(const SpectralDecomposition& dec, double dt_financial) {
    if (dt_financial < 0.0) throw DomainError("transition_kernel: negative time step");
    const auto n = static_cast<Eigen::Index>(dec.dim());
    TransitionKernel out;
    if (dt_financial == 0.0) {
        out.matrix = RMatrix::Identity(n, n);
        return out;
    }
    const CMatrix full = apply_function(dec, exp_values(dec, dt_financial));
    out.diagnostics.max_imag = full.imag().cwiseAbs().maxCoeff();
    check_residue(out.diagnostics.max_imag);
    out.matrix = full.real();
    out.diagnostics.min_entry = std::min(0.0, out.matrix.minCoeff());
    out.matrix = out.matrix.cwiseMax(0.0);
    out.diagnostics.max_row_sum_error =
        (out.matrix.rowwise().sum().array() - 1.0).abs().maxCoeff();
    return out;
}

KernelRow transition_kernel_row(const SpectralDecomposition& dec, std::size_t state,
                                double dt_financial) {
    if (dt_financial < 0.0) throw DomainError("transition_kernel_row: negative time step");
    if (state >= dec.dim()) throw DomainError("transition_kernel_row: state out of range");
    KernelRow out;
    if (dt_financial == 0.0) {
        out.probabilities = RVector::Unit(static_cast<Eigen::Index>(dec.dim()),
                                          static_cast<Eigen::Index>(state));
        return out;
    }
    const CVector row = apply_function_row(dec, state, exp_values(dec, dt_financial));
    out.diagnostics.max_imag = row.imag().cwiseAbs().maxCoeff();
    check_residue(out.diagnostics.max_imag);
    out.probabilities = row.real();
    out.diagnostics.min_entry = std::min(0.0, out.probabilities.minCoeff());
    out.probabilities = out.probabilities.cwiseMax(0.0);
    out.diagnostics.max_row_sum_error = std::abs(out.probabilities.sum() - 1.0);
    return out;
}

namespace {

// e^{-2 pi i m / n}, with the exponent reduced mod n first.
Complex root_of_unity(long long m, std::size_t n) {
    const auto nn = static_cast<long long>(n);
    const long long r = ((m % nn) + nn) % nn;
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(r) / static_cast<double>(n);
    return {std::cos(angle), std::sin(angle)};
}

}  // namespace

CMatrix CirculantRow::materialize() const {
    const auto n = static_cast<Eigen::Index>(first_row.size());
    CMatrix c(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            c(i, j) = first_row[static_cast<std::size_t>(((j - i) % n + n) % n)];
    return c;
}

std::vector<Complex> circulant_spectrum(const CirculantRow& row) {
    const std::size_t n = row.size();
    std::vector<Complex> spectrum(n, Complex{});
    for (std::size_t r = 0; r < n; ++r) {
        Complex acc{};
        for (std::size_t k = 0; k < n; ++k) {
            if (row.first_row[k] == Complex{}) continue;
            acc += row.first_row[k] * root_of_unity(static_cast<long long>(r * k), n);
        }
        spectrum[r] = acc;
    }
    return spectrum;
}

CMatrix circulant_eigenvectors(std::size_t n) {
    const auto nn = static_cast<Eigen::Index>(n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    CMatrix y(nn, nn);
    for (Eigen::Index j = 0; j < nn; ++j)
        for (Eigen::Index r = 0; r < nn; ++r)
            y(j, r) = scale * root_of_unity(static_cast<long long>(r * j), n);
    return y;
}

std::vector<Complex> inverse_dft(std::span<const Complex> spectrum) {
    const std::size_t n = spectrum.size();
    std::vector<Complex> out(n, Complex{});
    for (std::size_t l = 0; l < n; ++l) {
        Complex acc{};
        for (std::size_t r = 0; r < n; ++r)
            acc += spectrum[r] * std::conj(root_of_unity(static_cast<long long>(r * l), n));
        out[l] = acc / static_cast<double>(n);
    }
    return out;
}

std::vector<CMatrix> block_diagonalize(const CMatrix& a, std::span<const CirculantRow> family) {
    const auto m = static_cast<std::size_t>(a.rows());
    if (a.rows() != a.cols()) throw DomainError("block_diagonalize: base matrix not square");
    if (family.size() != m)
        throw DomainError("block_diagonalize: need one circulant per base-matrix row");
    if (m == 0) return {};
    const std::size_t n = family.front().size();
    for (const auto& b : family)
        if (b.size() != n) throw DomainError("block_diagonalize: circulants differ in size");

    std::vector<std::vector<Complex>> spectra;
    spectra.reserve(m);
    for (const auto& b : family) spectra.push_back(circulant_spectrum(b));

    std::vector<CMatrix> blocks(n, a);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < m; ++i)
            blocks[j](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += spectra[i][j];
    return blocks;
}

}  // namespace volspec
