#pragma once

// Eigendecomposition-based functional calculus for Markov generators, plus
// circulant spectra and the block-diagonalization of partial-circulant
// operators.
//
// All functions are pure; decompositions are immutable values that can be
// shared read-only across threads.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "volspec/common.hpp"

namespace volspec {

// A = U diag(eigenvalues) U^{-1}.
struct SpectralDecomposition {
    CVector eigenvalues;
    CMatrix right_vectors;  // columns u_n
    CMatrix inverse_rows;   // U^{-1}, rows v_n
    double condition = 1.0; // ||U||_inf * ||U^{-1}||_inf
    bool perturbed = false; // true if the single perturbation retry was used

    std::size_t dim() const { return static_cast<std::size_t>(eigenvalues.size()); }
};

struct DiagonalizeOptions {
    double max_condition = 1e12;
    // Relative magnitude of the off-diagonal perturbation used on retry.
    double perturbation = 1e-12;
    std::uint64_t perturbation_seed = 0x5eed;
};

// Throws DiagonalizationError when the eigenvector matrix stays numerically
// singular after one perturbed retry.
SpectralDecomposition diagonalize(const CMatrix& a, const DiagonalizeOptions& opts = {});
SpectralDecomposition diagonalize(const RMatrix& a, const DiagonalizeOptions& opts = {});

// U diag(values) U^{-1}.
CMatrix apply_function(const SpectralDecomposition& dec, std::span<const Complex> values);
CMatrix apply_function(const SpectralDecomposition& dec,
                       const std::function<Complex(Complex)>& phi);

// Row `state` of U diag(values) U^{-1}, O(n^2).
CVector apply_function_row(const SpectralDecomposition& dec, std::size_t state,
                           std::span<const Complex> values);

struct KernelDiagnostics {
    double max_imag = 0.0;           // largest |Im| before truncation
    double min_entry = 0.0;          // most negative real entry before clamping
    double max_row_sum_error = 0.0;  // max |row sum - 1|

    void merge(const KernelDiagnostics& other);
};

struct TransitionKernel {
    RMatrix matrix;
    KernelDiagnostics diagnostics;
};

struct KernelRow {
    RVector probabilities;
    KernelDiagnostics diagnostics;
};

// exp(dt * A) for a generator A. Throws NumericalError when the imaginary
// residue exceeds 1e-6; entries in (-1e-10, 0) are clamped to zero.
TransitionKernel transition_kernel(const SpectralDecomposition& dec, double dt_financial);
KernelRow transition_kernel_row(const SpectralDecomposition& dec, std::size_t state,
                                double dt_financial);

// Circulant matrix C_{ij} = c_{(j - i) mod n}, i.e. row 0 is (c_0, ..., c_{n-1})
// and each row is the cyclic shift of the row above. Its eigenpairs are
// y^{(r)}_j = e^{-2 pi i r j / n} / sqrt(n) with eigenvalue sum_k c_k e^{-2 pi i r k / n}.
struct CirculantRow {
    std::vector<Complex> first_row;

    std::size_t size() const { return first_row.size(); }
    CMatrix materialize() const;
};

std::vector<Complex> circulant_spectrum(const CirculantRow& row);
// Unitary matrix whose r-th column is y^{(r)}.
CMatrix circulant_eigenvectors(std::size_t n);
// (1/n) sum_r lambda_r e^{2 pi i r l / n}.
std::vector<Complex> inverse_dft(std::span<const Complex> spectrum);

// Blocks D_j = A + Theta^{(j)}, j = 0..n-1, of the partial-circulant operator
// built from A (m x m) and circulants B^{(0..m-1)} of common size n, where
// Theta^{(j)} = diag(lambda_j(B^{(0)}), ..., lambda_j(B^{(m-1)})).
std::vector<CMatrix> block_diagonalize(const CMatrix& a, std::span<const CirculantRow> family);

}  // namespace volspec
