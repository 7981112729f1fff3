#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace volspec {

using Complex = std::complex<double>;
using RMatrix = Eigen::MatrixXd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using CVector = Eigen::VectorXcd;

// Trading days per year used for annualization and daily sampling.
inline constexpr int kTradingDaysPerYear = 252;

// Base of all errors raised by the library. The CLI maps the category to
// an exit code (config -> 2, everything numerical -> 3).
class Error : public std::runtime_error {
public:
    enum class Category { Config, Domain, Numerical };

    Error(Category category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    Category category() const noexcept { return category_; }

private:
    Category category_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(Category::Config, what) {}
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error(Category::Domain, what) {}
};

// Numerical guard trips: ill-conditioning, imaginary residue, leakage, ...
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, double quantity)
        : Error(Category::Numerical, what), quantity_(quantity) {}

    // The offending value (condition estimate, residue, mass deficit, ...).
    double quantity() const noexcept { return quantity_; }

private:
    double quantity_;
};

class DiagonalizationError : public NumericalError {
public:
    DiagonalizationError(const std::string& what, double condition)
        : NumericalError(what, condition) {}
};

class LeakageError : public NumericalError {
public:
    LeakageError(const std::string& what, double mass)
        : NumericalError(what, mass) {}
};

// Infinity norm (max absolute row sum).
template <typename Derived>
double inf_norm(const Eigen::MatrixBase<Derived>& m) {
    if (m.size() == 0) return 0.0;
    return m.cwiseAbs().rowwise().sum().maxCoeff();
}

// 100 * sqrt(v): the "volatility terms" quotation of a variance value.
inline double vol_terms(double variance) {
    return 100.0 * std::sqrt(variance < 0.0 ? 0.0 : variance);
}

}  // namespace volspec
