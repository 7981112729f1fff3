#include "volspec/lift.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>

#include "volspec/parallel.hpp"

namespace volspec {

void VarianceGrid::validate() const {
    if (c_max < 1) throw DomainError("variance grid needs C >= 1");
    if (!(spacing > 0.0)) throw DomainError("variance grid spacing must be positive");
}

std::vector<double> instantaneous_variance(const MarkovGenerator& gen,
                                           std::span<const double> levels) {
    const std::size_t n = gen.dim();
    if (levels.size() != n) throw DomainError("instantaneous_variance: level map size mismatch");
    const RMatrix& l = gen.entries();
    std::vector<double> q(n, 0.0);
    for (std::size_t x = 0; x < n; ++x) {
        if (!(levels[x] > 0.0)) throw DomainError("instantaneous_variance: levels must be positive");
        double acc = 0.0;
        for (std::size_t y = 0; y < n; ++y) {
            if (y == x) continue;
            const double entry = l(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y));
            if (entry == 0.0) continue;
            const double r = (levels[y] - levels[x]) / levels[x];
            acc += r * r * entry;
        }
        if (acc < -1e-12) {
            std::ostringstream msg;
            msg << "negative instantaneous variance " << acc << " at state " << x;
            throw NumericalError(msg.str(), acc);
        }
        q[x] = std::max(acc, 0.0);
    }
    return q;
}

double alpha_schedule(double t, int c_max, const TimeChange& tc) {
    if (t < 0.0) throw DomainError("alpha_schedule: negative time");
    if (c_max < 1) throw DomainError("alpha_schedule: C must be >= 1");
    return 0.42 * 0.42 * tc(t) / static_cast<double>(c_max);
}

double BlockFamily::phase(std::size_t k) const {
    return 2.0 * std::numbers::pi * static_cast<double>(k) /
           static_cast<double>(vgrid_.buckets());
}

CMatrix BlockFamily::block(std::size_t k) const {
    if (k >= buckets()) throw DomainError("block index out of range");
    CMatrix b = base_.cast<Complex>();
    const Complex shift = std::polar(1.0, -phase(k)) - 1.0;
    for (std::size_t s = 0; s < dim_; ++s)
        b(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s)) +=
            shift * (q_[s] / vgrid_.spacing);
    return b;
}

BlockFamily BlockFamily::build(const MarkovGenerator& gen, std::span<const double> q,
                               const VarianceGrid& vgrid, const BlockOptions& opts) {
    vgrid.validate();
    if (q.size() != gen.dim()) throw DomainError("build_blocks: Q size mismatch");
    BlockFamily fam;
    fam.base_ = gen.entries();
    fam.q_.assign(q.begin(), q.end());
    fam.vgrid_ = vgrid;
    fam.dim_ = gen.dim();
    fam.conjugate_pairs_ = opts.conjugate_pairs;
    fam.threads_ = resolve_threads(opts.threads);

    const std::size_t stored =
        opts.conjugate_pairs ? static_cast<std::size_t>(vgrid.c_max) + 1 : vgrid.buckets();
    fam.decompositions_.resize(stored);
    parallel_for(stored, fam.threads_, [&](std::size_t k) {
        try {
            fam.decompositions_[k] = diagonalize(fam.block(k), opts.diagonalize);
        } catch (const DiagonalizationError& e) {
            std::ostringstream msg;
            msg << "block " << k << ": " << e.what();
            throw DiagonalizationError(msg.str(), e.quantity());
        }
    });
    return fam;
}

double JointDistribution::total_mass() const {
    double acc = 0.0;
    for (double p : probabilities) acc += p;
    return acc;
}

RVector JointDistribution::state_marginal() const {
    RVector out = RVector::Zero(static_cast<Eigen::Index>(states));
    const std::size_t nb = buckets();
    for (std::size_t s = 0; s < states; ++s) {
        double acc = 0.0;
        for (std::size_t d = 0; d < nb; ++d) acc += probabilities[s * nb + d];
        out(static_cast<Eigen::Index>(s)) = acc;
    }
    return out;
}

std::vector<double> JointDistribution::bucket_marginal() const {
    const std::size_t nb = buckets();
    std::vector<double> out(nb, 0.0);
    for (std::size_t s = 0; s < states; ++s)
        for (std::size_t d = 0; d < nb; ++d) out[d] += probabilities[s * nb + d];
    return out;
}

namespace {

double horizon(const TimeChange& tc, double t, double T) {
    if (!(T > t) || t < 0.0) throw DomainError("joint distribution requires T > t >= 0");
    return tc(T) - tc(t);
}

std::vector<Complex> exp_spectrum(const SpectralDecomposition& dec, double tau) {
    std::vector<Complex> v(dec.dim());
    for (std::size_t n = 0; n < v.size(); ++n)
        v[n] = std::exp(dec.eigenvalues(static_cast<Eigen::Index>(n)) * tau);
    return v;
}

// Inverse DFT across blocks of the start-state rows of exp(tau L_k).
JointDistribution assemble(const BlockFamily& blocks, const std::vector<CVector>& rows,
                           std::size_t start, double t, double T, const JointOptions& opts) {
    const std::size_t n = blocks.buckets();
    const std::size_t dim = blocks.dim();
    std::vector<Complex> roots(n);
    for (std::size_t m = 0; m < n; ++m)
        roots[m] = std::polar(1.0, 2.0 * std::numbers::pi * static_cast<double>(m) /
                                       static_cast<double>(n));

    JointDistribution jd;
    jd.states = dim;
    jd.vgrid = blocks.variance_grid();
    jd.start_state = start;
    jd.t = t;
    jd.T = T;
    jd.probabilities.assign(dim * n, 0.0);

    const CVector& base = rows.front();
    jd.diagnostics.underlying.max_imag = base.imag().cwiseAbs().maxCoeff();
    const RVector base_real = base.real();
    jd.diagnostics.underlying.min_entry = std::min(0.0, base_real.minCoeff());
    jd.diagnostics.underlying.max_row_sum_error =
        std::abs(base_real.cwiseMax(0.0).sum() - 1.0);

    const double inv_n = 1.0 / static_cast<double>(n);
    double max_imag = 0.0;
    double min_entry = 0.0;
    for (std::size_t s = 0; s < dim; ++s) {
        const auto si = static_cast<Eigen::Index>(s);
        for (std::size_t d = 0; d < n; ++d) {
            double value;
            if (blocks.conjugate_pairs()) {
                double acc = base(si).real();
                for (std::size_t k = 1; k < rows.size(); ++k)
                    acc += 2.0 * (roots[(k * d) % n] * rows[k](si)).real();
                value = acc * inv_n;
            } else {
                Complex acc{};
                for (std::size_t k = 0; k < rows.size(); ++k) acc += roots[(k * d) % n] * rows[k](si);
                acc *= inv_n;
                max_imag = std::max(max_imag, std::abs(acc.imag()));
                value = acc.real();
            }
            min_entry = std::min(min_entry, value);
            jd.probabilities[s * n + d] = std::max(value, 0.0);
        }
    }
    // With conjugate pairing each pair sums to a real number exactly; the
    // residue left is that of the real underlying block.
    jd.diagnostics.max_imag = std::max(max_imag, jd.diagnostics.underlying.max_imag);
    jd.diagnostics.min_entry = min_entry;
    jd.diagnostics.mass = jd.total_mass();

    if (jd.diagnostics.max_imag > opts.residue_tolerance) {
        std::ostringstream msg;
        msg << "joint kernel imaginary residue " << jd.diagnostics.max_imag;
        throw NumericalError(msg.str(), jd.diagnostics.max_imag);
    }
    const double deficit = std::abs(1.0 - jd.diagnostics.mass);
    if (deficit > opts.mass_tolerance) {
        std::ostringstream msg;
        msg << "joint kernel mass " << jd.diagnostics.mass << " deviates from 1 by " << deficit;
        throw LeakageError(msg.str(), jd.diagnostics.mass);
    }
    return jd;
}

}  // namespace

JointDistribution joint_distribution(const BlockFamily& blocks, std::size_t start_state, double t,
                                     double T, const TimeChange& tc, const JointOptions& opts) {
    if (start_state >= blocks.dim()) throw DomainError("joint_distribution: bad start state");
    const double tau = horizon(tc, t, T);
    std::vector<CVector> rows(blocks.stored_blocks());
    parallel_for(rows.size(), blocks.threads(), [&](std::size_t k) {
        const auto& dec = blocks.decomposition(k);
        rows[k] = apply_function_row(dec, start_state, exp_spectrum(dec, tau));
    });
    return assemble(blocks, rows, start_state, t, T, opts);
}

std::vector<JointDistribution> joint_distribution_all(const BlockFamily& blocks, double t,
                                                      double T, const TimeChange& tc,
                                                      const JointOptions& opts) {
    const double tau = horizon(tc, t, T);
    std::vector<CMatrix> kernels(blocks.stored_blocks());
    parallel_for(kernels.size(), blocks.threads(), [&](std::size_t k) {
        const auto& dec = blocks.decomposition(k);
        kernels[k] = apply_function(dec, exp_spectrum(dec, tau));
    });
    std::vector<JointDistribution> out(blocks.dim());
    parallel_for(out.size(), blocks.threads(), [&](std::size_t s) {
        std::vector<CVector> rows(kernels.size());
        for (std::size_t k = 0; k < kernels.size(); ++k)
            rows[k] = kernels[k].row(static_cast<Eigen::Index>(s)).transpose();
        out[s] = assemble(blocks, rows, s, t, T, opts);
    });
    return out;
}

double VariancePdf::mass() const {
    double acc = 0.0;
    for (double w : weights) acc += w;
    return acc;
}

double VariancePdf::mean() const {
    return expect([](double s) { return s; });
}

VariancePdf marginal_variance_pdf(const JointDistribution& jd) {
    VariancePdf pdf;
    const std::size_t n = jd.buckets();
    const double scale = jd.vgrid.spacing / (jd.T - jd.t);
    pdf.support.resize(n);
    for (std::size_t d = 0; d < n; ++d) pdf.support[d] = scale * static_cast<double>(d);
    pdf.weights = jd.bucket_marginal();
    return pdf;
}

double leakage_probability(const JointDistribution& jd, std::size_t tail_buckets) {
    const std::size_t n = jd.buckets();
    if (tail_buckets >= n) throw DomainError("leakage_probability: too many tail buckets");
    const auto marginal = jd.bucket_marginal();
    double acc = 0.0;
    for (std::size_t d = n - tail_buckets; d < n; ++d) acc += marginal[d];
    return acc;
}

bool check_leakage(const JointDistribution& jd, const LeakageGuard& guard) {
    const double leak = leakage_probability(jd, guard.tail_buckets);
    if (leak > guard.error) {
        std::ostringstream msg;
        msg << "variance lattice wrap-around probability " << leak << " exceeds " << guard.error
            << " (increase C or reduce the spacing)";
        throw LeakageError(msg.str(), leak);
    }
    return leak > guard.warn;
}

void write_joint_csv(std::ostream& os, const JointDistribution& jd,
                     std::span<const double> state_levels, std::size_t spot_states) {
    const auto pdf = marginal_variance_pdf(jd);
    os << "spot_level,regime,sigma_annualized,probability\n";
    os << std::setprecision(6);
    const std::size_t n = jd.buckets();
    for (std::size_t s = 0; s < jd.states; ++s) {
        for (std::size_t d = 0; d < n; ++d) {
            const double p = jd.probabilities[s * n + d];
            if (p == 0.0) continue;
            os << state_levels[s] << ',' << s / spot_states << ',' << pdf.support[d] << ',' << p
               << '\n';
        }
    }
}

}  // namespace volspec
