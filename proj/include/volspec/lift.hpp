#pragma once

// Realized-variance lift (F_t, I_t) with I_t = spacing * m_t, m_t a counting
// process on the circle {0..2C} whose intensity is Q(x) / spacing. The lifted
// generator is partial-circulant; its blocks are
//   L_k = L + diag((e^{-i p_k} - 1) Q / spacing),  p_k = 2 pi k / (2C + 1),
// and any kernel of the lift is the inverse DFT over k of the block kernels.

#include <iosfwd>
#include <span>
#include <vector>

#include "volspec/model.hpp"
#include "volspec/spectral.hpp"

namespace volspec {

struct VarianceGrid {
    int c_max = 100;       // C; buckets are 0..2C
    double spacing = 0.0;  // annual-variance units per bucket

    std::size_t buckets() const { return static_cast<std::size_t>(2 * c_max + 1); }
    void validate() const;
};

// Q(x) = sum_y ((F(y) - F(x)) / F(x))^2 L(x, y). Throws NumericalError if
// some Q is below -1e-12.
std::vector<double> instantaneous_variance(const MarkovGenerator& gen,
                                           std::span<const double> levels);

// 0.42^2 f(t) / C.
double alpha_schedule(double t, int c_max, const TimeChange& tc);

struct BlockOptions {
    std::size_t threads = 0;  // 0: VOLSPEC_THREADS or hardware
    // Diagonalize only k = 0..C and obtain the rest by conjugation.
    bool conjugate_pairs = true;
    DiagonalizeOptions diagonalize;
};

class BlockFamily {
public:
    static BlockFamily build(const MarkovGenerator& gen, std::span<const double> q,
                             const VarianceGrid& vgrid, const BlockOptions& opts = {});

    const VarianceGrid& variance_grid() const { return vgrid_; }
    std::size_t dim() const { return dim_; }
    std::size_t buckets() const { return vgrid_.buckets(); }
    bool conjugate_pairs() const { return conjugate_pairs_; }
    std::size_t threads() const { return threads_; }

    double phase(std::size_t k) const;
    // Materialized block L_k (any k in 0..2C).
    CMatrix block(std::size_t k) const;
    // Stored decomposition of block k (k <= C when conjugate pairs are used).
    const SpectralDecomposition& decomposition(std::size_t k) const { return decompositions_[k]; }
    std::size_t stored_blocks() const { return decompositions_.size(); }
    const RMatrix& base() const { return base_; }
    const std::vector<double>& q() const { return q_; }

private:
    RMatrix base_;
    std::vector<double> q_;
    VarianceGrid vgrid_;
    std::size_t dim_ = 0;
    bool conjugate_pairs_ = true;
    std::size_t threads_ = 1;
    std::vector<SpectralDecomposition> decompositions_;
};

struct JointDiagnostics {
    double mass = 0.0;
    double max_imag = 0.0;
    double min_entry = 0.0;  // before clamping
    KernelDiagnostics underlying;  // of the summed-over-variance kernel
};

// Probabilities over (state, bucket) for a fixed start state with the
// variance counter starting at 0.
struct JointDistribution {
    std::size_t states = 0;
    VarianceGrid vgrid;
    std::size_t start_state = 0;
    double t = 0.0;  // calendar
    double T = 0.0;  // calendar
    std::vector<double> probabilities;  // [state * buckets + d]
    JointDiagnostics diagnostics;

    std::size_t buckets() const { return vgrid.buckets(); }
    double at(std::size_t state, std::size_t d) const {
        return probabilities[state * buckets() + d];
    }
    double total_mass() const;
    // Sum over buckets: the underlying kernel row.
    RVector state_marginal() const;
    // Sum over states.
    std::vector<double> bucket_marginal() const;
};

struct JointOptions {
    // Throw LeakageError when 1 - mass exceeds this.
    double mass_tolerance = 1e-4;
    double residue_tolerance = 1e-6;
};

JointDistribution joint_distribution(const BlockFamily& blocks, std::size_t start_state, double t,
                                     double T, const TimeChange& tc,
                                     const JointOptions& opts = {});

// Joint kernels for every start state (for Greeks-style profiles).
std::vector<JointDistribution> joint_distribution_all(const BlockFamily& blocks, double t,
                                                      double T, const TimeChange& tc,
                                                      const JointOptions& opts = {});

// Distribution of the annualized realized variance spacing * d / (T - t).
struct VariancePdf {
    std::vector<double> support;
    std::vector<double> weights;

    double mass() const;
    double mean() const;
    // E[g(Sigma)]
    template <typename Fn>
    double expect(Fn&& g) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < support.size(); ++i) acc += weights[i] * g(support[i]);
        return acc;
    }
};

VariancePdf marginal_variance_pdf(const JointDistribution& jd);

// Mass in the highest `tail_buckets` buckets.
double leakage_probability(const JointDistribution& jd, std::size_t tail_buckets);

struct LeakageGuard {
    std::size_t tail_buckets = 5;
    double warn = 1e-5;
    double error = 1e-4;
};

// Returns true when the warning level is exceeded; throws LeakageError at the
// error level.
bool check_leakage(const JointDistribution& jd, const LeakageGuard& guard = {});

// CSV with columns spot_level, regime, sigma_annualized, probability; rows
// with zero probability are skipped.
void write_joint_csv(std::ostream& os, const JointDistribution& jd,
                     std::span<const double> state_levels, std::size_t spot_states);

}  // namespace volspec
