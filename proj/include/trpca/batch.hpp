#pragma once

#include "trpca/core.hpp"
#include "trpca/timeseries.hpp"
#include "trpca/types.hpp"

#include <cstdint>
#include <vector>

namespace trpca {

/// How the factors L and Q are seeded before the first ADMM iteration.
enum class FactorInit {
    /// All-ones L and Q, as in the reference algorithm. The columns start out
    /// identical and only separate through rounding in the r x r solves.
    ones,
    /// Top-r singular pairs of the zero-filled data, split as U sqrt(S), V sqrt(S).
    spectral,
};

struct BatchConfig {
    double lambda1 = 1.0;
    double lambda2 = 0.1;
    std::vector<TemporalPenalty> penalties;
    /// Rank bound r. Zero means "estimate from the data" at rank_energy.
    Index rank = 0;
    double rank_energy = 0.95;
    double mu0 = 1e-6;
    double mu_max = 1e10;
    double rho = 1.1;
    double tol = 1e-8;
    std::int64_t max_iter = 1000000;
    FactorInit init = FactorInit::ones;
    bool record_trace = false;

    void validate(Index m, Index n) const;
};

struct IterationRecord {
    std::int64_t iteration = 0;
    double residual = 0.0;
    double mu = 0.0;
};

struct Decomposition {
    Matrix X;  ///< low-rank estimate
    Matrix A;  ///< sparse estimate, zero off the observed set
    Matrix E;  ///< P_Omega(D - X - A)
    Index rank_bound = 0;
    std::int64_t iterations = 0;
    double final_residual = 0.0;
    bool converged = false;
    /// max |X - L Q^T| of the internal iterates at exit (temporal solver only).
    double constraint_gap = 0.0;
    std::vector<IterationRecord> trace;
};

/**
 * Temporal robust PCA by ADMM on the factorized augmented Lagrangian:
 *
 *   1/2 ||P_O(D - X - A)||^2 + l1/2 (||L||^2 + ||Q||^2) + l2 ||A||_1
 *     + sum_k eta_k ||X H_k||^2,   X = L Q^T.
 *
 * Unobserved cells of D are re-imputed from the current X + A every
 * iteration. The returned X is L Q^T, so its rank never exceeds config.rank.
 */
[[nodiscard]] Decomposition solve_temporal_batch(const ObservationMatrix& d,
                                                 const BatchConfig& config);

struct PcpConfig {
    double lambda2 = 0.0;  ///< 0 selects 1 / sqrt(max(m, n))
    double tol = 1e-7;
    std::int64_t max_iter = 1000;
};

/// Principal component pursuit (nuclear norm + l1, equality on the observed
/// set) by the inexact augmented Lagrange multiplier method.
[[nodiscard]] Decomposition solve_pcp(const ObservationMatrix& d, const PcpConfig& config);

/// Smallest r whose leading singular values hold energy_fraction of the
/// nuclear norm of the zero-filled data.
[[nodiscard]] Index estimate_rank(const ObservationMatrix& d, double energy_fraction);

/// 1/2 ||P_O(D - X - A)||^2 + l1 ||X||_* + l2 ||A||_1 + sum_k eta_k ||X H_k||^2.
[[nodiscard]] double temporal_objective(const ObservationMatrix& d, const Matrix& x,
                                        const Matrix& a, double lambda1, double lambda2,
                                        std::span<const TemporalPenalty> penalties);

}  // namespace trpca
