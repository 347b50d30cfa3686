#pragma once

#include "trpca/types.hpp"

#include <Eigen/SparseCore>

#include <span>
#include <vector>

namespace trpca {

/// One column-difference regularizer: weight * ||X H_lag||_F^2.
struct TemporalPenalty {
    Index lag = 1;
    double weight = 0.0;
};

/// Largest lag among the penalties, 0 when there are none.
[[nodiscard]] Index max_lag(std::span<const TemporalPenalty> penalties);
/// Sum of the penalty weights.
[[nodiscard]] double total_weight(std::span<const TemporalPenalty> penalties);
/// Throws if any penalty has lag < 1, lag >= n, or a negative weight.
void validate_penalties(std::span<const TemporalPenalty> penalties, Index n);

/// Element-wise sgn(z) * max(|z| - alpha, 0), i.e. argmin_B ||Z - B||^2 + 2 alpha ||B||_1.
[[nodiscard]] Matrix soft_threshold(const Matrix& z, double alpha);
[[nodiscard]] Vector soft_threshold(const Vector& z, double alpha);
[[nodiscard]] double soft_threshold(double z, double alpha);

/**
 * Column-difference operator H (n x (n - lag)): column j has -1 at row j and
 * +1 at row j + lag, so (X H)_{:,j} = X_{:,j+lag} - X_{:,j}.
 */
[[nodiscard]] Matrix difference_operator(Index n, Index lag);

/// H H^T for the operator above: the Laplacian of the lag-chain graph.
[[nodiscard]] Matrix penalty_laplacian(Index n, Index lag);

/// sum_k 2 eta_k H_k H_k^T as a sparse banded matrix.
[[nodiscard]] Eigen::SparseMatrix<double> weighted_laplacian(
    Index n, std::span<const TemporalPenalty> penalties);

/// sum_k eta_k ||X H_k||_F^2, evaluated directly from column differences.
[[nodiscard]] double temporal_penalty_value(const Matrix& x,
                                            std::span<const TemporalPenalty> penalties);

/// Entries of m where mask is true, zero elsewhere.
[[nodiscard]] Matrix project_observed(const Matrix& m, const BoolMatrix& mask);

struct AnomalyFilterResult {
    Matrix anomalies;
    Matrix noise;
    Matrix scores;
};

/// Population standard deviation of every row.
[[nodiscard]] Vector row_std(const Matrix& x);

/**
 * Splits a sparse estimate into significant anomalies and noise using the
 * score |A~_ij| / std(X_i:). Scores above alpha are anomalies.
 *
 * Constant rows of X use max(std, 1e-12 * range) as the scale, where range is
 * the global data range of X (or 1 if X is constant).
 */
[[nodiscard]] AnomalyFilterResult filter_anomalies(const Matrix& a_tilde, const Matrix& x,
                                                   double alpha);

}  // namespace trpca
