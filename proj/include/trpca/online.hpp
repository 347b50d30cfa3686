#pragma once

#include "trpca/batch.hpp"
#include "trpca/core.hpp"
#include "trpca/timeseries.hpp"
#include "trpca/types.hpp"

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace trpca {

struct OnlineConfig {
    double lambda1 = 1.0;
    double lambda2 = 0.1;
    std::vector<TemporalPenalty> penalties;
    Index rank = 1;
    Index burnin = 1;
    /// Number of most recent samples kept in the surrogate; nullopt keeps all.
    std::optional<Index> window;
    double projection_tol = 1e-8;
    int projection_max_iter = 1000;
    /// Coordinate-descent sweeps per basis update.
    int basis_sweeps = 1;
    /// Solver settings for the burn-in block. Its lambdas, penalties and rank
    /// are overwritten from the fields above.
    BatchConfig burnin_solver;

    void validate(Index m) const;
    /// Capacity of the sample history: max(window, largest lag, 1).
    [[nodiscard]] Index history_capacity() const;
    [[nodiscard]] BatchConfig burnin_batch_config() const;
};

/// One past sample as seen by the accumulators.
struct HistoryEntry {
    Vector q;
    Vector a;
    /// Observed column with unobserved cells filled by the reconstruction.
    Vector d;
    /// q - q_{-T_k} per penalty; empty when the predecessor did not exist.
    std::vector<Vector> deltas;
};

struct OnlineState {
    OnlineConfig config;
    Matrix L;  ///< basis, m x r
    Matrix B;  ///< sum q q^T + temporal cross terms, r x r
    Matrix C;  ///< sum (d - a) q^T, m x r
    std::deque<HistoryEntry> history;
    /// Number of newest history entries currently summed into B and C.
    Index accumulated = 0;
    /// Samples processed by step() since burn-in.
    std::int64_t t = 0;

    [[nodiscard]] Index rows() const { return L.rows(); }
    [[nodiscard]] Index rank() const { return L.cols(); }
};

struct SampleResult {
    Vector q;
    Vector a;
    Vector x;  ///< L q with the basis in force when the sample was projected
    Vector d;
    BoolVector mask;
    int iterations = 0;
    bool converged = true;
};

/**
 * Seeds the online solver from a batch solve of the burn-in block: L from the
 * truncated SVD of the batch estimate (U sqrt(S)), burn-in coefficients from
 * sqrt(S) V^T, and B, C from the burn-in sums including temporal cross terms.
 * With a bounded window only the newest `window` burn-in samples are summed.
 */
[[nodiscard]] OnlineState init_from_burnin(const ObservationMatrix& burnin,
                                           const OnlineConfig& config,
                                           std::vector<SampleResult>* burnin_samples = nullptr);

/// Alternating closed-form minimization over (q, a) for one column.
[[nodiscard]] SampleResult project_sample(const OnlineState& state, const Vector& d,
                                          const BoolVector& mask);

/// Projects one column, updates the accumulators and the basis.
SampleResult step(OnlineState& state, const Vector& d, const BoolVector& mask);

/// Block-coordinate sweeps on 1/2 tr(L (B + l1 I) L^T) - tr(L^T C), in place.
void update_basis(OnlineState& state);
void basis_sweep(Matrix& l, const Matrix& b, const Matrix& c, double lambda1);
[[nodiscard]] double basis_objective(const Matrix& l, const Matrix& b, const Matrix& c,
                                     double lambda1);

/// Stacks the processed samples; X uses the final basis for every column.
[[nodiscard]] Decomposition finalize(const OnlineState& state,
                                     const std::vector<SampleResult>& results);

/// Per-sample objective h(d, L, q, a) restricted to observed rows.
[[nodiscard]] double sample_objective(const OnlineState& state, const Vector& d,
                                      const BoolVector& mask, const Vector& q, const Vector& a);

/// q_{-lag}: the lag-th most recent stored coefficient vector.
[[nodiscard]] const Vector& lagged_coefficients(const OnlineState& state, Index lag);

/// B and C rebuilt from the history entries counted in the accumulators. Needs a
/// bounded window, since only then does the history keep every counted sample.
struct Accumulators {
    Matrix B;
    Matrix C;
};
[[nodiscard]] Accumulators recompute_accumulators(const OnlineState& state);

/**
 * Runs burn-in on the first config.burnin columns and streams the rest. The
 * result covers every column; burn-in columns use their burn-in coefficients.
 */
[[nodiscard]] Decomposition solve_online(const ObservationMatrix& d, const OnlineConfig& config);

/// Self-describing JSON checkpoint; doubles round-trip exactly.
[[nodiscard]] std::string save_checkpoint(const OnlineState& state);
[[nodiscard]] OnlineState load_checkpoint(std::string_view text);
/// Stable hash of the configuration fields that affect results.
[[nodiscard]] std::string config_hash(const OnlineConfig& config);

}  // namespace trpca
