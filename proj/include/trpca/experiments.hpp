#pragma once

#include "trpca/batch.hpp"
#include "trpca/hyperopt.hpp"
#include "trpca/solver.hpp"
#include "trpca/timeseries.hpp"
#include "trpca/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace trpca {

struct SineMixtureSpec {
    Index n_points = 10000;
    double n_cycles = 10.0;
    std::vector<double> frequencies{1.0, 3.0, 0.5};
    std::vector<double> amplitudes{1.0, 1.0, 2.0};
    Index fold_rows = 100;

    void validate() const;
};

struct SineMixture {
    SignalSeries signal;
    ObservationMatrix matrix;
};

/// y_i = sum_j a_j sin(f_j x_i) with x_i = 2 pi N' i / N, folded at fold_rows.
[[nodiscard]] SineMixture generate_sine_mixture(const SineMixtureSpec& spec);

struct CorruptionSpec {
    double missing_fraction = 0.0;
    double anomaly_fraction = 0.0;
    /// Anomaly magnitudes are uniform in [0, anomaly_scale * max|clean|].
    double anomaly_scale = 2.0;
    /// Gaussian noise level; nullopt means 0.1 * std(clean).
    std::optional<double> noise_sigma;
    std::uint64_t seed = 0;

    void validate() const;
};

struct CorruptedData {
    ObservationMatrix observed;
    BoolMatrix truth;  ///< anomaly positions
    Matrix clean;
};

[[nodiscard]] CorruptedData corrupt(const ObservationMatrix& clean, const CorruptionSpec& spec);

struct EvalReport {
    double relative_error = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    Index true_positives = 0;
    Index false_positives = 0;
    Index false_negatives = 0;
    Index true_negatives = 0;
};

/// Precision/recall/F1 of a predicted anomaly set against the truth. An empty
/// prediction against an empty truth scores 1 on every metric.
[[nodiscard]] EvalReport detection_report(const BoolMatrix& predicted, const BoolMatrix& truth);

/**
 * Relative squared reconstruction error ||X* - X||_F^2 / ||X*||_F^2 over the
 * cells observed in the clean reference, plus detection scores of the
 * anomaly filter at level alpha applied to dec.A.
 */
[[nodiscard]] EvalReport evaluate(const Decomposition& dec, const ObservationMatrix& clean,
                                  const BoolMatrix& truth, double alpha);

struct SweepSpec {
    SineMixtureSpec data;
    /// Fractions are overwritten per level: half missing, half anomalies.
    CorruptionSpec corruption;
    double alpha = 2.0;
    /// When set, every solver is re-tuned per level by cross-validation on an
    /// extra corrupted draw that is not among the evaluated repeats.
    std::optional<HyperSearchSpec> tuning;
};

struct TunedSetting {
    double level = 0.0;
    std::string solver;
    std::vector<ParameterBound> bounds;
    std::vector<double> parameters;
    double objective = 0.0;
    bool failed = false;
    std::string error;
};

struct SweepRow {
    double level = 0.0;
    std::string solver;
    int repeat = 0;
    EvalReport report;
    bool failed = false;
    std::string error;
};

struct MetricSummary {
    double mean = 0.0;
    double std = 0.0;
};

struct SweepAggregate {
    double level = 0.0;
    std::string solver;
    int count = 0;
    MetricSummary relative_error;
    MetricSummary precision;
    MetricSummary recall;
    MetricSummary f1;
};

struct SweepTable {
    std::vector<SweepRow> rows;
    std::vector<SweepAggregate> aggregates;
    std::vector<TunedSetting> tuned;
};

/**
 * Batch and online solvers with one shared parameter set for the sine
 * benchmark: lambda1 = 1, lambda2 = 0.5, eta = 1 at lag 20, rank 6 and an
 * online burn-in of 40 columns.
 */
[[nodiscard]] std::vector<SolverSpec> default_sweep_solvers();

/// Corruption level p splits as p/2 missing and p/2 anomalous cells.
[[nodiscard]] CorruptionSpec corruption_for_level(const CorruptionSpec& base, double level);

/**
 * For every level, repeat and solver: generate, corrupt, solve and evaluate.
 * All solvers see the same corrupted matrix for a given (level, repeat).
 */
[[nodiscard]] SweepTable corruption_sweep(const std::vector<double>& levels, int repeats,
                                          const std::vector<SolverSpec>& solvers,
                                          const SweepSpec& spec);

struct ModeDifference {
    std::string solver;
    double difference = 0.0;
    /// Leading singular gap (s1 - s2) / s1 of the two compared matrices (min).
    double gap = 0.0;
    bool degenerate = false;
    bool failed = false;
    std::string error;
};

/// Leading left singular vector of x.
[[nodiscard]] Vector first_mode(const Matrix& x, double* gap = nullptr);

/// min(||u - v||, ||u + v||).
[[nodiscard]] double sign_aligned_distance(const Vector& u, const Vector& v);

/**
 * Distance between the first PCA modes of X_s(D) and X_s(D~) for a raw PCA
 * baseline (listed first, named "pca") and every solver s.
 */
[[nodiscard]] std::vector<ModeDifference> first_mode_difference(
    const ObservationMatrix& d, const CorruptionSpec& corruption,
    const std::vector<SolverSpec>& solvers);

}  // namespace trpca
