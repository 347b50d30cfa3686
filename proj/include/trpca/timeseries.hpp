#pragma once

#include "trpca/types.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace trpca {

/// A univariate series with optional (missing) samples.
struct SignalSeries {
    std::vector<std::optional<double>> values;
    std::string sample_interval;

    [[nodiscard]] std::size_t size() const { return values.size(); }
    [[nodiscard]] std::size_t observed_count() const;

    static SignalSeries from_values(std::span<const double> values);
};

/// Period-folded matrix form of a series: one column per period, one row per
/// within-period offset. Entries with mask == false carry no information.
struct ObservationMatrix {
    Matrix data;
    BoolMatrix mask;

    ObservationMatrix() = default;
    ObservationMatrix(Matrix data, BoolMatrix mask);
    /// Fully observed matrix.
    explicit ObservationMatrix(Matrix data);

    [[nodiscard]] Index rows() const { return data.rows(); }
    [[nodiscard]] Index cols() const { return data.cols(); }
    [[nodiscard]] Index observed_count() const { return mask.count(); }

    /// Data with unobserved cells set to zero.
    [[nodiscard]] Matrix zero_filled() const;
    /// Columns [first, first + count).
    [[nodiscard]] ObservationMatrix columns(Index first, Index count) const;

    void validate() const;
};

[[nodiscard]] ObservationMatrix reshape_to_matrix(const SignalSeries& signal, Index period);

[[nodiscard]] SignalSeries flatten_to_signal(const ObservationMatrix& matrix,
                                             std::size_t original_length);

/**
 * Partial autocorrelations at lags 1..max_lag.
 *
 * Autocovariances are estimated from the available pairs only (missing samples
 * are dropped pairwise), then turned into partial autocorrelations with the
 * Durbin-Levinson recursion.
 */
[[nodiscard]] std::vector<double> pacf(const SignalSeries& signal, std::size_t max_lag);

struct PeriodSuggestion {
    std::size_t period = 0;
    double pacf_value = 0.0;
    /// False when the winning PACF value is inside the +-2/sqrt(N) noise band.
    bool significant = false;
};

/// Lag in [2, max_lag] with the largest |PACF|; ties go to the smallest lag.
[[nodiscard]] PeriodSuggestion suggest_period(const SignalSeries& signal, std::size_t max_lag);

}  // namespace trpca
