#include "trpca/timeseries.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace trpca {

std::size_t SignalSeries::observed_count() const {
    return static_cast<std::size_t>(
        std::count_if(values.begin(), values.end(), [](const auto& v) { return v.has_value(); }));
}

SignalSeries SignalSeries::from_values(std::span<const double> values) {
    SignalSeries s;
    s.values.reserve(values.size());
    for (double v : values) {
        if (std::isfinite(v)) {
            s.values.emplace_back(v);
        } else {
            s.values.emplace_back(std::nullopt);
        }
    }
    return s;
}

ObservationMatrix::ObservationMatrix(Matrix data, BoolMatrix mask)
    : data(std::move(data)), mask(std::move(mask)) {
    validate();
}

ObservationMatrix::ObservationMatrix(Matrix data)
    : data(std::move(data)), mask(BoolMatrix::Constant(this->data.rows(), this->data.cols(), true)) {
    validate();
}

void ObservationMatrix::validate() const {
    if (data.rows() != mask.rows() || data.cols() != mask.cols()) {
        throw std::invalid_argument("observation matrix: data and mask shapes differ");
    }
    for (Index j = 0; j < data.cols(); ++j) {
        for (Index i = 0; i < data.rows(); ++i) {
            if (mask(i, j) && !std::isfinite(data(i, j))) {
                throw std::invalid_argument("observation matrix: observed entry is not finite");
            }
        }
    }
}

Matrix ObservationMatrix::zero_filled() const {
    return mask.select(data, Matrix::Zero(data.rows(), data.cols()));
}

ObservationMatrix ObservationMatrix::columns(Index first, Index count) const {
    if (first < 0 || count < 0 || first + count > cols()) {
        throw std::out_of_range("observation matrix: column range out of bounds");
    }
    ObservationMatrix out;
    out.data = data.middleCols(first, count);
    out.mask = mask.middleCols(first, count);
    return out;
}

ObservationMatrix reshape_to_matrix(const SignalSeries& signal, Index period) {
    if (period < 1) {
        throw std::invalid_argument("reshape_to_matrix: period must be positive");
    }
    if (signal.values.empty()) {
        throw std::invalid_argument("reshape_to_matrix: empty signal");
    }
    const auto len = static_cast<Index>(signal.size());
    const Index cols = (len + period - 1) / period;
    ObservationMatrix out;
    out.data = Matrix::Zero(period, cols);
    out.mask = BoolMatrix::Constant(period, cols, false);
    for (Index k = 0; k < len; ++k) {
        const auto& v = signal.values[static_cast<std::size_t>(k)];
        if (v && std::isfinite(*v)) {
            out.data(k % period, k / period) = *v;
            out.mask(k % period, k / period) = true;
        }
    }
    return out;
}

SignalSeries flatten_to_signal(const ObservationMatrix& matrix, std::size_t original_length) {
    const auto capacity = static_cast<std::size_t>(matrix.rows() * matrix.cols());
    if (original_length == 0 || original_length > capacity) {
        throw std::invalid_argument("flatten_to_signal: length exceeds matrix capacity");
    }
    SignalSeries s;
    s.values.reserve(original_length);
    const Index m = matrix.rows();
    for (std::size_t k = 0; k < original_length; ++k) {
        const Index i = static_cast<Index>(k) % m;
        const Index j = static_cast<Index>(k) / m;
        if (matrix.mask(i, j)) {
            s.values.emplace_back(matrix.data(i, j));
        } else {
            s.values.emplace_back(std::nullopt);
        }
    }
    return s;
}

std::vector<double> pacf(const SignalSeries& signal, std::size_t max_lag) {
    if (max_lag == 0) {
        throw std::invalid_argument("pacf: max_lag must be positive");
    }
    const std::size_t present = signal.observed_count();
    if (present < max_lag + 2) {
        throw std::invalid_argument("pacf: series too short for the requested lag");
    }

    double mean = 0.0;
    for (const auto& v : signal.values) {
        if (v) mean += *v;
    }
    mean /= static_cast<double>(present);

    // Available-case autocovariances, rescaled to the biased (divide by N)
    // estimator so that complete data reproduces the textbook ACF.
    const std::size_t n = signal.size();
    std::vector<double> gamma(max_lag + 1, 0.0);
    for (std::size_t k = 0; k <= max_lag && k < n; ++k) {
        double sum = 0.0;
        std::size_t pairs = 0;
        for (std::size_t t = 0; t + k < n; ++t) {
            const auto& a = signal.values[t];
            const auto& b = signal.values[t + k];
            if (a && b) {
                sum += (*a - mean) * (*b - mean);
                ++pairs;
            }
        }
        if (pairs > 0) {
            gamma[k] = sum / static_cast<double>(pairs) *
                       (static_cast<double>(n - k) / static_cast<double>(n));
        }
    }
    if (!(gamma[0] > 0.0)) {
        throw std::invalid_argument("pacf: series has zero variance");
    }

    // Durbin-Levinson.
    std::vector<double> out(max_lag, 0.0);
    std::vector<double> phi(max_lag + 1, 0.0);
    std::vector<double> prev(max_lag + 1, 0.0);
    double v = gamma[0];
    for (std::size_t k = 1; k <= max_lag; ++k) {
        double num = gamma[k];
        for (std::size_t j = 1; j < k; ++j) {
            num -= prev[j] * gamma[k - j];
        }
        double phikk = num / v;
        phikk = std::clamp(phikk, -1.0, 1.0);
        phi[k] = phikk;
        for (std::size_t j = 1; j < k; ++j) {
            phi[j] = prev[j] - phikk * prev[k - j];
        }
        out[k - 1] = phikk;
        v *= (1.0 - phikk * phikk);
        if (!(v > 0.0)) {
            // Perfectly predictable from the previous lags; higher orders carry nothing.
            break;
        }
        std::copy(phi.begin(), phi.end(), prev.begin());
    }
    return out;
}

PeriodSuggestion suggest_period(const SignalSeries& signal, std::size_t max_lag) {
    if (max_lag < 2) {
        throw std::invalid_argument("suggest_period: max_lag must be at least 2");
    }
    const auto values = pacf(signal, max_lag);
    PeriodSuggestion best;
    double best_abs = -1.0;
    for (std::size_t lag = 2; lag <= max_lag; ++lag) {
        const double a = std::abs(values[lag - 1]);
        if (a > best_abs) {
            best_abs = a;
            best.period = lag;
            best.pacf_value = values[lag - 1];
        }
    }
    const double band = 2.0 / std::sqrt(static_cast<double>(signal.observed_count()));
    best.significant = best_abs > band;
    return best;
}

}  // namespace trpca
