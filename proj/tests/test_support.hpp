#pragma once

#include "trpca/random.hpp"
#include "trpca/timeseries.hpp"
#include "trpca/types.hpp"

#include <cmath>
#include <cstdint>

namespace trpca::testing {

inline Matrix random_matrix(Rng& rng, Index rows, Index cols) {
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j) {
        for (Index i = 0; i < rows; ++i) {
            m(i, j) = rng.normal();
        }
    }
    return m;
}

inline Vector random_vector(Rng& rng, Index n) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) {
        v(i) = rng.normal();
    }
    return v;
}

/// Product of two Gaussian factors: rank r with probability one.
inline Matrix random_low_rank(Rng& rng, Index rows, Index cols, Index rank) {
    return random_matrix(rng, rows, rank) * random_matrix(rng, rank, cols);
}

inline BoolMatrix random_mask(Rng& rng, Index rows, Index cols, double missing) {
    BoolMatrix mask(rows, cols);
    for (Index j = 0; j < cols; ++j) {
        for (Index i = 0; i < rows; ++i) {
            mask(i, j) = rng.uniform() >= missing;
        }
    }
    return mask;
}

/// Low-rank matrix plus sparse spikes plus small noise, with random missing cells.
inline ObservationMatrix synthetic_observations(std::uint64_t seed, Index rows, Index cols,
                                                Index rank, double missing = 0.05,
                                                double spikes = 0.05, double noise = 0.01) {
    Rng rng(seed);
    Matrix data = random_low_rank(rng, rows, cols, rank);
    for (Index j = 0; j < cols; ++j) {
        for (Index i = 0; i < rows; ++i) {
            data(i, j) += noise * rng.normal();
            if (rng.uniform() < spikes) {
                data(i, j) += rng.uniform(-6.0, 6.0);
            }
        }
    }
    BoolMatrix mask = random_mask(rng, rows, cols, missing);
    for (Index j = 0; j < cols; ++j) {
        for (Index i = 0; i < rows; ++i) {
            if (!mask(i, j)) {
                data(i, j) = 0.0;
            }
        }
    }
    return ObservationMatrix(std::move(data), std::move(mask));
}

inline double relative_error(const Matrix& estimate, const Matrix& truth) {
    return (estimate - truth).norm() / truth.norm();
}

}  // namespace trpca::testing
