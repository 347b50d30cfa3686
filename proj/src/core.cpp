#include "trpca/core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace trpca {

Index max_lag(std::span<const TemporalPenalty> penalties) {
    Index lag = 0;
    for (const auto& p : penalties) lag = std::max(lag, p.lag);
    return lag;
}

double total_weight(std::span<const TemporalPenalty> penalties) {
    double w = 0.0;
    for (const auto& p : penalties) w += p.weight;
    return w;
}

void validate_penalties(std::span<const TemporalPenalty> penalties, Index n) {
    for (const auto& p : penalties) {
        if (p.lag < 1 || p.lag >= n) {
            throw std::invalid_argument("temporal penalty lag " + std::to_string(p.lag) +
                                        " must lie in [1, " + std::to_string(n - 1) + "]");
        }
        if (!(p.weight >= 0.0) || !std::isfinite(p.weight)) {
            throw std::invalid_argument("temporal penalty weight must be non-negative");
        }
    }
}

double soft_threshold(double z, double alpha) {
    if (alpha < 0.0) throw std::invalid_argument("soft_threshold: negative level");
    if (z > alpha) return z - alpha;
    if (z < -alpha) return z + alpha;
    return 0.0;
}

Matrix soft_threshold(const Matrix& z, double alpha) {
    if (alpha < 0.0) throw std::invalid_argument("soft_threshold: negative level");
    return z.unaryExpr([alpha](double v) { return soft_threshold(v, alpha); });
}

Vector soft_threshold(const Vector& z, double alpha) {
    if (alpha < 0.0) throw std::invalid_argument("soft_threshold: negative level");
    return z.unaryExpr([alpha](double v) { return soft_threshold(v, alpha); });
}

Matrix difference_operator(Index n, Index lag) {
    if (lag < 1 || lag >= n) {
        throw std::invalid_argument("difference_operator: lag must lie in [1, n)");
    }
    Matrix h = Matrix::Zero(n, n - lag);
    for (Index j = 0; j < n - lag; ++j) {
        h(j, j) = -1.0;
        h(j + lag, j) = 1.0;
    }
    return h;
}

Matrix penalty_laplacian(Index n, Index lag) {
    if (lag < 1 || lag >= n) {
        throw std::invalid_argument("penalty_laplacian: lag must lie in [1, n)");
    }
    Matrix l = Matrix::Zero(n, n);
    for (Index j = 0; j < n - lag; ++j) {
        l(j, j) += 1.0;
        l(j + lag, j + lag) += 1.0;
        l(j, j + lag) -= 1.0;
        l(j + lag, j) -= 1.0;
    }
    return l;
}

Eigen::SparseMatrix<double> weighted_laplacian(Index n,
                                               std::span<const TemporalPenalty> penalties) {
    validate_penalties(penalties, n);
    std::vector<Eigen::Triplet<double>> triplets;
    for (const auto& p : penalties) {
        if (p.weight == 0.0) continue;
        const double w = 2.0 * p.weight;
        for (Index j = 0; j < n - p.lag; ++j) {
            triplets.emplace_back(j, j, w);
            triplets.emplace_back(j + p.lag, j + p.lag, w);
            triplets.emplace_back(j, j + p.lag, -w);
            triplets.emplace_back(j + p.lag, j, -w);
        }
    }
    Eigen::SparseMatrix<double> g(n, n);
    g.setFromTriplets(triplets.begin(), triplets.end());
    return g;
}

double temporal_penalty_value(const Matrix& x, std::span<const TemporalPenalty> penalties) {
    double total = 0.0;
    const Index n = x.cols();
    for (const auto& p : penalties) {
        if (p.lag >= n) continue;
        const double sq = (x.rightCols(n - p.lag) - x.leftCols(n - p.lag)).squaredNorm();
        total += p.weight * sq;
    }
    return total;
}

Matrix project_observed(const Matrix& m, const BoolMatrix& mask) {
    if (m.rows() != mask.rows() || m.cols() != mask.cols()) {
        throw std::invalid_argument("project_observed: shape mismatch");
    }
    return mask.select(m, Matrix::Zero(m.rows(), m.cols()));
}

Vector row_std(const Matrix& x) {
    Vector out(x.rows());
    if (x.cols() == 0) return Vector::Zero(x.rows());
    const double n = static_cast<double>(x.cols());
    for (Index i = 0; i < x.rows(); ++i) {
        const double mean = x.row(i).sum() / n;
        out(i) = std::sqrt((x.row(i).array() - mean).square().sum() / n);
    }
    return out;
}

AnomalyFilterResult filter_anomalies(const Matrix& a_tilde, const Matrix& x, double alpha) {
    if (a_tilde.rows() != x.rows() || a_tilde.cols() != x.cols()) {
        throw std::invalid_argument("filter_anomalies: shape mismatch");
    }
    if (!(alpha > 0.0)) {
        throw std::invalid_argument("filter_anomalies: alpha must be positive");
    }
    double range = x.size() > 0 ? x.maxCoeff() - x.minCoeff() : 0.0;
    if (!(range > 0.0)) range = 1.0;
    const double floor = 1e-12 * range;

    const Vector sigma = row_std(x);
    AnomalyFilterResult out;
    out.anomalies = Matrix::Zero(a_tilde.rows(), a_tilde.cols());
    out.noise = Matrix::Zero(a_tilde.rows(), a_tilde.cols());
    out.scores = Matrix::Zero(a_tilde.rows(), a_tilde.cols());
    for (Index j = 0; j < a_tilde.cols(); ++j) {
        for (Index i = 0; i < a_tilde.rows(); ++i) {
            const double v = a_tilde(i, j);
            const double s = std::abs(v) / std::max(sigma(i), floor);
            out.scores(i, j) = s;
            if (s > alpha) {
                out.anomalies(i, j) = v;
            } else {
                out.noise(i, j) = v;
            }
        }
    }
    return out;
}

}  // namespace trpca
