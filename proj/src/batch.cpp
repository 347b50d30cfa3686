#include "trpca/batch.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

namespace trpca {

namespace {

double max_abs_diff(const Matrix& a, const Matrix& b) {
    return a.size() == 0 ? 0.0 : (a - b).cwiseAbs().maxCoeff();
}

// Solves Z S = R for Z with S symmetric positive (semi)definite and small.
Matrix solve_right_spd(const Matrix& r, Matrix s) {
    Eigen::LLT<Matrix> llt(s);
    if (llt.info() != Eigen::Success) {
        const double jitter =
            1e-10 * std::max(std::abs(s.trace()) / static_cast<double>(s.rows()), 1.0);
        s.diagonal().array() += jitter;
        llt.compute(s);
        if (llt.info() != Eigen::Success) {
            return s.completeOrthogonalDecomposition().solve(r.transpose()).transpose();
        }
    }
    return llt.solve(r.transpose()).transpose();
}

// Right-multiplication by ((1 + mu) I + G)^{-1} where G is the sparse
// weighted Laplacian. The symbolic factorization is done once; the numeric
// one is refreshed only when mu changes.
class TemporalSystem {
public:
    TemporalSystem(Index n, std::span<const TemporalPenalty> penalties)
        : laplacian_(weighted_laplacian(n, penalties)) {
        has_penalty_ = laplacian_.nonZeros() > 0;
        if (has_penalty_) {
            Eigen::SparseMatrix<double> id(n, n);
            id.setIdentity();
            pattern_ = laplacian_ + id;
            solver_.analyzePattern(pattern_);
        }
    }

    Matrix apply_inverse(const Matrix& r, double mu) {
        if (!has_penalty_) return r / (1.0 + mu);
        if (!factored_mu_ || *factored_mu_ != mu) {
            Eigen::SparseMatrix<double> id(laplacian_.rows(), laplacian_.cols());
            id.setIdentity();
            pattern_ = laplacian_ + (1.0 + mu) * id;
            solver_.factorize(pattern_);
            if (solver_.info() != Eigen::Success) {
                throw std::runtime_error("temporal batch: X-update system is not positive definite");
            }
            factored_mu_ = mu;
        }
        return solver_.solve(r.transpose()).transpose();
    }

private:
    Eigen::SparseMatrix<double> laplacian_;
    Eigen::SparseMatrix<double> pattern_;
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> solver_;
    std::optional<double> factored_mu_;
    bool has_penalty_ = false;
};

}  // namespace

void BatchConfig::validate(Index m, Index n) const {
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) {
        throw ConfigError("batch: lambda1 and lambda2 must be non-negative");
    }
    if (!(mu0 > 0.0) || !(mu_max >= mu0)) throw ConfigError("batch: need 0 < mu0 <= mu_max");
    if (!(rho > 1.0)) throw ConfigError("batch: rho must exceed 1");
    if (!(tol > 0.0)) throw ConfigError("batch: tol must be positive");
    if (max_iter < 1) throw ConfigError("batch: max_iter must be positive");
    if (rank < 0 || rank > std::min(m, n)) {
        throw ConfigError("batch: rank must lie in [1, min(m, n)]");
    }
    if (rank == 0 && !(rank_energy > 0.0 && rank_energy <= 1.0)) {
        throw ConfigError("batch: rank_energy must lie in (0, 1]");
    }
    try {
        validate_penalties(penalties, n);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

double temporal_objective(const ObservationMatrix& d, const Matrix& x, const Matrix& a,
                          double lambda1, double lambda2,
                          std::span<const TemporalPenalty> penalties) {
    const Matrix resid = project_observed(d.data - x - a, d.mask);
    const double nuclear = Eigen::BDCSVD<Matrix>(x).singularValues().sum();
    return 0.5 * resid.squaredNorm() + lambda1 * nuclear + lambda2 * a.cwiseAbs().sum() +
           temporal_penalty_value(x, penalties);
}

Decomposition solve_temporal_batch(const ObservationMatrix& d, const BatchConfig& config) {
    const Index m = d.rows();
    const Index n = d.cols();
    config.validate(m, n);
    if (d.observed_count() == 0) {
        throw std::invalid_argument("temporal batch: no observed entries");
    }
    const Index r = config.rank > 0 ? config.rank : estimate_rank(d, config.rank_energy);

    const Matrix observed = d.zero_filled();
    const Matrix ones_mn = Matrix::Ones(m, n);

    Matrix x = ones_mn;
    Matrix a = project_observed(ones_mn, d.mask);
    Matrix y = ones_mn;
    Matrix l;
    Matrix q;
    if (config.init == FactorInit::ones) {
        l = Matrix::Ones(m, r);
        q = Matrix::Ones(n, r);
    } else {
        Eigen::BDCSVD<Matrix> svd(observed, Eigen::ComputeThinU | Eigen::ComputeThinV);
        Vector root = svd.singularValues().head(r).cwiseSqrt();
        // Keep the factors well defined when the data spectrum is shorter than r.
        const double floor = std::max(root.size() > 0 ? root(0) : 0.0, 1.0) * 1e-3;
        root = root.cwiseMax(floor);
        l = svd.matrixU().leftCols(r) * root.asDiagonal();
        q = svd.matrixV().leftCols(r) * root.asDiagonal();
    }

    Matrix lq = l * q.transpose();
    TemporalSystem system(n, config.penalties);
    const Matrix eye_r = Matrix::Identity(r, r);
    const double thresh = config.lambda2 / 2.0;

    Decomposition out;
    double mu = config.mu0;
    double e = std::numeric_limits<double>::infinity();
    std::int64_t it = 0;
    while (e > config.tol && it < config.max_iter) {
        // Unobserved cells of D follow the current estimate.
        const Matrix d_hat = d.mask.select(observed, x + a);

        Matrix x_next = system.apply_inverse(d_hat - a + mu * lq - y, mu);

        Matrix a_next = d.mask.select(soft_threshold(Matrix(d_hat - x_next), thresh),
                                      Matrix::Zero(m, n));

        const Matrix z = mu * x_next + y;
        Matrix l_next = solve_right_spd(z * q, config.lambda1 * eye_r + mu * q.transpose() * q);
        Matrix q_next = solve_right_spd(z.transpose() * l_next,
                                        config.lambda1 * eye_r + mu * l_next.transpose() * l_next);

        Matrix lq_next = l_next * q_next.transpose();
        y += mu * (x_next - lq_next);

        // L and Q are only determined up to an r x r change of basis, which
        // drifts freely once some factor columns collapse, so the stopping
        // test tracks their product.
        e = std::max({max_abs_diff(x_next, x), max_abs_diff(a_next, a),
                      max_abs_diff(lq_next, lq)});
        x = std::move(x_next);
        a = std::move(a_next);
        l = std::move(l_next);
        q = std::move(q_next);
        lq = std::move(lq_next);
        ++it;
        if (config.record_trace) out.trace.push_back({it, e, mu});
        mu = std::min(config.rho * mu, config.mu_max);
        if (!std::isfinite(e)) {
            throw std::runtime_error("temporal batch: iterates diverged");
        }
    }

    out.constraint_gap = max_abs_diff(x, lq);
    out.X = lq;
    out.A = a;
    out.E = project_observed(d.data - out.X - out.A, d.mask);
    out.rank_bound = r;
    out.iterations = it;
    out.final_residual = e;
    out.converged = e <= config.tol;
    return out;
}

Decomposition solve_pcp(const ObservationMatrix& d, const PcpConfig& config) {
    const Index m = d.rows();
    const Index n = d.cols();
    if (d.observed_count() == 0) {
        throw std::invalid_argument("pcp: no observed entries");
    }
    if (config.lambda2 < 0.0 || !(config.tol > 0.0) || config.max_iter < 1) {
        throw ConfigError("pcp: invalid configuration");
    }
    const double lambda =
        config.lambda2 > 0.0 ? config.lambda2 : 1.0 / std::sqrt(static_cast<double>(std::max(m, n)));

    const Matrix observed = d.zero_filled();
    const double d_norm = observed.norm();

    Decomposition out;
    out.X = Matrix::Zero(m, n);
    out.A = Matrix::Zero(m, n);
    out.E = Matrix::Zero(m, n);
    if (d_norm == 0.0) {
        out.converged = true;
        return out;
    }

    Eigen::BDCSVD<Matrix> spec(observed);
    const double spectral = spec.singularValues()(0);
    const double inf_norm = observed.cwiseAbs().maxCoeff() / lambda;
    Matrix y = observed / std::max(spectral, inf_norm);
    double mu = 1.25 / spectral;
    const double mu_bar = mu * 1e7;
    const double rho = 1.5;

    Matrix x = Matrix::Zero(m, n);
    Matrix a = Matrix::Zero(m, n);
    Index rank = 0;
    double resid = std::numeric_limits<double>::infinity();
    std::int64_t it = 0;
    while (it < config.max_iter) {
        Eigen::BDCSVD<Matrix> svd(observed - a + y / mu, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Vector shrunk = (svd.singularValues().array() - 1.0 / mu).max(0.0).matrix();
        rank = (shrunk.array() > 0.0).count();
        x = svd.matrixU().leftCols(rank) * shrunk.head(rank).asDiagonal() *
            svd.matrixV().leftCols(rank).transpose();

        const Matrix target = observed - x + y / mu;
        // Off the observed set the slack is unconstrained and absorbs the residual.
        a = d.mask.select(soft_threshold(target, lambda / mu), target);

        const Matrix z = project_observed(observed - x - a, d.mask);
        y += mu * z;
        mu = std::min(mu * rho, mu_bar);
        ++it;
        resid = z.norm() / d_norm;
        if (resid < config.tol) break;
    }

    out.X = x;
    out.A = project_observed(a, d.mask);
    out.E = project_observed(d.data - out.X - out.A, d.mask);
    out.rank_bound = std::max<Index>(rank, 1);
    out.iterations = it;
    out.final_residual = resid;
    out.converged = resid < config.tol;
    out.constraint_gap = 0.0;
    return out;
}

Index estimate_rank(const ObservationMatrix& d, double energy_fraction) {
    if (!(energy_fraction > 0.0 && energy_fraction <= 1.0)) {
        throw std::invalid_argument("estimate_rank: energy fraction must lie in (0, 1]");
    }
    if (d.rows() == 0 || d.cols() == 0) {
        throw std::invalid_argument("estimate_rank: empty matrix");
    }
    const Vector s = Eigen::BDCSVD<Matrix>(d.zero_filled()).singularValues();
    const double total = s.sum();
    if (!(total > 0.0)) {
        throw std::invalid_argument("estimate_rank: all-zero matrix");
    }
    double cum = 0.0;
    for (Index i = 0; i < s.size(); ++i) {
        cum += s(i);
        if (cum / total >= energy_fraction - 1e-12) return i + 1;
    }
    return s.size();
}

}  // namespace trpca
