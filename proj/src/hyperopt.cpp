#include "trpca/hyperopt.hpp"

#include "trpca/random.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <thread>

namespace trpca {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Unit {
    std::vector<double> lo;
    std::vector<double> span;

    explicit Unit(const std::vector<ParameterBound>& bounds) {
        for (const auto& b : bounds) {
            lo.push_back(std::log(b.low));
            span.push_back(std::log(b.high) - std::log(b.low));
        }
    }

    [[nodiscard]] std::vector<double> to_params(const Vector& u) const {
        std::vector<double> p(lo.size());
        for (std::size_t i = 0; i < lo.size(); ++i) {
            p[i] = std::exp(lo[i] + span[i] * std::clamp(u(static_cast<Index>(i)), 0.0, 1.0));
        }
        return p;
    }

    [[nodiscard]] Vector to_unit(const std::vector<double>& p) const {
        Vector u(static_cast<Index>(lo.size()));
        for (std::size_t i = 0; i < lo.size(); ++i) {
            u(static_cast<Index>(i)) = (std::log(p[i]) - lo[i]) / span[i];
        }
        return u;
    }
};

double radical_inverse(std::uint64_t index, std::uint64_t base) {
    double result = 0.0;
    double f = 1.0 / static_cast<double>(base);
    while (index > 0) {
        result += f * static_cast<double>(index % base);
        index /= base;
        f /= static_cast<double>(base);
    }
    return result;
}

std::uint64_t nth_prime(std::size_t k) {
    std::uint64_t candidate = 1;
    std::size_t found = 0;
    while (found <= k) {
        ++candidate;
        bool prime = true;
        for (std::uint64_t d = 2; d * d <= candidate; ++d) {
            if (candidate % d == 0) {
                prime = false;
                break;
            }
        }
        if (prime) {
            ++found;
        }
    }
    return candidate;
}

Vector halton_point(std::uint64_t index, Index dim) {
    Vector u(dim);
    for (Index i = 0; i < dim; ++i) {
        u(i) = radical_inverse(index, nth_prime(static_cast<std::size_t>(i)));
    }
    return u;
}

double matern52(double r, double length) {
    const double s = std::sqrt(5.0) * r / length;
    return (1.0 + s + s * s / 3.0) * std::exp(-s);
}

/// Zero-mean GP on standardized targets with a profiled signal variance.
class GaussianProcess {
public:
    GaussianProcess(std::vector<Vector> x, const std::vector<double>& y) : x_(std::move(x)) {
        const Index n = static_cast<Index>(x_.size());
        Vector z(n);
        for (Index i = 0; i < n; ++i) {
            z(i) = y[static_cast<std::size_t>(i)];
        }
        mean_ = z.mean();
        scale_ = std::sqrt((z.array() - mean_).square().mean());
        if (!(scale_ > 1e-12)) {
            scale_ = 1.0;
        }
        z_ = (z.array() - mean_) / scale_;

        double best_lml = -kInf;
        for (const double length : {0.05, 0.1, 0.2, 0.4, 0.8, 1.6}) {
            for (const double noise : {1e-6, 1e-4, 1e-2, 1e-1}) {
                Matrix k = gram(length);
                k.diagonal().array() += noise;
                Eigen::LLT<Matrix> llt(k);
                if (llt.info() != Eigen::Success) {
                    continue;
                }
                const Vector alpha = llt.solve(z_);
                const double variance = std::max(z_.dot(alpha) / static_cast<double>(n), 1e-12);
                const Matrix l = llt.matrixL();
                const double log_det = 2.0 * l.diagonal().array().log().sum();
                const double lml = -0.5 * static_cast<double>(n) * std::log(variance) -
                                   0.5 * log_det;
                if (lml > best_lml) {
                    best_lml = lml;
                    length_ = length;
                    noise_ = noise;
                    variance_ = variance;
                    llt_ = llt;
                    alpha_ = alpha;
                }
            }
        }
        if (!(best_lml > -kInf)) {
            throw std::runtime_error("gaussian process: covariance is not positive definite");
        }
    }

    /// Predictive mean and standard deviation in standardized units.
    void predict(const Vector& u, double& mean, double& sd) const {
        const Index n = static_cast<Index>(x_.size());
        Vector k(n);
        for (Index i = 0; i < n; ++i) {
            k(i) = matern52((u - x_[static_cast<std::size_t>(i)]).norm(), length_);
        }
        mean = k.dot(alpha_);
        const double reduction = k.dot(llt_.solve(k));
        sd = std::sqrt(std::max(variance_ * (1.0 + noise_ - reduction), 1e-18));
    }

    [[nodiscard]] double standardize(double y) const { return (y - mean_) / scale_; }

private:
    [[nodiscard]] Matrix gram(double length) const {
        const Index n = static_cast<Index>(x_.size());
        Matrix k(n, n);
        for (Index i = 0; i < n; ++i) {
            for (Index j = 0; j <= i; ++j) {
                k(i, j) = k(j, i) = matern52(
                    (x_[static_cast<std::size_t>(i)] - x_[static_cast<std::size_t>(j)]).norm(),
                    length);
            }
        }
        return k;
    }

    std::vector<Vector> x_;
    Vector z_;
    double mean_ = 0.0;
    double scale_ = 1.0;
    double length_ = 0.2;
    double noise_ = 1e-6;
    double variance_ = 1.0;
    Eigen::LLT<Matrix> llt_;
    Vector alpha_;
};

double expected_improvement(const GaussianProcess& gp, const Vector& u, double best) {
    double mean = 0.0;
    double sd = 0.0;
    gp.predict(u, mean, sd);
    const double xi = 0.01;
    const double improvement = best - mean - xi;
    const double z = improvement / sd;
    const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
    const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
    return improvement * cdf + sd * pdf;
}

Vector random_unit(Rng& rng, Index dim) {
    Vector u(dim);
    for (Index i = 0; i < dim; ++i) {
        u(i) = rng.uniform();
    }
    return u;
}

Vector propose_ei(const std::vector<TraceEntry>& trace, const Unit& unit, Index dim, Rng& rng) {
    std::vector<Vector> x;
    std::vector<double> y;
    double worst = -kInf;
    for (const auto& e : trace) {
        if (std::isfinite(e.result.objective)) {
            worst = std::max(worst, std::log(std::max(e.result.objective, 1e-300)));
        }
    }
    for (const auto& e : trace) {
        x.push_back(unit.to_unit(e.parameters));
        y.push_back(std::isfinite(e.result.objective)
                        ? std::log(std::max(e.result.objective, 1e-300))
                        : worst);
    }
    const GaussianProcess gp(x, y);
    const double best = gp.standardize(*std::min_element(y.begin(), y.end()));

    constexpr int kCandidates = 1000;
    constexpr int kStarts = 10;
    constexpr int kLocalSteps = 30;
    std::vector<std::pair<double, Vector>> scored;
    scored.reserve(kCandidates);
    for (int i = 0; i < kCandidates; ++i) {
        Vector u = random_unit(rng, dim);
        const double ei = expected_improvement(gp, u, best);
        scored.emplace_back(ei, std::move(u));
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });

    double best_ei = scored.front().first;
    Vector best_u = scored.front().second;
    for (int s = 0; s < kStarts && s < static_cast<int>(scored.size()); ++s) {
        Vector u = scored[static_cast<std::size_t>(s)].second;
        double value = scored[static_cast<std::size_t>(s)].first;
        double step = 0.1;
        for (int k = 0; k < kLocalSteps; ++k) {
            Vector trial = u;
            for (Index i = 0; i < dim; ++i) {
                trial(i) = std::clamp(trial(i) + step * rng.normal(), 0.0, 1.0);
            }
            const double v = expected_improvement(gp, trial, best);
            if (v > value) {
                value = v;
                u = std::move(trial);
            } else {
                step *= 0.8;
            }
        }
        if (value > best_ei) {
            best_ei = value;
            best_u = u;
        }
    }
    return best_u;
}

double& parameter_ref(SolverSpec& solver, const std::string& name) {
    const bool online = solver.kind == SolverKind::online;
    if (solver.kind == SolverKind::pcp) {
        if (name == "lambda2") {
            return solver.pcp.lambda2;
        }
        throw ConfigError("parameter '" + name + "' does not apply to the pcp solver");
    }
    if (name == "lambda1") {
        return online ? solver.online.lambda1 : solver.batch.lambda1;
    }
    if (name == "lambda2") {
        return online ? solver.online.lambda2 : solver.batch.lambda2;
    }
    if (name.size() > 3 && name.rfind("eta", 0) == 0) {
        std::size_t k = 0;
        try {
            k = std::stoul(name.substr(3));
        } catch (const std::exception&) {
            k = 0;
        }
        auto& penalties = online ? solver.online.penalties : solver.batch.penalties;
        if (k >= 1 && k <= penalties.size()) {
            return penalties[k - 1].weight;
        }
    }
    throw ConfigError("unknown or out-of-range parameter '" + name + "'");
}

}  // namespace

void HyperSearchSpec::validate() const {
    if (subsets < 1) {
        throw ConfigError("subsets must be at least 1");
    }
    if (!(mask_fraction > 0.0 && mask_fraction < 1.0)) {
        throw ConfigError("mask_fraction must lie in (0, 1)");
    }
    if (budget < 1) {
        throw ConfigError("budget must be at least 1");
    }
    if (workers < 1) {
        throw ConfigError("workers must be at least 1");
    }
    for (const auto& b : bounds) {
        if (!(b.low > 0.0) || !(b.low < b.high) || !std::isfinite(b.high)) {
            throw ConfigError("bounds for '" + b.name + "' must satisfy 0 < low < high");
        }
    }
    for (std::size_t i = 0; i < bounds.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (bounds[i].name == bounds[j].name) {
                throw ConfigError("parameter '" + bounds[i].name + "' is bounded twice");
            }
        }
    }
}

Index hidden_count(Index observed, double mask_fraction) {
    return static_cast<Index>(std::ceil(mask_fraction * static_cast<double>(observed) - 1e-9));
}

std::vector<BoolMatrix> draw_mask_subsets(const BoolMatrix& mask, const HyperSearchSpec& spec) {
    spec.validate();
    std::vector<Index> observed;
    for (Index j = 0; j < mask.cols(); ++j) {
        for (Index i = 0; i < mask.rows(); ++i) {
            if (mask(i, j)) {
                observed.push_back(j * mask.rows() + i);
            }
        }
    }
    const Index count = hidden_count(static_cast<Index>(observed.size()), spec.mask_fraction);
    if (count < 1 || count > static_cast<Index>(observed.size())) {
        throw ConfigError("draw_mask_subsets: not enough observed entries to hide");
    }
    std::vector<BoolMatrix> subsets;
    for (int s = 0; s < spec.subsets; ++s) {
        Rng rng(Rng::derive(spec.seed, 1, static_cast<std::uint64_t>(s)));
        std::vector<Index> cells = observed;
        rng.shuffle(cells);
        BoolMatrix hide = BoolMatrix::Constant(mask.rows(), mask.cols(), false);
        for (Index k = 0; k < count; ++k) {
            const Index c = cells[static_cast<std::size_t>(k)];
            hide(c % mask.rows(), c / mask.rows()) = true;
        }
        subsets.push_back(std::move(hide));
    }
    return subsets;
}

CvResult cv_objective(const ObservationMatrix& d, const std::vector<BoolMatrix>& subsets,
                      const SolverSpec& solver, int workers) {
    d.validate();
    if (subsets.empty()) {
        throw std::invalid_argument("cv_objective: no subsets");
    }
    for (const auto& s : subsets) {
        if (s.rows() != d.rows() || s.cols() != d.cols()) {
            throw std::invalid_argument("cv_objective: subset shape mismatch");
        }
    }
    const std::size_t folds = subsets.size();
    CvResult out;
    out.fold_errors.assign(folds, kInf);
    out.fold_messages.assign(folds, std::string());

    auto run_fold = [&](std::size_t f) {
        try {
            const BoolMatrix& hide = subsets[f];
            BoolMatrix mask = d.mask.array() && !hide.array();
            Matrix data = d.data;
            for (Index j = 0; j < data.cols(); ++j) {
                for (Index i = 0; i < data.rows(); ++i) {
                    if (!mask(i, j)) {
                        data(i, j) = 0.0;
                    }
                }
            }
            const Decomposition dec =
                run_solver(solver, ObservationMatrix(std::move(data), std::move(mask)));
            double error = 0.0;
            for (Index j = 0; j < hide.cols(); ++j) {
                for (Index i = 0; i < hide.rows(); ++i) {
                    if (hide(i, j) && d.mask(i, j)) {
                        error += std::abs(d.data(i, j) - dec.X(i, j));
                    }
                }
            }
            if (!std::isfinite(error)) {
                out.fold_messages[f] = "non-finite reconstruction";
                return;
            }
            out.fold_errors[f] = error;
        } catch (const std::exception& e) {
            out.fold_messages[f] = e.what();
        }
    };

    const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), folds);
    if (threads <= 1) {
        for (std::size_t f = 0; f < folds; ++f) {
            run_fold(f);
        }
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < threads; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t f = w; f < folds; f += threads) {
                    run_fold(f);
                }
            });
        }
        for (auto& t : pool) {
            t.join();
        }
    }

    double sum = 0.0;
    for (const double e : out.fold_errors) {
        sum += e;
    }
    out.objective = sum / static_cast<double>(folds);
    return out;
}

std::vector<double> get_parameters(const SolverSpec& solver,
                                   const std::vector<ParameterBound>& bounds) {
    SolverSpec copy = solver;
    std::vector<double> values;
    for (const auto& b : bounds) {
        values.push_back(parameter_ref(copy, b.name));
    }
    return values;
}

SolverSpec with_parameters(const SolverSpec& solver, const std::vector<ParameterBound>& bounds,
                           const std::vector<double>& values) {
    if (values.size() != bounds.size()) {
        throw std::invalid_argument("with_parameters: size mismatch");
    }
    SolverSpec out = solver;
    for (std::size_t i = 0; i < bounds.size(); ++i) {
        parameter_ref(out, bounds[i].name) = values[i];
    }
    return out;
}

std::vector<ParameterBound> default_bounds(const SolverSpec& solver) {
    if (solver.kind == SolverKind::pcp) {
        return {{"lambda2", 1e-3, 1.0}};
    }
    std::vector<ParameterBound> bounds{{"lambda1", 1e-2, 1e2}, {"lambda2", 1e-2, 1e1}};
    const auto& penalties =
        solver.kind == SolverKind::online ? solver.online.penalties : solver.batch.penalties;
    for (std::size_t k = 0; k < penalties.size(); ++k) {
        bounds.push_back({"eta" + std::to_string(k + 1), 1e-2, 1e2});
    }
    return bounds;
}

TuneResult tune(const ObservationMatrix& d, const HyperSearchSpec& spec,
                const SolverSpec& solver) {
    HyperSearchSpec s = spec;
    if (s.bounds.empty()) {
        s.bounds = default_bounds(solver);
    }
    s.validate();
    const Index dim = static_cast<Index>(s.bounds.size());
    const auto subsets = draw_mask_subsets(d.mask, s);
    const Unit unit(s.bounds);

    TuneResult result;
    result.bounds = s.bounds;

    auto evaluate = [&](std::vector<double> parameters, const std::string& source) {
        TraceEntry entry;
        entry.evaluation = static_cast<int>(result.trace.size());
        entry.source = source;
        entry.parameters = std::move(parameters);
        entry.result = cv_objective(d, subsets, with_parameters(solver, s.bounds, entry.parameters),
                                    s.workers);
        result.trace.push_back(std::move(entry));
    };

    const int design = (s.budget + 3) / 4;
    std::vector<std::vector<double>> design_points;
    const std::vector<double> start = get_parameters(solver, s.bounds);
    bool start_inside = true;
    for (std::size_t i = 0; i < start.size(); ++i) {
        start_inside = start_inside && start[i] >= s.bounds[i].low && start[i] <= s.bounds[i].high;
    }
    if (start_inside) {
        design_points.push_back(start);
    }
    for (std::uint64_t h = 1; static_cast<int>(design_points.size()) < design; ++h) {
        design_points.push_back(unit.to_params(halton_point(h, dim)));
    }
    for (auto& p : design_points) {
        evaluate(std::move(p), "design");
    }

    Rng rng(Rng::derive(s.seed, 2));
    while (static_cast<int>(result.trace.size()) < s.budget) {
        bool any_finite = false;
        for (const auto& e : result.trace) {
            any_finite = any_finite || std::isfinite(e.result.objective);
        }
        if (s.method == SearchMethod::random || !any_finite) {
            evaluate(unit.to_params(random_unit(rng, dim)), "random");
        } else {
            evaluate(unit.to_params(propose_ei(result.trace, unit, dim, rng)), "ei");
        }
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < result.trace.size(); ++i) {
        if (result.trace[i].result.objective < result.trace[best].result.objective) {
            best = i;
        }
    }
    if (!std::isfinite(result.trace[best].result.objective)) {
        throw TuningError("tune: every evaluation failed on at least one fold");
    }
    result.best_index = best;
    result.best = with_parameters(solver, s.bounds, result.trace[best].parameters);
    return result;
}

void write_trace_csv(std::ostream& out, const TuneResult& result) {
    out << "evaluation,source";
    for (const auto& b : result.bounds) {
        out << ',' << b.name;
    }
    const std::size_t folds =
        result.trace.empty() ? 0 : result.trace.front().result.fold_errors.size();
    for (std::size_t f = 0; f < folds; ++f) {
        out << ",fold" << (f + 1);
    }
    out << ",mean\n";
    for (const auto& e : result.trace) {
        out << e.evaluation << ',' << e.source;
        for (const double p : e.parameters) {
            out << ',' << format_double(p);
        }
        for (const double f : e.result.fold_errors) {
            out << ',' << format_double(f);
        }
        out << ',' << format_double(e.result.objective) << '\n';
    }
}

ConfigEntries solver_config_entries(const SolverSpec& solver) {
    ConfigEntries entries;
    auto penalties_text = [](const std::vector<TemporalPenalty>& penalties) {
        std::string text;
        for (const auto& p : penalties) {
            if (!text.empty()) {
                text += ',';
            }
            text += std::to_string(p.lag) + ":" + format_double(p.weight);
        }
        return text;
    };
    switch (solver.kind) {
    case SolverKind::pcp:
        entries.emplace_back("mode", "pcp");
        entries.emplace_back("pcp-lambda", format_double(solver.pcp.lambda2));
        break;
    case SolverKind::batch:
        entries.emplace_back("mode", "batch");
        entries.emplace_back("lambda1", format_double(solver.batch.lambda1));
        entries.emplace_back("lambda2", format_double(solver.batch.lambda2));
        entries.emplace_back("penalties", penalties_text(solver.batch.penalties));
        entries.emplace_back("rank", std::to_string(solver.batch.rank));
        break;
    case SolverKind::online:
        entries.emplace_back("mode", "online");
        entries.emplace_back("lambda1", format_double(solver.online.lambda1));
        entries.emplace_back("lambda2", format_double(solver.online.lambda2));
        entries.emplace_back("penalties", penalties_text(solver.online.penalties));
        entries.emplace_back("rank", std::to_string(solver.online.rank));
        entries.emplace_back("burnin", std::to_string(solver.online.burnin));
        if (solver.online.window) {
            entries.emplace_back("window", std::to_string(*solver.online.window));
        }
        break;
    }
    return entries;
}

}  // namespace trpca
