#include "trpca/online.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace trpca {

namespace {

using json = nlohmann::json;

Matrix entry_b(const HistoryEntry& e, std::span<const TemporalPenalty> penalties) {
    Matrix b = e.q * e.q.transpose();
    for (std::size_t k = 0; k < penalties.size(); ++k) {
        if (e.deltas[k].size() == 0 || penalties[k].weight == 0.0) continue;
        b += 2.0 * penalties[k].weight * (e.deltas[k] * e.deltas[k].transpose());
    }
    return b;
}

Matrix entry_c(const HistoryEntry& e) { return (e.d - e.a) * e.q.transpose(); }

// Solves S x = rhs for a small symmetric positive definite S.
class SpdSolver {
public:
    explicit SpdSolver(Matrix s) {
        llt_.compute(s);
        if (llt_.info() != Eigen::Success) {
            const double jitter =
                1e-10 * std::max(std::abs(s.trace()) / static_cast<double>(s.rows()), 1.0);
            s.diagonal().array() += jitter;
            llt_.compute(s);
            if (llt_.info() != Eigen::Success) {
                throw std::runtime_error("online: projection system is not positive definite");
            }
        }
    }
    [[nodiscard]] Vector solve(const Vector& rhs) const { return llt_.solve(rhs); }

private:
    Eigen::LLT<Matrix> llt_;
};

json matrix_to_json(const Matrix& m) {
    std::vector<double> data(m.data(), m.data() + m.size());
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Matrix matrix_from_json(const json& j) {
    const Index rows = j.at("rows").get<Index>();
    const Index cols = j.at("cols").get<Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Index>(data.size()) != rows * cols) {
        throw IoError("checkpoint: matrix payload has the wrong size");
    }
    return Eigen::Map<const Matrix>(data.data(), rows, cols);
}

json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from_json(const json& j) {
    const auto data = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(data.data(), static_cast<Index>(data.size()));
}

json config_to_json(const OnlineConfig& c) {
    json pen = json::array();
    for (const auto& p : c.penalties) pen.push_back({{"lag", p.lag}, {"weight", p.weight}});
    const auto& b = c.burnin_solver;
    return json{
        {"lambda1", c.lambda1},
        {"lambda2", c.lambda2},
        {"penalties", pen},
        {"rank", c.rank},
        {"burnin", c.burnin},
        {"window", c.window ? json(*c.window) : json(nullptr)},
        {"projection_tol", c.projection_tol},
        {"projection_max_iter", c.projection_max_iter},
        {"basis_sweeps", c.basis_sweeps},
        {"burnin_solver",
         {{"mu0", b.mu0},
          {"mu_max", b.mu_max},
          {"rho", b.rho},
          {"tol", b.tol},
          {"max_iter", b.max_iter},
          {"init", b.init == FactorInit::ones ? "ones" : "spectral"}}},
    };
}

OnlineConfig config_from_json(const json& j) {
    OnlineConfig c;
    c.lambda1 = j.at("lambda1").get<double>();
    c.lambda2 = j.at("lambda2").get<double>();
    for (const auto& p : j.at("penalties")) {
        c.penalties.push_back({p.at("lag").get<Index>(), p.at("weight").get<double>()});
    }
    c.rank = j.at("rank").get<Index>();
    c.burnin = j.at("burnin").get<Index>();
    if (!j.at("window").is_null()) c.window = j.at("window").get<Index>();
    c.projection_tol = j.at("projection_tol").get<double>();
    c.projection_max_iter = j.at("projection_max_iter").get<int>();
    c.basis_sweeps = j.at("basis_sweeps").get<int>();
    const auto& b = j.at("burnin_solver");
    c.burnin_solver.mu0 = b.at("mu0").get<double>();
    c.burnin_solver.mu_max = b.at("mu_max").get<double>();
    c.burnin_solver.rho = b.at("rho").get<double>();
    c.burnin_solver.tol = b.at("tol").get<double>();
    c.burnin_solver.max_iter = b.at("max_iter").get<std::int64_t>();
    c.burnin_solver.init =
        b.at("init").get<std::string>() == "ones" ? FactorInit::ones : FactorInit::spectral;
    return c;
}

void push_entry(OnlineState& state, HistoryEntry entry) {
    const auto& cfg = state.config;
    state.B += entry_b(entry, cfg.penalties);
    state.C += entry_c(entry);
    state.history.push_back(std::move(entry));
    ++state.accumulated;
    if (cfg.window && state.accumulated > *cfg.window) {
        const auto& departing =
            state.history[state.history.size() - 1 - static_cast<std::size_t>(*cfg.window)];
        state.B -= entry_b(departing, cfg.penalties);
        state.C -= entry_c(departing);
        state.accumulated = *cfg.window;
    }
    const auto cap = static_cast<std::size_t>(cfg.history_capacity());
    while (state.history.size() > cap) state.history.pop_front();
}

}  // namespace

void OnlineConfig::validate(Index m) const {
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) {
        throw ConfigError("online: lambda1 and lambda2 must be non-negative");
    }
    if (rank < 1 || rank > m) throw ConfigError("online: rank must lie in [1, m]");
    if (burnin < 1) throw ConfigError("online: burnin must be positive");
    if (!penalties.empty() && burnin <= max_lag(penalties)) {
        throw ConfigError("online: burnin must exceed the largest penalty lag");
    }
    if (window && *window < 1) throw ConfigError("online: window must be positive");
    if (!(projection_tol > 0.0) || projection_max_iter < 1) {
        throw ConfigError("online: invalid projection tolerance or iteration cap");
    }
    if (basis_sweeps < 1) throw ConfigError("online: basis_sweeps must be positive");
    for (const auto& p : penalties) {
        if (p.lag < 1 || !(p.weight >= 0.0)) throw ConfigError("online: invalid penalty");
    }
}

Index OnlineConfig::history_capacity() const {
    return std::max<Index>({window.value_or(0), max_lag(penalties), 1});
}

BatchConfig OnlineConfig::burnin_batch_config() const {
    BatchConfig b = burnin_solver;
    b.lambda1 = lambda1;
    b.lambda2 = lambda2;
    b.penalties = penalties;
    b.rank = rank;
    return b;
}

OnlineState init_from_burnin(const ObservationMatrix& burnin, const OnlineConfig& config,
                             std::vector<SampleResult>* burnin_samples) {
    const Index m = burnin.rows();
    const Index nb = burnin.cols();
    config.validate(m);
    if (nb < config.burnin) {
        throw std::invalid_argument("init_from_burnin: burn-in block narrower than configured");
    }
    if (config.rank > std::min(m, nb)) {
        throw std::invalid_argument("init_from_burnin: rank exceeds burn-in dimensions");
    }
    const Decomposition batch = solve_temporal_batch(burnin, config.burnin_batch_config());

    Eigen::BDCSVD<Matrix> svd(batch.X, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Index r = config.rank;
    const Vector s = svd.singularValues();
    if (!(s(0) > 0.0)) {
        throw std::invalid_argument("init_from_burnin: burn-in estimate is identically zero");
    }
    const Vector root = s.head(r).cwiseSqrt();

    OnlineState state;
    state.config = config;
    state.L = svd.matrixU().leftCols(r) * root.asDiagonal();
    const Matrix coeffs = root.asDiagonal() * svd.matrixV().leftCols(r).transpose();  // r x nb
    state.B = Matrix::Zero(r, r);
    state.C = Matrix::Zero(m, r);

    std::vector<HistoryEntry> entries;
    entries.reserve(static_cast<std::size_t>(nb));
    for (Index i = 0; i < nb; ++i) {
        HistoryEntry e;
        e.q = coeffs.col(i);
        e.a = batch.A.col(i);
        const Vector x = state.L * e.q;
        e.d = burnin.mask.col(i).select(burnin.data.col(i), x);
        for (const auto& p : config.penalties) {
            if (i - p.lag >= 0) {
                e.deltas.push_back(e.q - coeffs.col(i - p.lag));
            } else {
                e.deltas.emplace_back();
            }
        }
        if (burnin_samples) {
            SampleResult res;
            res.q = e.q;
            res.a = e.a;
            res.x = x;
            res.d = burnin.data.col(i);
            res.mask = burnin.mask.col(i);
            res.iterations = 0;
            res.converged = batch.converged;
            burnin_samples->push_back(std::move(res));
        }
        entries.push_back(std::move(e));
    }

    const Index counted = config.window ? std::min(*config.window, nb) : nb;
    for (Index i = nb - counted; i < nb; ++i) {
        const auto& e = entries[static_cast<std::size_t>(i)];
        state.B += entry_b(e, config.penalties);
        state.C += entry_c(e);
    }
    state.accumulated = counted;
    const Index keep = std::min(config.history_capacity(), nb);
    for (Index i = nb - keep; i < nb; ++i) {
        state.history.push_back(std::move(entries[static_cast<std::size_t>(i)]));
    }
    state.t = 0;
    return state;
}

const Vector& lagged_coefficients(const OnlineState& state, Index lag) {
    if (lag < 1 || static_cast<std::size_t>(lag) > state.history.size()) {
        throw std::out_of_range("online: history does not reach the requested lag");
    }
    return state.history[state.history.size() - static_cast<std::size_t>(lag)].q;
}

SampleResult project_sample(const OnlineState& state, const Vector& d, const BoolVector& mask) {
    const Index m = state.rows();
    const Index r = state.rank();
    if (d.size() != m || mask.size() != m) {
        throw std::invalid_argument("project_sample: column length does not match the basis");
    }
    const auto& cfg = state.config;

    std::vector<Index> obs;
    obs.reserve(static_cast<std::size_t>(m));
    for (Index i = 0; i < m; ++i) {
        if (mask(i)) obs.push_back(i);
    }
    const auto n_obs = static_cast<Index>(obs.size());
    Matrix l_obs(n_obs, r);
    Vector d_obs(n_obs);
    for (Index k = 0; k < n_obs; ++k) {
        l_obs.row(k) = state.L.row(obs[static_cast<std::size_t>(k)]);
        d_obs(k) = d(obs[static_cast<std::size_t>(k)]);
    }

    const Matrix ltl = state.L.transpose() * state.L;
    Vector lagged = Vector::Zero(r);
    for (const auto& p : cfg.penalties) {
        lagged += p.weight * lagged_coefficients(state, p.lag);
    }
    const Vector pen_rhs = 2.0 * ltl * lagged;
    const SpdSolver system(l_obs.transpose() * l_obs +
                           cfg.lambda1 * Matrix::Identity(r, r) +
                           2.0 * total_weight(cfg.penalties) * ltl);

    SampleResult out;
    out.d = d;
    out.mask = mask;
    out.a = Vector::Zero(m);

    const double d_norm = d_obs.norm();
    if (d_norm == 0.0) {
        out.q = system.solve(pen_rhs);
        out.x = state.L * out.q;
        out.iterations = 0;
        out.converged = true;
        return out;
    }

    Vector q = Vector::Zero(r);
    Vector a_obs = Vector::Zero(n_obs);
    out.converged = false;
    int it = 0;
    while (it < cfg.projection_max_iter) {
        Vector q_next = system.solve(l_obs.transpose() * (d_obs - a_obs) + pen_rhs);
        Vector a_next = soft_threshold(Vector(d_obs - l_obs * q_next), cfg.lambda2);
        const double change =
            std::max((q_next - q).norm(), (a_next - a_obs).norm()) / d_norm;
        q = std::move(q_next);
        a_obs = std::move(a_next);
        ++it;
        if (change < cfg.projection_tol) {
            out.converged = true;
            break;
        }
    }
    for (Index k = 0; k < n_obs; ++k) out.a(obs[static_cast<std::size_t>(k)]) = a_obs(k);
    out.q = q;
    out.x = state.L * q;
    out.iterations = it;
    return out;
}

SampleResult step(OnlineState& state, const Vector& d, const BoolVector& mask) {
    SampleResult res = project_sample(state, d, mask);

    HistoryEntry e;
    e.q = res.q;
    e.a = res.a;
    e.d = mask.select(d, res.x);
    for (const auto& p : state.config.penalties) {
        e.deltas.push_back(res.q - lagged_coefficients(state, p.lag));
    }
    push_entry(state, std::move(e));
    update_basis(state);
    ++state.t;
    return res;
}

void basis_sweep(Matrix& l, const Matrix& b, const Matrix& c, double lambda1) {
    const Index r = l.cols();
    for (Index j = 0; j < r; ++j) {
        const double bjj = b(j, j) + lambda1;
        if (!(bjj > 0.0)) continue;
        Vector bt = b.col(j);
        bt(j) += lambda1;
        l.col(j) += (c.col(j) - l * bt) / bjj;
    }
}

double basis_objective(const Matrix& l, const Matrix& b, const Matrix& c, double lambda1) {
    const Matrix bt = b + lambda1 * Matrix::Identity(b.rows(), b.cols());
    return 0.5 * (l * bt * l.transpose()).trace() - (l.transpose() * c).trace();
}

void update_basis(OnlineState& state) {
    for (int s = 0; s < state.config.basis_sweeps; ++s) {
        basis_sweep(state.L, state.B, state.C, state.config.lambda1);
    }
}

double sample_objective(const OnlineState& state, const Vector& d, const BoolVector& mask,
                        const Vector& q, const Vector& a) {
    const auto& cfg = state.config;
    const Vector x = state.L * q;
    double fit = 0.0;
    for (Index i = 0; i < d.size(); ++i) {
        if (mask(i)) {
            const double v = d(i) - x(i) - a(i);
            fit += v * v;
        }
    }
    double temporal = 0.0;
    for (const auto& p : cfg.penalties) {
        temporal += p.weight * (state.L * (q - lagged_coefficients(state, p.lag))).squaredNorm();
    }
    return 0.5 * fit + 0.5 * cfg.lambda1 * q.squaredNorm() + cfg.lambda2 * a.lpNorm<1>() +
           temporal;
}

Accumulators recompute_accumulators(const OnlineState& state) {
    const auto& cfg = state.config;
    Accumulators acc{Matrix::Zero(state.rank(), state.rank()),
                     Matrix::Zero(state.rows(), state.rank())};
    const auto count = static_cast<std::size_t>(state.accumulated);
    if (count > state.history.size()) {
        throw std::invalid_argument(
            "recompute_accumulators: the history does not hold every accumulated sample");
    }
    for (std::size_t i = state.history.size() - count; i < state.history.size(); ++i) {
        acc.B += entry_b(state.history[i], cfg.penalties);
        acc.C += entry_c(state.history[i]);
    }
    return acc;
}

Decomposition finalize(const OnlineState& state, const std::vector<SampleResult>& results) {
    if (results.empty()) throw std::invalid_argument("finalize: no processed samples");
    const Index m = state.rows();
    const auto n = static_cast<Index>(results.size());
    Matrix q(state.rank(), n);
    Decomposition out;
    out.A = Matrix::Zero(m, n);
    out.E = Matrix::Zero(m, n);
    out.converged = true;
    for (Index j = 0; j < n; ++j) {
        const auto& r = results[static_cast<std::size_t>(j)];
        q.col(j) = r.q;
        out.A.col(j) = r.a;
        out.iterations += r.iterations;
        out.converged = out.converged && r.converged;
    }
    out.X = state.L * q;
    for (Index j = 0; j < n; ++j) {
        const auto& r = results[static_cast<std::size_t>(j)];
        for (Index i = 0; i < m; ++i) {
            if (r.mask(i)) out.E(i, j) = r.d(i) - out.X(i, j) - out.A(i, j);
        }
    }
    out.rank_bound = state.rank();
    return out;
}

Decomposition solve_online(const ObservationMatrix& d, const OnlineConfig& config) {
    if (d.cols() < config.burnin) {
        throw std::invalid_argument("solve_online: fewer columns than the burn-in length");
    }
    std::vector<SampleResult> samples;
    OnlineState state = init_from_burnin(d.columns(0, config.burnin), config, &samples);
    for (Index j = config.burnin; j < d.cols(); ++j) {
        samples.push_back(step(state, d.data.col(j), d.mask.col(j)));
    }
    return finalize(state, samples);
}

std::string config_hash(const OnlineConfig& config) {
    const std::string text = config_to_json(config).dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string save_checkpoint(const OnlineState& state) {
    json history = json::array();
    for (const auto& e : state.history) {
        json deltas = json::array();
        for (const auto& d : e.deltas) deltas.push_back(vector_to_json(d));
        history.push_back({{"q", vector_to_json(e.q)},
                           {"a", vector_to_json(e.a)},
                           {"d", vector_to_json(e.d)},
                           {"deltas", deltas}});
    }
    json j{
        {"format", "trpca-online-checkpoint"},
        {"version", 1},
        {"config", config_to_json(state.config)},
        {"config_hash", config_hash(state.config)},
        {"t", state.t},
        {"accumulated", state.accumulated},
        {"L", matrix_to_json(state.L)},
        {"B", matrix_to_json(state.B)},
        {"C", matrix_to_json(state.C)},
        {"history", history},
    };
    return j.dump(1) + "\n";
}

OnlineState load_checkpoint(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw IoError(std::string("checkpoint: ") + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != "trpca-online-checkpoint" ||
            j.at("version").get<int>() != 1) {
            throw IoError("checkpoint: unsupported format");
        }
        OnlineState state;
        state.config = config_from_json(j.at("config"));
        if (config_hash(state.config) != j.at("config_hash").get<std::string>()) {
            throw IoError("checkpoint: configuration hash mismatch");
        }
        state.t = j.at("t").get<std::int64_t>();
        state.accumulated = j.at("accumulated").get<Index>();
        state.L = matrix_from_json(j.at("L"));
        state.B = matrix_from_json(j.at("B"));
        state.C = matrix_from_json(j.at("C"));
        for (const auto& h : j.at("history")) {
            HistoryEntry e;
            e.q = vector_from_json(h.at("q"));
            e.a = vector_from_json(h.at("a"));
            e.d = vector_from_json(h.at("d"));
            for (const auto& d : h.at("deltas")) e.deltas.push_back(vector_from_json(d));
            state.history.push_back(std::move(e));
        }
        return state;
    } catch (const json::exception& e) {
        throw IoError(std::string("checkpoint: ") + e.what());
    }
}

}  // namespace trpca
