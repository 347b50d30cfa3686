#include "test_support.hpp"

#include "trpca/online.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace trpca;
using namespace trpca::testing;

namespace {

OnlineConfig small_config() {
    OnlineConfig cfg;
    cfg.lambda1 = 0.2;
    cfg.lambda2 = 0.3;
    cfg.rank = 3;
    cfg.burnin = 12;
    cfg.penalties = {{1, 0.4}, {3, 0.2}};
    return cfg;
}

struct Run {
    OnlineState state;
    std::vector<SampleResult> samples;
};

Run run_stream(const ObservationMatrix& d, const OnlineConfig& cfg, Index columns) {
    Run run;
    run.state = init_from_burnin(d.columns(0, cfg.burnin), cfg, &run.samples);
    for (Index j = cfg.burnin; j < columns; ++j) {
        run.samples.push_back(step(run.state, d.data.col(j), d.mask.col(j)));
    }
    return run;
}

/// B and C summed directly from the sample sequence, independently of the history buffer.
Accumulators oracle_accumulators(const std::vector<SampleResult>& samples,
                                 const OnlineConfig& cfg) {
    const auto n = static_cast<Index>(samples.size());
    const Index r = samples.front().q.size();
    const Index m = samples.front().d.size();
    Accumulators acc{Matrix::Zero(r, r), Matrix::Zero(m, r)};
    const Index first = cfg.window ? std::max<Index>(0, n - *cfg.window) : 0;
    for (Index t = first; t < n; ++t) {
        const auto& s = samples[static_cast<std::size_t>(t)];
        acc.B += s.q * s.q.transpose();
        for (const auto& p : cfg.penalties) {
            if (t - p.lag < 0) continue;
            const Vector delta = s.q - samples[static_cast<std::size_t>(t - p.lag)].q;
            acc.B += 2.0 * p.weight * delta * delta.transpose();
        }
        Vector filled = s.d;
        for (Index i = 0; i < m; ++i) {
            if (!s.mask(i)) filled(i) = s.x(i);
        }
        acc.C += (filled - s.a) * s.q.transpose();
    }
    return acc;
}

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("projection satisfies the optimality conditions of the per-sample problem") {
    const ObservationMatrix d = synthetic_observations(1, 15, 40, 3, 0.1, 0.1, 0.05);
    const OnlineConfig cfg = small_config();
    Run run = run_stream(d, cfg, 30);
    const Vector col = d.data.col(30);
    const BoolVector mask = d.mask.col(30);
    const SampleResult res = project_sample(run.state, col, mask);
    REQUIRE(res.converged);

    const Matrix& l = run.state.L;
    Vector resid = Vector::Zero(col.size());
    for (Index i = 0; i < col.size(); ++i) {
        if (mask(i)) {
            resid(i) = col(i) - l.row(i).dot(res.q) - res.a(i);
        } else {
            CHECK(res.a(i) == 0.0);
        }
    }
    Vector grad = -l.transpose() * resid + cfg.lambda1 * res.q;
    for (const auto& p : cfg.penalties) {
        const Vector& past = run.samples[run.samples.size() - static_cast<std::size_t>(p.lag)].q;
        grad += 2.0 * p.weight * l.transpose() * l * (res.q - past);
    }
    CHECK(grad.norm() < 1e-6 * (1.0 + col.norm()));

    for (Index i = 0; i < col.size(); ++i) {
        if (!mask(i)) continue;
        const double v = col(i) - l.row(i).dot(res.q);
        const double expected = v > cfg.lambda2 ? v - cfg.lambda2
                                : v < -cfg.lambda2 ? v + cfg.lambda2
                                                   : 0.0;
        CHECK(std::abs(res.a(i) - expected) < 1e-6);
    }
}

TEST_CASE("projection is not improved by perturbing its output") {
    const ObservationMatrix d = synthetic_observations(2, 12, 30, 2, 0.0, 0.1, 0.05);
    OnlineConfig cfg = small_config();
    cfg.rank = 2;
    Run run = run_stream(d, cfg, 20);
    const Vector col = d.data.col(20);
    const BoolVector mask = d.mask.col(20);
    const SampleResult res = project_sample(run.state, col, mask);
    const double best = sample_objective(run.state, col, mask, res.q, res.a);
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const Vector dq = 1e-3 * random_vector(rng, res.q.size());
        const Vector da = 1e-3 * random_vector(rng, res.a.size());
        CHECK(sample_objective(run.state, col, mask, res.q + dq, res.a + da) >= best - 1e-12);
    }
}

TEST_CASE("a fully missing column is explained by the temporal penalties alone") {
    const ObservationMatrix d = synthetic_observations(3, 10, 20, 2);
    OnlineConfig cfg = small_config();
    cfg.rank = 2;
    Run run = run_stream(d, cfg, 16);
    const BoolVector none = BoolVector::Constant(10, false);
    const SampleResult res = project_sample(run.state, d.data.col(16), none);
    CHECK(res.a.isZero());

    const Matrix& l = run.state.L;
    const Matrix ltl = l.transpose() * l;
    Matrix lhs = cfg.lambda1 * Matrix::Identity(2, 2);
    Vector rhs = Vector::Zero(2);
    for (const auto& p : cfg.penalties) {
        lhs += 2.0 * p.weight * ltl;
        rhs += 2.0 * p.weight * ltl *
               run.samples[run.samples.size() - static_cast<std::size_t>(p.lag)].q;
    }
    const Vector expected = lhs.fullPivLu().solve(rhs);
    CHECK((res.q - expected).norm() < 1e-10);

    cfg.penalties.clear();
    Run plain = run_stream(d, cfg, 16);
    CHECK(project_sample(plain.state, d.data.col(16), none).q.isZero());
}

TEST_CASE("repeated basis sweeps converge monotonically to the closed-form minimizer") {
    Rng rng(4);
    for (int instance = 0; instance < 10; ++instance) {
        const Index m = 9;
        const Index r = 3;
        const Matrix g = random_matrix(rng, r, 2 * r);
        const Matrix b = g * g.transpose();
        const Matrix c = random_matrix(rng, m, r);
        const double lambda1 = 0.3;
        Matrix l = random_matrix(rng, m, r);
        double previous = basis_objective(l, b, c, lambda1);
        for (int sweep = 0; sweep < 300; ++sweep) {
            basis_sweep(l, b, c, lambda1);
            const double value = basis_objective(l, b, c, lambda1);
            CHECK(value <= previous + 1e-12 * (1.0 + std::abs(previous)));
            previous = value;
        }
        const Matrix bt = b + lambda1 * Matrix::Identity(r, r);
        const Matrix direct = bt.transpose().fullPivLu().solve(c.transpose()).transpose();
        CHECK(max_abs(l - direct) < 1e-8);
    }
}

TEST_CASE("accumulators match sums over the processed samples") {
    const ObservationMatrix d = synthetic_observations(6, 12, 80, 3, 0.1);
    for (const std::optional<Index> window : {std::optional<Index>{}, std::optional<Index>{25}}) {
        OnlineConfig cfg = small_config();
        cfg.window = window;
        Run run = run_stream(d, cfg, 80);
        const Accumulators oracle = oracle_accumulators(run.samples, cfg);
        const double scale_b = 1.0 + max_abs(oracle.B);
        const double scale_c = 1.0 + max_abs(oracle.C);
        CHECK(max_abs(run.state.B - oracle.B) / scale_b < 1e-8);
        CHECK(max_abs(run.state.C - oracle.C) / scale_c < 1e-8);
        if (!window) {
            CHECK_THROWS_AS((void)recompute_accumulators(run.state), std::invalid_argument);
            continue;
        }
        const Accumulators rebuilt = recompute_accumulators(run.state);
        CHECK(max_abs(run.state.B - rebuilt.B) / scale_b < 1e-8);
        CHECK(max_abs(run.state.C - rebuilt.C) / scale_c < 1e-8);
    }
}

TEST_CASE("a window longer than the stream reproduces the unbounded run bit for bit") {
    const ObservationMatrix d = synthetic_observations(7, 10, 60, 2);
    OnlineConfig cfg = small_config();
    cfg.rank = 2;
    const Run full = run_stream(d, cfg, 60);
    cfg.window = 60;
    const Run windowed = run_stream(d, cfg, 60);
    CHECK(full.state.L == windowed.state.L);
    CHECK(full.state.B == windowed.state.B);
    for (std::size_t i = 0; i < full.samples.size(); ++i) {
        CHECK(full.samples[i].q == windowed.samples[i].q);
        CHECK(full.samples[i].a == windowed.samples[i].a);
    }
}

TEST_CASE("a short window forgets old samples") {
    const ObservationMatrix d = synthetic_observations(8, 10, 60, 2);
    OnlineConfig cfg = small_config();
    cfg.rank = 2;
    const Run full = run_stream(d, cfg, 60);
    cfg.window = 5;
    const Run windowed = run_stream(d, cfg, 60);
    CHECK(windowed.state.accumulated == 5);
    CHECK(windowed.state.history.size() == 5);
    CHECK(max_abs(full.state.L - windowed.state.L) > 1e-6);
}

TEST_CASE("lagged coefficients index the history from the newest entry") {
    const ObservationMatrix d = synthetic_observations(9, 10, 30, 2);
    OnlineConfig cfg = small_config();
    cfg.rank = 2;
    const Run run = run_stream(d, cfg, 25);
    CHECK(lagged_coefficients(run.state, 1) == run.samples.back().q);
    CHECK(lagged_coefficients(run.state, 3) == run.samples[run.samples.size() - 3].q);
    CHECK_THROWS_AS((void)lagged_coefficients(run.state, 0), std::out_of_range);
    CHECK_THROWS_AS((void)lagged_coefficients(run.state, 100), std::out_of_range);
}

TEST_CASE("checkpoint round trip resumes the stream exactly") {
    const ObservationMatrix d = synthetic_observations(10, 10, 50, 2, 0.1);
    OnlineConfig cfg = small_config();
    cfg.rank = 2;
    cfg.window = 15;
    Run run = run_stream(d, cfg, 30);
    OnlineState restored = load_checkpoint(save_checkpoint(run.state));
    CHECK(restored.L == run.state.L);
    CHECK(restored.B == run.state.B);
    CHECK(restored.C == run.state.C);
    CHECK(restored.t == run.state.t);
    CHECK(config_hash(restored.config) == config_hash(run.state.config));
    for (Index j = 30; j < 50; ++j) {
        const SampleResult a = step(run.state, d.data.col(j), d.mask.col(j));
        const SampleResult b = step(restored, d.data.col(j), d.mask.col(j));
        CHECK(a.q == b.q);
        CHECK(a.a == b.a);
    }
    CHECK(restored.L == run.state.L);
}

TEST_CASE("corrupt checkpoints are rejected") {
    const ObservationMatrix d = synthetic_observations(11, 8, 20, 2);
    OnlineConfig cfg = small_config();
    cfg.rank = 2;
    const Run run = run_stream(d, cfg, 14);
    std::string text = save_checkpoint(run.state);
    CHECK_THROWS_AS((void)load_checkpoint("not json"), IoError);
    CHECK_THROWS_AS((void)load_checkpoint("{}"), IoError);
    const auto pos = text.find("\"lambda1\": ");
    REQUIRE(pos != std::string::npos);
    text.insert(pos + 11, "1");
    CHECK_THROWS_AS((void)load_checkpoint(text), IoError);
}

TEST_CASE("solve_online covers every column and tracks a clean low-rank stream") {
    Rng rng(12);
    const Matrix clean = random_low_rank(rng, 12, 120, 2);
    OnlineConfig cfg;
    cfg.lambda1 = 0.01;
    cfg.lambda2 = 1.0;
    cfg.rank = 2;
    cfg.burnin = 20;
    const Decomposition dec = solve_online(ObservationMatrix(clean), cfg);
    REQUIRE(dec.X.cols() == 120);
    CHECK(relative_error(dec.X, clean) < 0.05);
    CHECK(dec.rank_bound == 2);
}

TEST_CASE("online configuration validation") {
    OnlineConfig cfg = small_config();
    CHECK_NOTHROW(cfg.validate(10));
    cfg.rank = 11;
    CHECK_THROWS_AS(cfg.validate(10), ConfigError);
    cfg.rank = 3;
    cfg.burnin = 3;
    CHECK_THROWS_AS(cfg.validate(10), ConfigError);
    cfg.burnin = 4;
    CHECK_NOTHROW(cfg.validate(10));
    cfg.window = 0;
    CHECK_THROWS_AS(cfg.validate(10), ConfigError);
    cfg.window = 4;
    CHECK(cfg.history_capacity() == 4);
    cfg.window = 2;
    CHECK(cfg.history_capacity() == 3);
}
