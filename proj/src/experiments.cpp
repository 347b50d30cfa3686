#include "trpca/experiments.hpp"

#include "trpca/core.hpp"
#include "trpca/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace trpca {

namespace {

// ceil() that ignores representation noise such as 0.07 * 100 = 7.000000000000001.
Index count_for_fraction(double fraction, Index total) {
    return static_cast<Index>(std::ceil(fraction * static_cast<double>(total) - 1e-9));
}

MetricSummary summarize(const std::vector<double>& v) {
    MetricSummary s;
    if (v.empty()) return s;
    for (double x : v) s.mean += x;
    s.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - s.mean) * (x - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return s;
}

}  // namespace

void SineMixtureSpec::validate() const {
    if (n_points < 1 || !(n_cycles > 0.0) || fold_rows < 1) {
        throw ConfigError("sine mixture: sizes must be positive");
    }
    if (frequencies.empty() || frequencies.size() != amplitudes.size()) {
        throw ConfigError("sine mixture: need one amplitude per frequency");
    }
    for (std::size_t j = 0; j < frequencies.size(); ++j) {
        if (!(frequencies[j] > 0.0) || !(amplitudes[j] > 0.0)) {
            throw ConfigError("sine mixture: frequencies and amplitudes must be positive");
        }
    }
    if (n_points % fold_rows != 0) {
        throw ConfigError("sine mixture: n_points must be divisible by fold_rows");
    }
}

SineMixture generate_sine_mixture(const SineMixtureSpec& spec) {
    spec.validate();
    std::vector<double> y(static_cast<std::size_t>(spec.n_points), 0.0);
    const double span = 2.0 * std::numbers::pi * spec.n_cycles;
    for (Index i = 0; i < spec.n_points; ++i) {
        const double x = span * static_cast<double>(i) / static_cast<double>(spec.n_points);
        double v = 0.0;
        for (std::size_t j = 0; j < spec.frequencies.size(); ++j) {
            v += spec.amplitudes[j] * std::sin(spec.frequencies[j] * x);
        }
        y[static_cast<std::size_t>(i)] = v;
    }
    SineMixture out;
    out.signal = SignalSeries::from_values(y);
    out.matrix = reshape_to_matrix(out.signal, spec.fold_rows);
    return out;
}

void CorruptionSpec::validate() const {
    if (!(missing_fraction >= 0.0 && missing_fraction < 1.0) ||
        !(anomaly_fraction >= 0.0 && anomaly_fraction < 1.0)) {
        throw ConfigError("corruption: fractions must lie in [0, 1)");
    }
    if (!(missing_fraction + anomaly_fraction < 1.0)) {
        throw ConfigError("corruption: missing + anomaly fractions must stay below 1");
    }
    if (!(anomaly_scale > 0.0)) throw ConfigError("corruption: anomaly_scale must be positive");
    if (noise_sigma && !(*noise_sigma >= 0.0)) {
        throw ConfigError("corruption: noise sigma must be non-negative");
    }
}

CorruptedData corrupt(const ObservationMatrix& clean, const CorruptionSpec& spec) {
    spec.validate();
    const Index m = clean.rows();
    const Index n = clean.cols();
    std::vector<Index> cells;
    for (Index k = 0; k < m * n; ++k) {
        if (clean.mask(k % m, k / m)) cells.push_back(k);
    }
    const auto total = static_cast<Index>(cells.size());
    const Index n_missing = count_for_fraction(spec.missing_fraction, total);
    const Index n_anomalies = count_for_fraction(spec.anomaly_fraction, total);
    if (n_missing + n_anomalies > total) {
        throw ConfigError("corruption: fractions too large for the matrix");
    }

    Rng rng(spec.seed);
    rng.shuffle(cells);

    const Matrix base = clean.zero_filled();
    double max_abs = 0.0;
    double mean = 0.0;
    for (Index k : cells) mean += base(k % m, k / m);
    mean /= std::max<double>(1.0, static_cast<double>(total));
    double var = 0.0;
    for (Index k : cells) {
        const double v = base(k % m, k / m);
        max_abs = std::max(max_abs, std::abs(v));
        var += (v - mean) * (v - mean);
    }
    const double clean_std = std::sqrt(var / std::max<double>(1.0, static_cast<double>(total)));
    const double sigma = spec.noise_sigma.value_or(0.1 * clean_std);

    CorruptedData out;
    out.clean = base;
    out.truth = BoolMatrix::Constant(m, n, false);
    Matrix data = base;
    BoolMatrix mask = clean.mask;
    for (Index c = 0; c < n_missing; ++c) {
        const Index k = cells[static_cast<std::size_t>(c)];
        mask(k % m, k / m) = false;
        data(k % m, k / m) = 0.0;
    }
    for (Index c = n_missing; c < n_missing + n_anomalies; ++c) {
        const Index k = cells[static_cast<std::size_t>(c)];
        const double magnitude = rng.uniform(0.0, spec.anomaly_scale * max_abs);
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        data(k % m, k / m) += sign * magnitude;
        out.truth(k % m, k / m) = true;
    }
    if (sigma > 0.0) {
        // Column-major sweep keeps the noise stream independent of the shuffle.
        for (Index j = 0; j < n; ++j) {
            for (Index i = 0; i < m; ++i) {
                const double z = rng.normal();
                if (mask(i, j)) data(i, j) += sigma * z;
            }
        }
    }
    out.observed = ObservationMatrix(std::move(data), std::move(mask));
    return out;
}

EvalReport detection_report(const BoolMatrix& predicted, const BoolMatrix& truth) {
    if (predicted.rows() != truth.rows() || predicted.cols() != truth.cols()) {
        throw std::invalid_argument("detection_report: shape mismatch");
    }
    EvalReport r;
    for (Index j = 0; j < truth.cols(); ++j) {
        for (Index i = 0; i < truth.rows(); ++i) {
            const bool p = predicted(i, j);
            const bool t = truth(i, j);
            if (p && t) ++r.true_positives;
            else if (p) ++r.false_positives;
            else if (t) ++r.false_negatives;
            else ++r.true_negatives;
        }
    }
    const Index pred = r.true_positives + r.false_positives;
    const Index actual = r.true_positives + r.false_negatives;
    if (pred == 0 && actual == 0) {
        r.precision = r.recall = r.f1 = 1.0;
        return r;
    }
    r.precision = pred > 0 ? static_cast<double>(r.true_positives) / static_cast<double>(pred) : 0.0;
    r.recall = actual > 0 ? static_cast<double>(r.true_positives) / static_cast<double>(actual) : 0.0;
    r.f1 = r.precision + r.recall > 0.0
               ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
               : 0.0;
    return r;
}

EvalReport evaluate(const Decomposition& dec, const ObservationMatrix& clean,
                    const BoolMatrix& truth, double alpha) {
    if (dec.X.rows() != clean.rows() || dec.X.cols() != clean.cols() ||
        truth.rows() != clean.rows() || truth.cols() != clean.cols()) {
        throw std::invalid_argument("evaluate: shape mismatch");
    }
    const Matrix ref = clean.zero_filled();
    const double denom = ref.squaredNorm();
    if (!(denom > 0.0)) throw std::invalid_argument("evaluate: clean reference has zero norm");
    const double num = project_observed(ref - dec.X, clean.mask).squaredNorm();

    const auto filtered = filter_anomalies(dec.A, dec.X, alpha);
    const BoolMatrix predicted = (filtered.scores.array() > alpha).matrix();
    EvalReport r = detection_report(predicted, truth);
    r.relative_error = num / denom;
    return r;
}

CorruptionSpec corruption_for_level(const CorruptionSpec& base, double level) {
    if (!(level >= 0.0 && level < 1.0)) throw ConfigError("sweep: levels must lie in [0, 1)");
    CorruptionSpec c = base;
    c.missing_fraction = level / 2.0;
    c.anomaly_fraction = level / 2.0;
    return c;
}

std::vector<SolverSpec> default_sweep_solvers() {
    SolverSpec batch;
    batch.name = "batch";
    batch.kind = SolverKind::batch;
    batch.batch.lambda1 = 1.0;
    batch.batch.lambda2 = 0.5;
    batch.batch.penalties = {{20, 1.0}};
    batch.batch.rank = 6;

    SolverSpec online;
    online.name = "online";
    online.kind = SolverKind::online;
    online.online.lambda1 = 1.0;
    online.online.lambda2 = 0.5;
    online.online.penalties = {{20, 1.0}};
    online.online.rank = 6;
    online.online.burnin = 40;
    return {batch, online};
}

SweepTable corruption_sweep(const std::vector<double>& levels, int repeats,
                            const std::vector<SolverSpec>& solvers, const SweepSpec& spec) {
    if (repeats < 1) throw ConfigError("sweep: repeats must be positive");
    const SineMixture clean = generate_sine_mixture(spec.data);
    SweepTable table;
    for (std::size_t li = 0; li < levels.size(); ++li) {
        CorruptionSpec level_spec = corruption_for_level(spec.corruption, levels[li]);
        std::vector<SolverSpec> level_solvers = solvers;
        if (spec.tuning) {
            level_spec.seed = Rng::derive(spec.corruption.seed, li + 1, 0);
            const CorruptedData calibration = corrupt(clean.matrix, level_spec);
            for (std::size_t si = 0; si < solvers.size(); ++si) {
                TunedSetting setting;
                setting.level = levels[li];
                setting.solver = solvers[si].name;
                HyperSearchSpec search = *spec.tuning;
                search.seed = Rng::derive(spec.tuning->seed, li + 1, si + 1);
                try {
                    const TuneResult tuned = tune(calibration.observed, search, solvers[si]);
                    setting.bounds = tuned.bounds;
                    setting.parameters = tuned.best_entry().parameters;
                    setting.objective = tuned.best_entry().result.objective;
                    level_solvers[si] = tuned.best;
                } catch (const std::exception& e) {
                    setting.failed = true;
                    setting.error = e.what();
                }
                table.tuned.push_back(std::move(setting));
            }
        }
        for (int rep = 0; rep < repeats; ++rep) {
            level_spec.seed = Rng::derive(spec.corruption.seed, li + 1, static_cast<std::uint64_t>(rep) + 1);
            const CorruptedData data = corrupt(clean.matrix, level_spec);
            for (const auto& solver : level_solvers) {
                SweepRow row;
                row.level = levels[li];
                row.solver = solver.name;
                row.repeat = rep;
                try {
                    const Decomposition dec = run_solver(solver, data.observed);
                    row.report = evaluate(dec, clean.matrix, data.truth, spec.alpha);
                } catch (const std::exception& e) {
                    row.failed = true;
                    row.error = e.what();
                }
                table.rows.push_back(std::move(row));
            }
        }
    }
    for (double level : levels) {
        for (const auto& solver : solvers) {
            std::vector<double> rel, prec, rec, f1;
            for (const auto& row : table.rows) {
                if (row.level != level || row.solver != solver.name || row.failed) continue;
                rel.push_back(row.report.relative_error);
                prec.push_back(row.report.precision);
                rec.push_back(row.report.recall);
                f1.push_back(row.report.f1);
            }
            SweepAggregate agg;
            agg.level = level;
            agg.solver = solver.name;
            agg.count = static_cast<int>(rel.size());
            agg.relative_error = summarize(rel);
            agg.precision = summarize(prec);
            agg.recall = summarize(rec);
            agg.f1 = summarize(f1);
            table.aggregates.push_back(agg);
        }
    }
    return table;
}

Vector first_mode(const Matrix& x, double* gap) {
    Eigen::BDCSVD<Matrix> svd(x, Eigen::ComputeThinU);
    const Vector s = svd.singularValues();
    if (gap) {
        *gap = s.size() > 1 && s(0) > 0.0 ? (s(0) - s(1)) / s(0) : 1.0;
    }
    return svd.matrixU().col(0);
}

double sign_aligned_distance(const Vector& u, const Vector& v) {
    return std::min((u - v).norm(), (u + v).norm());
}

std::vector<ModeDifference> first_mode_difference(const ObservationMatrix& d,
                                                  const CorruptionSpec& corruption,
                                                  const std::vector<SolverSpec>& solvers) {
    const CorruptedData corrupted = corrupt(d, corruption);
    std::vector<ModeDifference> out;
    auto compare = [&](const std::string& name, const Matrix& x_clean, const Matrix& x_dirty) {
        ModeDifference md;
        md.solver = name;
        double g1 = 0.0;
        double g2 = 0.0;
        const Vector u = first_mode(x_clean, &g1);
        const Vector v = first_mode(x_dirty, &g2);
        md.difference = sign_aligned_distance(u, v);
        md.gap = std::min(g1, g2);
        md.degenerate = md.gap < 1e-8;
        out.push_back(std::move(md));
    };
    compare("pca", d.zero_filled(), corrupted.observed.zero_filled());
    for (const auto& solver : solvers) {
        try {
            const Decomposition a = run_solver(solver, d);
            const Decomposition b = run_solver(solver, corrupted.observed);
            compare(solver.name, a.X, b.X);
        } catch (const std::exception& e) {
            ModeDifference md;
            md.solver = solver.name;
            md.failed = true;
            md.error = e.what();
            out.push_back(std::move(md));
        }
    }
    return out;
}

}  // namespace trpca
