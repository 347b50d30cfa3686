#include "cli_support.hpp"

#include "trpca/batch.hpp"
#include "trpca/core.hpp"
#include "trpca/experiments.hpp"
#include "trpca/hyperopt.hpp"
#include "trpca/io.hpp"
#include "trpca/online.hpp"
#include "trpca/solver.hpp"
#include "trpca/timeseries.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace trpca::cli {
namespace {

struct DecomposeOptions {
    std::string input;
    std::string mask;
    Index period = 0;
    std::string output_dir = ".";
    double alpha = 2.0;
    std::uint64_t seed = 0;
    SolverOptions solver;
};

struct StreamOptions {
    std::string input;
    std::string output;
    std::string checkpoint;
    Index checkpoint_every = 0;
    bool resume = false;
    std::string on_error = "abort";
    std::int64_t limit = -1;
    std::uint64_t seed = 0;
    SolverOptions solver;
};

struct TuneOptions {
    std::string input;
    std::string mask;
    Index period = 0;
    std::string output_dir = ".";
    int subsets = HyperSearchSpec{}.subsets;
    double mask_fraction = HyperSearchSpec{}.mask_fraction;
    int budget = HyperSearchSpec{}.budget;
    std::string bounds;
    std::string method = "gp";
    int workers = 1;
    std::uint64_t seed = 0;
    SolverOptions solver;
};

struct DataOptions {
    Index points = SineMixtureSpec{}.n_points;
    double cycles = SineMixtureSpec{}.n_cycles;
    std::string frequencies = "1,3,0.5";
    std::string amplitudes = "1,1,2";
    Index rows = SineMixtureSpec{}.fold_rows;
    double anomaly_scale = CorruptionSpec{}.anomaly_scale;
    double noise_sigma = -1.0;

    void add_to(CLI::App& app) {
        app.add_option("--points", points, "Samples in the generated series")->capture_default_str();
        app.add_option("--cycles", cycles, "Cycles N' spanned by the series")->capture_default_str();
        app.add_option("--frequencies", frequencies, "Sine frequencies")->capture_default_str();
        app.add_option("--amplitudes", amplitudes, "Sine amplitudes")->capture_default_str();
        app.add_option("--rows", rows, "Rows of the folded matrix")->capture_default_str();
        app.add_option("--anomaly-scale", anomaly_scale,
                       "Anomaly magnitude bound as a multiple of max|clean|")
            ->capture_default_str();
        app.add_option("--noise-sigma", noise_sigma,
                       "Gaussian noise level; negative selects 0.1 * std(clean)")
            ->capture_default_str();
    }

    [[nodiscard]] SineMixtureSpec mixture() const {
        SineMixtureSpec spec;
        spec.n_points = points;
        spec.n_cycles = cycles;
        spec.frequencies = parse_double_list(frequencies);
        spec.amplitudes = parse_double_list(amplitudes);
        spec.fold_rows = rows;
        spec.validate();
        return spec;
    }

    [[nodiscard]] CorruptionSpec corruption(std::uint64_t seed) const {
        CorruptionSpec spec;
        spec.anomaly_scale = anomaly_scale;
        if (noise_sigma >= 0.0) {
            spec.noise_sigma = noise_sigma;
        }
        spec.seed = seed;
        return spec;
    }
};

struct SynthOptions {
    std::string output_dir = ".";
    double level = -1.0;
    double missing = 0.0;
    double anomalies = 0.0;
    std::uint64_t seed = 0;
    DataOptions data;
};

struct EvalOptions {
    std::string clean;
    std::string truth;
    std::string x;
    std::string a;
    std::string output;
    double alpha = 2.0;
};

struct SweepOptions {
    std::string output_dir = ".";
    std::string levels = "0.05,0.1,0.15,0.2,0.25";
    int repeats = 20;
    std::string solvers = "batch,online";
    double lambda1 = 1.0;
    double lambda2 = 0.5;
    std::string penalties = "20:1";
    Index rank = 6;
    Index burnin = 40;
    Index window = 0;
    double alpha = 2.0;
    double modes_level = 0.1;
    int tune_budget = 0;
    int subsets = HyperSearchSpec{}.subsets;
    double mask_fraction = HyperSearchSpec{}.mask_fraction;
    std::uint64_t seed = 0;
    DataOptions data;
};

struct PeriodOptions {
    std::string input;
    std::size_t max_lag = 0;
    std::string output;
};

void write_run_config(const fs::path& dir, const std::string& command, std::uint64_t seed) {
    write_config_file(dir / "run.cfg", {{"command", command}, {"seed", std::to_string(seed)}});
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

std::string quoted(const std::string& text) {
    std::string out = "\"";
    for (const char c : text) {
        out += c == '"' ? std::string("\"\"") : std::string(1, c);
    }
    return out + "\"";
}

int cmd_decompose(const DecomposeOptions& opt) {
    const SolverSpec solver = opt.solver.build();
    const fs::path dir(opt.output_dir);
    prepare_output_dir(dir);
    const ObservationMatrix d = load_observations(opt.input, opt.period, opt.mask);

    const Decomposition dec = run_solver(solver, d);
    const AnomalyFilterResult split = filter_anomalies(dec.A, dec.X, opt.alpha);
    const BoolMatrix flagged = split.anomalies.array() != 0.0;

    write_matrix_csv(dir / "X.csv", dec.X);
    write_matrix_csv(dir / "A.csv", dec.A);
    write_matrix_csv(dir / "E.csv", dec.E);
    write_mask_csv(dir / "anomalies.csv", flagged);

    std::ostringstream diag;
    diag << "key,value\n"
         << "mode," << to_string(solver.kind) << '\n'
         << "seed," << opt.seed << '\n'
         << "rows," << d.rows() << '\n'
         << "cols," << d.cols() << '\n'
         << "observed," << d.observed_count() << '\n'
         << "rank_bound," << dec.rank_bound << '\n'
         << "iterations," << dec.iterations << '\n'
         << "final_residual," << format_double(dec.final_residual) << '\n'
         << "converged," << bool_text(dec.converged) << '\n'
         << "constraint_gap," << format_double(dec.constraint_gap) << '\n'
         << "alpha," << format_double(opt.alpha) << '\n'
         << "anomalies," << flagged.count() << '\n';
    write_text_file(dir / "diagnostics.csv", diag.str());

    if (!dec.converged) {
        std::cerr << "warning: solver stopped at the iteration cap without converging\n";
        return exit_not_converged;
    }
    return exit_ok;
}

json vector_json(const Vector& v) {
    json out = json::array();
    for (Index i = 0; i < v.size(); ++i) {
        out.push_back(v(i));
    }
    return out;
}

constexpr const char* kStreamFormat = "trpca-stream-checkpoint";

void write_stream_checkpoint(const fs::path& path, const OnlineState& state,
                             std::int64_t lines, std::int64_t columns, std::int64_t output_bytes,
                             std::uint64_t seed) {
    json bundle = {
        {"format", kStreamFormat},
        {"version", 1},
        {"seed", seed},
        {"lines_consumed", lines},
        {"columns_consumed", columns},
        {"output_bytes", output_bytes},
        {"state", json::parse(save_checkpoint(state))},
    };
    write_text_file(path, bundle.dump() + "\n");
}

int cmd_stream(const StreamOptions& opt) {
    if (opt.on_error != "skip" && opt.on_error != "abort") {
        throw ConfigError("--on-error must be skip or abort");
    }
    if (opt.checkpoint_every < 0) {
        throw ConfigError("--checkpoint-every must be non-negative");
    }
    check_writable_file(opt.output);
    check_writable_file(opt.checkpoint);

    std::optional<OnlineState> state;
    std::int64_t skip_lines = 0;
    std::int64_t columns = 0;
    std::int64_t output_bytes = 0;
    std::uint64_t seed = opt.seed;
    if (opt.resume) {
        const json bundle = json::parse(read_text_file(opt.checkpoint), nullptr, false);
        if (bundle.is_discarded() || !bundle.is_object() ||
            bundle.value("format", std::string()) != kStreamFormat) {
            throw IoError("checkpoint " + opt.checkpoint + " is not a stream checkpoint");
        }
        try {
            skip_lines = bundle.at("lines_consumed").get<std::int64_t>();
            columns = bundle.at("columns_consumed").get<std::int64_t>();
            output_bytes = bundle.at("output_bytes").get<std::int64_t>();
            seed = bundle.at("seed").get<std::uint64_t>();
            state = load_checkpoint(bundle.at("state").dump());
        } catch (const json::exception& e) {
            throw IoError(std::string("checkpoint: ") + e.what());
        }
    }
    const OnlineConfig config = state ? state->config : opt.solver.build().online;

    std::ifstream in(opt.input, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + opt.input + " for reading");
    }
    if (opt.resume) {
        // Drop records written after the checkpoint so they are not repeated.
        std::error_code ec;
        const auto size = fs::file_size(opt.output, ec);
        if (ec || size < static_cast<std::uintmax_t>(output_bytes)) {
            throw IoError(opt.output + " is shorter than the output recorded in the checkpoint");
        }
        fs::resize_file(opt.output, static_cast<std::uintmax_t>(output_bytes), ec);
        if (ec) {
            throw IoError("cannot truncate " + opt.output + ": " + ec.message());
        }
    }
    std::ofstream out(opt.output, std::ios::binary |
                                      (opt.resume ? std::ios::app : std::ios::trunc));
    if (!out) {
        throw IoError("cannot open " + opt.output + " for writing");
    }

    std::optional<Index> rows;
    if (state) {
        rows = state->rows();
    }
    std::vector<Vector> burn_values;
    std::vector<BoolVector> burn_masks;
    std::int64_t line_no = 0;
    std::int64_t processed = 0;
    std::int64_t skipped = 0;
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no <= skip_lines) {
            continue;
        }
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        if (opt.limit >= 0 && processed >= opt.limit) {
            --line_no;
            break;
        }
        StreamRecord record;
        try {
            record = parse_stream_record(line, rows);
        } catch (const IoError& e) {
            if (opt.on_error == "abort") {
                throw IoError(opt.input + ": line " + std::to_string(line_no) + ": " + e.what());
            }
            std::cerr << opt.input << ": line " << line_no << ": skipped: " << e.what() << '\n';
            ++skipped;
            continue;
        }
        const std::int64_t column = columns++;
        if (!state) {
            rows = record.values.size();
            burn_values.push_back(record.values);
            burn_masks.push_back(record.mask);
            if (static_cast<Index>(burn_values.size()) == config.burnin) {
                const Index m = *rows;
                ObservationMatrix block(Matrix(m, config.burnin),
                                        BoolMatrix(m, config.burnin));
                for (Index j = 0; j < config.burnin; ++j) {
                    block.data.col(j) = burn_values[static_cast<std::size_t>(j)];
                    block.mask.col(j) = burn_masks[static_cast<std::size_t>(j)];
                }
                state = init_from_burnin(block, config);
                burn_values.clear();
                burn_masks.clear();
            }
            continue;
        }
        const SampleResult r = step(*state, record.values, record.mask);
        json rec = {
            {"t", record.t ? *record.t : column},
            {"q", vector_json(r.q)},
            {"x", vector_json(r.x)},
            {"a", vector_json(r.a)},
            {"iterations", r.iterations},
            {"converged", r.converged},
        };
        const std::string text = rec.dump() + "\n";
        out << text;
        output_bytes += static_cast<std::int64_t>(text.size());
        ++processed;
        if (opt.checkpoint_every > 0 && processed % opt.checkpoint_every == 0) {
            out.flush();
            write_stream_checkpoint(opt.checkpoint, *state, line_no, columns, output_bytes, seed);
        }
    }
    out.flush();
    if (!out) {
        throw IoError("error while writing " + opt.output);
    }
    if (!state) {
        throw IoError("stream ended after " + std::to_string(burn_values.size()) +
                      " columns, before the " + std::to_string(config.burnin) +
                      "-column burn-in was complete");
    }
    write_stream_checkpoint(opt.checkpoint, *state, line_no, columns, output_bytes, seed);
    if (skipped > 0) {
        std::cerr << "skipped " << skipped << " malformed record(s)\n";
    }
    return exit_ok;
}

int cmd_tune(const TuneOptions& opt) {
    const SolverSpec solver = opt.solver.build();
    HyperSearchSpec spec;
    spec.subsets = opt.subsets;
    spec.mask_fraction = opt.mask_fraction;
    spec.budget = opt.budget;
    spec.bounds = parse_bounds(opt.bounds);
    spec.seed = opt.seed;
    spec.workers = opt.workers;
    if (opt.method == "gp") {
        spec.method = SearchMethod::gp_ei;
    } else if (opt.method == "random") {
        spec.method = SearchMethod::random;
    } else {
        throw ConfigError("--method must be gp or random");
    }
    spec.validate();
    const fs::path dir(opt.output_dir);
    prepare_output_dir(dir);
    const ObservationMatrix d = load_observations(opt.input, opt.period, opt.mask);

    TuneResult result;
    try {
        result = tune(d, spec, solver);
    } catch (const TuningError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_not_converged;
    }
    std::ostringstream trace;
    write_trace_csv(trace, result);
    write_text_file(dir / "trace.csv", trace.str());

    ConfigEntries best = solver_config_entries(result.best);
    best.emplace_back("seed", std::to_string(opt.seed));
    write_config_file(dir / "best_params.cfg", best);

    const auto& entry = result.best_entry();
    std::cout << "best cv_objective " << format_double(entry.result.objective) << " at evaluation "
              << entry.evaluation << '\n';
    return exit_ok;
}

int cmd_synth(const SynthOptions& opt) {
    const SineMixtureSpec mixture = opt.data.mixture();
    CorruptionSpec corruption = opt.data.corruption(opt.seed);
    if (opt.level >= 0.0) {
        corruption = corruption_for_level(corruption, opt.level);
    } else {
        corruption.missing_fraction = opt.missing;
        corruption.anomaly_fraction = opt.anomalies;
    }
    corruption.validate();
    const fs::path dir(opt.output_dir);
    prepare_output_dir(dir);

    const SineMixture clean = generate_sine_mixture(mixture);
    const CorruptedData data = corrupt(clean.matrix, corruption);
    write_matrix_csv(dir / "clean.csv", clean.matrix.data);
    write_matrix_csv(dir / "observed.csv", data.observed.data, &data.observed.mask);
    write_mask_csv(dir / "truth.csv", data.truth);
    write_series_csv(dir / "clean_series.csv", clean.signal);
    write_series_csv(dir / "series.csv",
                     flatten_to_signal(data.observed, clean.signal.size()));
    write_run_config(dir, "synth", opt.seed);
    return exit_ok;
}

int cmd_eval(const EvalOptions& opt) {
    if (!opt.output.empty()) {
        check_writable_file(opt.output);
    }
    const ObservationMatrix clean = read_matrix_csv(opt.clean);
    const BoolMatrix truth = read_mask_csv(opt.truth);
    Decomposition dec;
    dec.X = read_matrix_csv(opt.x).zero_filled();
    dec.A = read_matrix_csv(opt.a).zero_filled();
    auto same_shape = [&](const auto& m, const std::string& what) {
        if (m.rows() != clean.rows() || m.cols() != clean.cols()) {
            throw IoError(what + " shape does not match the clean matrix");
        }
    };
    same_shape(truth, "truth");
    same_shape(dec.X, "X");
    same_shape(dec.A, "A");
    const EvalReport r = evaluate(dec, clean, truth, opt.alpha);

    std::ostringstream text;
    text << "metric,value\n"
         << "relative_error," << format_double(r.relative_error) << '\n'
         << "precision," << format_double(r.precision) << '\n'
         << "recall," << format_double(r.recall) << '\n'
         << "f1," << format_double(r.f1) << '\n'
         << "true_positives," << r.true_positives << '\n'
         << "false_positives," << r.false_positives << '\n'
         << "false_negatives," << r.false_negatives << '\n'
         << "true_negatives," << r.true_negatives << '\n'
         << "alpha," << format_double(opt.alpha) << '\n';
    if (opt.output.empty()) {
        std::cout << text.str();
    } else {
        write_text_file(opt.output, text.str());
    }
    return exit_ok;
}

std::vector<SolverSpec> sweep_solvers(const SweepOptions& opt) {
    std::vector<SolverSpec> defaults = default_sweep_solvers();
    const auto penalties = parse_penalties(opt.penalties);
    for (auto& s : defaults) {
        s.batch.lambda1 = s.online.lambda1 = opt.lambda1;
        s.batch.lambda2 = s.online.lambda2 = opt.lambda2;
        s.batch.penalties = s.online.penalties = penalties;
        s.batch.rank = s.online.rank = opt.rank;
        s.online.burnin = opt.burnin;
        if (opt.window > 0) {
            s.online.window = opt.window;
        }
    }
    SolverSpec pcp;
    pcp.name = "pcp";
    pcp.kind = SolverKind::pcp;

    std::vector<SolverSpec> chosen;
    std::stringstream names(opt.solvers);
    std::string name;
    while (std::getline(names, name, ',')) {
        if (name == "batch" || name == "temporal") {
            chosen.push_back(defaults[0]);
        } else if (name == "online") {
            chosen.push_back(defaults[1]);
        } else if (name == "pcp") {
            chosen.push_back(pcp);
        } else {
            throw ConfigError("unknown solver '" + name + "' in --solvers");
        }
    }
    if (chosen.empty()) {
        throw ConfigError("--solvers is empty");
    }
    return chosen;
}

int cmd_sweep(const SweepOptions& opt) {
    const std::vector<double> levels = parse_double_list(opt.levels);
    if (levels.empty()) {
        throw ConfigError("--levels is empty");
    }
    for (const double level : levels) {
        if (!(level >= 0.0 && level < 1.0)) {
            throw ConfigError("corruption levels must lie in [0, 1)");
        }
    }
    const std::vector<SolverSpec> solvers = sweep_solvers(opt);
    SweepSpec spec;
    spec.data = opt.data.mixture();
    spec.corruption = opt.data.corruption(opt.seed);
    spec.alpha = opt.alpha;
    if (opt.tune_budget > 0) {
        HyperSearchSpec search;
        search.budget = opt.tune_budget;
        search.subsets = opt.subsets;
        search.mask_fraction = opt.mask_fraction;
        search.seed = opt.seed;
        search.validate();
        spec.tuning = search;
    }
    const fs::path dir(opt.output_dir);
    prepare_output_dir(dir);

    const SweepTable table = corruption_sweep(levels, opt.repeats, solvers, spec);

    std::ostringstream rows;
    rows << "level,solver,repeat,relative_error,precision,recall,f1,true_positives,"
            "false_positives,false_negatives,true_negatives,failed,error\n";
    for (const auto& r : table.rows) {
        rows << format_double(r.level) << ',' << r.solver << ',' << r.repeat << ','
             << format_double(r.report.relative_error) << ',' << format_double(r.report.precision)
             << ',' << format_double(r.report.recall) << ',' << format_double(r.report.f1) << ','
             << r.report.true_positives << ',' << r.report.false_positives << ','
             << r.report.false_negatives << ',' << r.report.true_negatives << ','
             << bool_text(r.failed) << ',' << quoted(r.error) << '\n';
    }
    write_text_file(dir / "rows.csv", rows.str());

    std::ostringstream agg;
    agg << "level,solver,count,relative_error_mean,relative_error_std,precision_mean,"
           "precision_std,recall_mean,recall_std,f1_mean,f1_std\n";
    for (const auto& a : table.aggregates) {
        agg << format_double(a.level) << ',' << a.solver << ',' << a.count << ','
            << format_double(a.relative_error.mean) << ',' << format_double(a.relative_error.std)
            << ',' << format_double(a.precision.mean) << ',' << format_double(a.precision.std)
            << ',' << format_double(a.recall.mean) << ',' << format_double(a.recall.std) << ','
            << format_double(a.f1.mean) << ',' << format_double(a.f1.std) << '\n';
    }
    write_text_file(dir / "aggregates.csv", agg.str());

    std::ostringstream figure;
    figure << "level";
    for (const auto& s : solvers) {
        figure << ',' << s.name << "_relative_error," << s.name << "_f1," << s.name
               << "_precision";
    }
    figure << '\n';
    for (const double level : levels) {
        figure << format_double(level);
        for (const auto& s : solvers) {
            for (const auto& a : table.aggregates) {
                if (a.level == level && a.solver == s.name) {
                    figure << ',' << format_double(a.relative_error.mean) << ','
                           << format_double(a.f1.mean) << ',' << format_double(a.precision.mean);
                }
            }
        }
        figure << '\n';
    }
    write_text_file(dir / "figure.csv", figure.str());

    if (!table.tuned.empty()) {
        std::ostringstream tuned;
        tuned << "level,solver,parameter,value,objective,failed,error\n";
        for (const auto& t : table.tuned) {
            for (std::size_t i = 0; i < t.parameters.size(); ++i) {
                tuned << format_double(t.level) << ',' << t.solver << ',' << t.bounds[i].name
                      << ',' << format_double(t.parameters[i]) << ','
                      << format_double(t.objective) << ",false,\"\"\n";
            }
            if (t.failed) {
                tuned << format_double(t.level) << ',' << t.solver << ",,,,true," << quoted(t.error)
                      << '\n';
            }
        }
        write_text_file(dir / "tuned.csv", tuned.str());
    }

    if (opt.modes_level >= 0.0) {
        CorruptionSpec c = corruption_for_level(spec.corruption, opt.modes_level);
        const SineMixture clean = generate_sine_mixture(spec.data);
        const auto modes = first_mode_difference(clean.matrix, c, solvers);
        std::ostringstream text;
        text << "level,solver,difference,gap,degenerate,failed,error\n";
        for (const auto& m : modes) {
            text << format_double(opt.modes_level) << ',' << m.solver << ','
                 << format_double(m.difference) << ',' << format_double(m.gap) << ','
                 << bool_text(m.degenerate) << ',' << bool_text(m.failed) << ','
                 << quoted(m.error) << '\n';
        }
        write_text_file(dir / "modes.csv", text.str());
    }
    write_run_config(dir, "sweep", opt.seed);
    return exit_ok;
}

int cmd_period(const PeriodOptions& opt) {
    if (!opt.output.empty()) {
        check_writable_file(opt.output);
    }
    const SignalSeries series = read_series_csv(opt.input);
    std::size_t max_lag = opt.max_lag;
    if (max_lag == 0) {
        max_lag = std::min<std::size_t>(series.size() / 2, 500);
    }
    if (max_lag < 2 || max_lag >= series.size()) {
        throw ConfigError("--max-lag must lie in [2, series length)");
    }
    const PeriodSuggestion s = suggest_period(series, max_lag);
    if (!opt.output.empty()) {
        const auto values = pacf(series, max_lag);
        std::string text = "lag,pacf\n";
        for (std::size_t k = 0; k < values.size(); ++k) {
            text += std::to_string(k + 1) + "," + format_double(values[k]) + "\n";
        }
        write_text_file(opt.output, text);
    }
    std::cout << s.period << '\n';
    if (!s.significant) {
        std::cerr << "note: the largest partial autocorrelation (" << format_double(s.pacf_value)
                  << ") is inside the noise band\n";
    }
    return exit_ok;
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"Temporal robust PCA: decomposition, streaming, tuning and experiments"};
    app.name("trpca");
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);
    std::string config_path;
    auto add_config = [&](CLI::App* sub) {
        sub->add_option("--config", config_path,
                        "key=value file with option defaults; flags override it");
    };

    DecomposeOptions dec;
    auto* decompose = app.add_subcommand("decompose", "Split a matrix or folded series into X + A + E");
    decompose->add_option("--input", dec.input, "Matrix CSV, or series CSV with --period")
        ->required();
    decompose->add_option("--mask", dec.mask, "Optional 0/1 mask CSV");
    decompose->add_option("--period", dec.period, "Fold a series CSV at this period");
    decompose->add_option("--output-dir", dec.output_dir, "Directory for the output files")
        ->capture_default_str();
    decompose->add_option("--alpha", dec.alpha, "Anomaly score threshold")->capture_default_str();
    decompose->add_option("--seed", dec.seed, "Seed echoed into the diagnostics")
        ->capture_default_str();
    dec.solver.add_to(*decompose);
    add_config(decompose);

    StreamOptions str;
    auto* stream = app.add_subcommand("stream", "Online decomposition of NDJSON columns");
    stream->add_option("--input", str.input, "NDJSON input, one {\"values\": [...]} per line")
        ->required();
    stream->add_option("--output", str.output, "NDJSON output path")->required();
    stream->add_option("--checkpoint", str.checkpoint, "Checkpoint path")->required();
    stream->add_option("--checkpoint-every", str.checkpoint_every,
                       "Also checkpoint every k output columns (0: only at the end)")
        ->capture_default_str();
    stream->add_flag("--resume", str.resume, "Continue from --checkpoint, appending to --output");
    stream->add_option("--on-error", str.on_error, "Malformed records: skip or abort")
        ->capture_default_str();
    stream->add_option("--limit", str.limit,
                       "Stop cleanly after this many output columns (negative: no limit)")
        ->capture_default_str();
    stream->add_option("--seed", str.seed, "Seed echoed into the checkpoint")->capture_default_str();
    str.solver.mode = "online";
    str.solver.add_to(*stream);
    add_config(stream);

    TuneOptions tn;
    auto* tune_cmd = app.add_subcommand("tune", "Cross-validated hyperparameter search");
    tune_cmd->add_option("--input", tn.input, "Matrix CSV, or series CSV with --period")
        ->required();
    tune_cmd->add_option("--mask", tn.mask, "Optional 0/1 mask CSV");
    tune_cmd->add_option("--period", tn.period, "Fold a series CSV at this period");
    tune_cmd->add_option("--output-dir", tn.output_dir, "Directory for trace.csv and best_params.cfg")
        ->capture_default_str();
    tune_cmd->add_option("--subsets", tn.subsets, "Cross-validation folds J")->capture_default_str();
    tune_cmd->add_option("--mask-fraction", tn.mask_fraction, "Fraction c of observed cells hidden per fold")
        ->capture_default_str();
    tune_cmd->add_option("--budget", tn.budget, "Objective evaluations")->capture_default_str();
    tune_cmd->add_option("--bounds", tn.bounds, "Search box as name:low:high[,...]");
    tune_cmd->add_option("--method", tn.method, "gp (expected improvement) or random")
        ->capture_default_str();
    tune_cmd->add_option("--workers", tn.workers, "Threads per evaluation")->capture_default_str();
    tune_cmd->add_option("--seed", tn.seed, "Seed of folds and search")->capture_default_str();
    tn.solver.add_to(*tune_cmd);
    add_config(tune_cmd);

    SynthOptions sy;
    auto* synth = app.add_subcommand("synth", "Generate and corrupt the sine-mixture benchmark");
    synth->add_option("--output-dir", sy.output_dir, "Directory for the generated files")
        ->capture_default_str();
    synth->add_option("--level", sy.level,
                      "Corruption level p (p/2 missing, p/2 anomalies); overrides the fractions");
    synth->add_option("--missing", sy.missing, "Fraction of missing cells")->capture_default_str();
    synth->add_option("--anomalies", sy.anomalies, "Fraction of anomalous cells")
        ->capture_default_str();
    synth->add_option("--seed", sy.seed, "Corruption seed")->capture_default_str();
    sy.data.add_to(*synth);
    add_config(synth);

    EvalOptions ev;
    auto* eval = app.add_subcommand("eval", "Score a decomposition against the ground truth");
    eval->add_option("--clean", ev.clean, "Clean matrix CSV")->required();
    eval->add_option("--truth", ev.truth, "Anomaly position mask CSV")
        ->required();
    eval->add_option("--x", ev.x, "Low-rank estimate CSV")->required();
    eval->add_option("--a", ev.a, "Sparse estimate CSV")->required();
    eval->add_option("--alpha", ev.alpha, "Anomaly score threshold")->capture_default_str();
    eval->add_option("--output", ev.output, "Metrics CSV path (default: standard output)");
    add_config(eval);

    SweepOptions sw;
    auto* sweep = app.add_subcommand("sweep", "Corruption sweep and first-mode comparison");
    sweep->add_option("--output-dir", sw.output_dir, "Directory for the result tables")
        ->capture_default_str();
    sweep->add_option("--levels", sw.levels, "Corruption levels")->capture_default_str();
    sweep->add_option("--repeats", sw.repeats, "Corrupted draws per level")->capture_default_str();
    sweep->add_option("--solvers", sw.solvers, "Any of batch, online, pcp")->capture_default_str();
    sweep->add_option("--lambda1", sw.lambda1, "Shared nuclear-norm weight")->capture_default_str();
    sweep->add_option("--lambda2", sw.lambda2, "Shared sparsity weight")->capture_default_str();
    sweep->add_option("--penalties", sw.penalties, "Shared temporal penalties lag:eta[,...]")
        ->capture_default_str();
    sweep->add_option("--rank", sw.rank, "Shared factor rank")->capture_default_str();
    sweep->add_option("--burnin", sw.burnin, "Online burn-in columns")->capture_default_str();
    sweep->add_option("--window", sw.window, "Online window, 0 keeps all samples")
        ->capture_default_str();
    sweep->add_option("--alpha", sw.alpha, "Anomaly score threshold")->capture_default_str();
    sweep->add_option("--modes-level", sw.modes_level,
                      "Level of the first-mode comparison (negative: skip)")
        ->capture_default_str();
    sweep->add_option("--tune-budget", sw.tune_budget,
                      "Re-tune every solver per level with this budget (0: off)")
        ->capture_default_str();
    sweep->add_option("--subsets", sw.subsets, "Folds for --tune-budget")->capture_default_str();
    sweep->add_option("--mask-fraction", sw.mask_fraction, "Hidden fraction for --tune-budget")
        ->capture_default_str();
    sweep->add_option("--seed", sw.seed, "Base seed")->capture_default_str();
    sw.data.add_to(*sweep);
    add_config(sweep);

    PeriodOptions pe;
    auto* period = app.add_subcommand("period", "Suggest a folding period from the PACF");
    period->add_option("--input", pe.input, "Series CSV")->required();
    period->add_option("--max-lag", pe.max_lag, "Largest lag considered (0: min(N/2, 500))")
        ->capture_default_str();
    period->add_option("--output", pe.output, "Optional PACF CSV path");
    add_config(period);

    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        args = expand_config_arguments(std::move(args));
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_io;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    }
    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_usage;
    }

    try {
        if (*decompose) return cmd_decompose(dec);
        if (*stream) return cmd_stream(str);
        if (*tune_cmd) return cmd_tune(tn);
        if (*synth) return cmd_synth(sy);
        if (*eval) return cmd_eval(ev);
        if (*sweep) return cmd_sweep(sw);
        if (*period) return cmd_period(pe);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_io;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_io;
    }
    return exit_usage;
}

}  // namespace trpca::cli

int main(int argc, char** argv) { return trpca::cli::run(argc, argv); }
