#include "cli_support.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

namespace trpca::cli {

namespace {

std::string trimmed(const std::string& s) {
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string::npos) {
        return {};
    }
    return s.substr(first, s.find_last_not_of(" \t") - first + 1);
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::string current;
    for (const char c : text) {
        if (c == sep) {
            parts.push_back(trimmed(current));
            current.clear();
        } else {
            current += c;
        }
    }
    parts.push_back(trimmed(current));
    return parts;
}

double to_double(const std::string& text, const std::string& what) {
    double value = 0.0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (text.empty() || ec != std::errc() || ptr != end) {
        throw ConfigError("invalid number '" + text + "' in " + what);
    }
    return value;
}

Index to_index(const std::string& text, const std::string& what) {
    long long value = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (text.empty() || ec != std::errc() || ptr != end) {
        throw ConfigError("invalid integer '" + text + "' in " + what);
    }
    return static_cast<Index>(value);
}

bool is_subcommand_token(const std::string& token) {
    return !token.empty() && token.front() != '-';
}

}  // namespace

std::vector<std::string> expand_config_arguments(std::vector<std::string> args) {
    std::vector<std::string> injected;
    for (std::size_t i = 0; i < args.size(); ++i) {
        std::string path;
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) {
                throw ConfigError("--config requires a file path");
            }
            path = args[i + 1];
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
        } else {
            continue;
        }
        for (const auto& [key, value] : read_config_file(path)) {
            std::string name = key;
            std::replace(name.begin(), name.end(), '_', '-');
            if (name == "config") {
                throw ConfigError("config files cannot include other config files");
            }
            injected.push_back("--" + name + "=" + value);
        }
    }
    if (injected.empty()) {
        return args;
    }
    const auto sub = std::find_if(args.begin(), args.end(), is_subcommand_token);
    const auto at = sub == args.end() ? args.begin() : std::next(sub);
    args.insert(at, injected.begin(), injected.end());
    return args;
}

std::vector<TemporalPenalty> parse_penalties(const std::string& text) {
    std::vector<TemporalPenalty> penalties;
    if (trimmed(text).empty()) {
        return penalties;
    }
    for (const auto& item : split(text, ',')) {
        const auto parts = split(item, ':');
        if (parts.size() != 2) {
            throw ConfigError("penalty '" + item + "' must be lag:weight");
        }
        penalties.push_back({to_index(parts[0], "penalties"), to_double(parts[1], "penalties")});
    }
    return penalties;
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> values;
    if (trimmed(text).empty()) {
        return values;
    }
    for (const auto& item : split(text, ',')) {
        values.push_back(to_double(item, "list"));
    }
    return values;
}

std::vector<ParameterBound> parse_bounds(const std::string& text) {
    std::vector<ParameterBound> bounds;
    if (trimmed(text).empty()) {
        return bounds;
    }
    for (const auto& item : split(text, ',')) {
        const auto parts = split(item, ':');
        if (parts.size() != 3) {
            throw ConfigError("bound '" + item + "' must be name:low:high");
        }
        bounds.push_back({parts[0], to_double(parts[1], "bounds"), to_double(parts[2], "bounds")});
    }
    return bounds;
}

void SolverOptions::add_to(CLI::App& app) {
    app.add_option("--mode", mode, "Solver: batch (alias temporal), online or pcp")
        ->capture_default_str();
    app.add_option("--lambda1", lambda1, "Nuclear-norm weight")->capture_default_str();
    app.add_option("--lambda2", lambda2, "Sparsity weight of the anomaly term")
        ->capture_default_str();
    app.add_option("--penalties", penalties, "Temporal penalties as lag:eta[,lag:eta...]");
    app.add_option("--rank", rank,
                   "Factor rank; 0 estimates it (batch) and is rejected for online")
        ->capture_default_str();
    app.add_option("--burnin", burnin, "Online: columns solved in batch before streaming")
        ->capture_default_str();
    app.add_option("--window", window, "Online: sliding window length, 0 keeps all samples")
        ->capture_default_str();
    app.add_option("--max-iter", max_iter, "Iteration cap of the batch solvers")
        ->capture_default_str();
    app.add_option("--tol", tol, "Stopping tolerance of the batch solvers")->capture_default_str();
    app.add_option("--mu0", mu0, "Initial penalty parameter")->capture_default_str();
    app.add_option("--mu-max", mu_max, "Penalty parameter cap")->capture_default_str();
    app.add_option("--rho", rho, "Penalty growth factor")->capture_default_str();
    app.add_option("--init", init, "Factor initialization: ones or spectral")
        ->capture_default_str();
    app.add_option("--pcp-lambda", pcp_lambda, "PCP sparsity weight, 0 for 1/sqrt(max(m,n))")
        ->capture_default_str();
}

SolverSpec SolverOptions::build() const {
    SolverSpec spec;
    spec.kind = parse_solver_kind(mode);
    spec.name = std::string(to_string(spec.kind));
    const auto parsed = parse_penalties(penalties);

    spec.batch.lambda1 = lambda1;
    spec.batch.lambda2 = lambda2;
    spec.batch.penalties = parsed;
    spec.batch.rank = rank;
    spec.batch.max_iter = max_iter;
    spec.batch.tol = tol;
    spec.batch.mu0 = mu0;
    spec.batch.mu_max = mu_max;
    spec.batch.rho = rho;
    if (init == "ones") {
        spec.batch.init = FactorInit::ones;
    } else if (init == "spectral") {
        spec.batch.init = FactorInit::spectral;
    } else {
        throw ConfigError("--init must be ones or spectral");
    }

    spec.online.lambda1 = lambda1;
    spec.online.lambda2 = lambda2;
    spec.online.penalties = parsed;
    spec.online.rank = rank;
    spec.online.burnin = burnin;
    if (window > 0) {
        spec.online.window = window;
    } else if (window < 0) {
        throw ConfigError("--window must be non-negative");
    }
    spec.online.burnin_solver = spec.batch;

    spec.pcp.lambda2 = pcp_lambda;
    spec.pcp.max_iter = std::min<std::int64_t>(max_iter, PcpConfig{}.max_iter);

    if (spec.kind == SolverKind::online && rank < 1) {
        throw ConfigError("online mode needs an explicit --rank");
    }
    return spec;
}

ObservationMatrix load_observations(const std::filesystem::path& input, Index period,
                                    const std::filesystem::path& mask_path) {
    ObservationMatrix d;
    if (period > 0) {
        d = reshape_to_matrix(read_series_csv(input), period);
    } else if (period < 0) {
        throw ConfigError("--period must be positive");
    } else {
        d = read_matrix_csv(input);
    }
    if (!mask_path.empty()) {
        d = apply_mask(std::move(d), read_mask_csv(mask_path));
    }
    return d;
}

void prepare_output_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) {
        throw IoError("cannot create output directory " + dir.string());
    }
    check_writable_file(dir / ".write-check");
}

void check_writable_file(const std::filesystem::path& file) {
    const auto parent = file.has_parent_path() ? file.parent_path() : std::filesystem::path(".");
    if (!std::filesystem::is_directory(parent)) {
        throw IoError("output directory " + parent.string() + " does not exist");
    }
    std::filesystem::path probe = parent / (".trpca-probe-" + file.filename().string());
    {
        std::ofstream out(probe);
        if (!out) {
            throw IoError("cannot write into " + parent.string());
        }
    }
    std::error_code ec;
    std::filesystem::remove(probe, ec);
}

}  // namespace trpca::cli
