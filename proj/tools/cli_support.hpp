#pragma once

#include "trpca/experiments.hpp"
#include "trpca/io.hpp"
#include "trpca/solver.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace trpca::cli {

enum ExitCode : int {
    exit_ok = 0,
    exit_io = 1,
    exit_not_converged = 2,
    exit_usage = 64,
};

/**
 * Returns the arguments (without the program name) with the entries of every
 * --config file spliced in right after the subcommand name, as --key=value
 * tokens. Later tokens win, so explicit flags override file values.
 */
[[nodiscard]] std::vector<std::string> expand_config_arguments(std::vector<std::string> args);

/// "20:1,1:0.5" -> {{20, 1}, {1, 0.5}}; empty text gives no penalties.
[[nodiscard]] std::vector<TemporalPenalty> parse_penalties(const std::string& text);
/// "0.05,0.1" -> {0.05, 0.1}.
[[nodiscard]] std::vector<double> parse_double_list(const std::string& text);
/// "lambda1:0.01:100,lambda2:0.01:10".
[[nodiscard]] std::vector<ParameterBound> parse_bounds(const std::string& text);

/// Flags shared by the commands that run one solver.
struct SolverOptions {
    std::string mode = "batch";
    double lambda1 = BatchConfig{}.lambda1;
    double lambda2 = BatchConfig{}.lambda2;
    std::string penalties;
    Index rank = 0;
    Index burnin = OnlineConfig{}.burnin;
    Index window = 0;
    std::int64_t max_iter = BatchConfig{}.max_iter;
    double tol = BatchConfig{}.tol;
    double mu0 = BatchConfig{}.mu0;
    double mu_max = BatchConfig{}.mu_max;
    double rho = BatchConfig{}.rho;
    std::string init = "ones";
    double pcp_lambda = 0.0;

    void add_to(CLI::App& app);
    [[nodiscard]] SolverSpec build() const;
};

/// Loads a matrix CSV, or a series CSV folded at `period` when period > 0.
[[nodiscard]] ObservationMatrix load_observations(const std::filesystem::path& input,
                                                  Index period,
                                                  const std::filesystem::path& mask_path);

/// Creates the directory and checks that files can be written into it.
void prepare_output_dir(const std::filesystem::path& dir);
/// Checks that the parent directory of `file` exists and is writable.
void check_writable_file(const std::filesystem::path& file);

}  // namespace trpca::cli
