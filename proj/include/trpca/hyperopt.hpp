#pragma once

#include "trpca/io.hpp"
#include "trpca/solver.hpp"
#include "trpca/timeseries.hpp"
#include "trpca/types.hpp"

#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace trpca {

/// Search interval for one parameter. Names are "lambda1", "lambda2" and
/// "eta1", "eta2", ... for the penalties of the base solver in order.
struct ParameterBound {
    std::string name;
    double low = 0.0;
    double high = 0.0;
};

enum class SearchMethod { gp_ei, random };

struct HyperSearchSpec {
    int subsets = 5;
    double mask_fraction = 0.05;
    std::vector<ParameterBound> bounds;
    int budget = 40;
    std::uint64_t seed = 0;
    SearchMethod method = SearchMethod::gp_ei;
    /// Threads used for the folds of one evaluation.
    int workers = 1;

    void validate() const;
};

/// Raised when no evaluated point produced a finite objective.
class TuningError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Number of cells hidden per fold: ceil(c * |Omega|).
[[nodiscard]] Index hidden_count(Index observed, double mask_fraction);

/// J hide-sets, each drawn without replacement from the observed cells.
[[nodiscard]] std::vector<BoolMatrix> draw_mask_subsets(const BoolMatrix& mask,
                                                        const HyperSearchSpec& spec);

struct CvResult {
    /// Mean of the fold errors; +inf when any fold failed.
    double objective = 0.0;
    /// Sum of |D - X| over the fold's hidden cells; +inf for a failed fold.
    std::vector<double> fold_errors;
    std::vector<std::string> fold_messages;
};

/**
 * Mean over folds of the l1 reconstruction error on the hidden cells, each
 * fold solved with its cells removed from the observation mask.
 */
[[nodiscard]] CvResult cv_objective(const ObservationMatrix& d,
                                    const std::vector<BoolMatrix>& subsets,
                                    const SolverSpec& solver, int workers = 1);

/// Parameters named in `bounds`, read from the solver settings.
[[nodiscard]] std::vector<double> get_parameters(const SolverSpec& solver,
                                                 const std::vector<ParameterBound>& bounds);
/// Copy of `solver` with the named parameters replaced.
[[nodiscard]] SolverSpec with_parameters(const SolverSpec& solver,
                                         const std::vector<ParameterBound>& bounds,
                                         const std::vector<double>& values);

/// lambda1, lambda2 and one eta per penalty of the base solver (lambda2 only for PCP).
[[nodiscard]] std::vector<ParameterBound> default_bounds(const SolverSpec& solver);

struct TraceEntry {
    int evaluation = 0;
    /// "design", "ei" or "random".
    std::string source;
    std::vector<double> parameters;
    CvResult result;
};

struct TuneResult {
    std::vector<ParameterBound> bounds;
    std::vector<TraceEntry> trace;
    std::size_t best_index = 0;
    SolverSpec best;

    [[nodiscard]] const TraceEntry& best_entry() const { return trace.at(best_index); }
};

/**
 * Sequential model-based search in log-parameter space. The first
 * ceil(budget / 4) points are a Halton design led by the base solver's own
 * parameters (when inside the bounds); the rest maximize expected improvement
 * under a Matern-5/2 Gaussian process, or are uniform draws for
 * SearchMethod::random. The best entry is the first minimum of the trace.
 */
[[nodiscard]] TuneResult tune(const ObservationMatrix& d, const HyperSearchSpec& spec,
                              const SolverSpec& solver);

/// One row per evaluation: index, source, parameters, fold errors, mean.
void write_trace_csv(std::ostream& out, const TuneResult& result);

/// Flat key=value settings that reproduce `solver` on the command line.
[[nodiscard]] ConfigEntries solver_config_entries(const SolverSpec& solver);

}  // namespace trpca
