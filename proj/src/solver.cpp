#include "trpca/solver.hpp"

namespace trpca {

SolverKind parse_solver_kind(std::string_view name) {
    if (name == "pcp") return SolverKind::pcp;
    if (name == "batch" || name == "temporal") return SolverKind::batch;
    if (name == "online") return SolverKind::online;
    throw ConfigError("unknown solver '" + std::string(name) + "' (expected pcp, batch or online)");
}

std::string_view to_string(SolverKind kind) {
    switch (kind) {
        case SolverKind::pcp: return "pcp";
        case SolverKind::batch: return "batch";
        case SolverKind::online: return "online";
    }
    return "unknown";
}

Decomposition run_solver(const SolverSpec& spec, const ObservationMatrix& d) {
    switch (spec.kind) {
        case SolverKind::pcp: return solve_pcp(d, spec.pcp);
        case SolverKind::batch: return solve_temporal_batch(d, spec.batch);
        case SolverKind::online: return solve_online(d, spec.online);
    }
    throw ConfigError("unknown solver kind");
}

}  // namespace trpca
