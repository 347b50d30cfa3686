#pragma once

#include "trpca/batch.hpp"
#include "trpca/online.hpp"

#include <string>
#include <string_view>

namespace trpca {

enum class SolverKind { pcp, batch, online };

[[nodiscard]] SolverKind parse_solver_kind(std::string_view name);
[[nodiscard]] std::string_view to_string(SolverKind kind);

/// A named solver and the settings it runs with.
struct SolverSpec {
    std::string name;
    SolverKind kind = SolverKind::batch;
    BatchConfig batch;
    OnlineConfig online;
    PcpConfig pcp;
};

[[nodiscard]] Decomposition run_solver(const SolverSpec& spec, const ObservationMatrix& d);

}  // namespace trpca
