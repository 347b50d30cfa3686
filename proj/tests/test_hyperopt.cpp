#include "test_support.hpp"

#include "trpca/hyperopt.hpp"

#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace trpca;
using namespace trpca::testing;

namespace {

SolverSpec batch_solver(Index rank) {
    SolverSpec s;
    s.kind = SolverKind::batch;
    s.name = "batch";
    s.batch.lambda1 = 0.1;
    s.batch.lambda2 = 0.3;
    s.batch.rank = rank;
    s.batch.penalties = {{1, 0.5}};
    return s;
}

SolverSpec pcp_solver() {
    SolverSpec s;
    s.kind = SolverKind::pcp;
    s.name = "pcp";
    return s;
}

HyperSearchSpec small_search(int budget) {
    HyperSearchSpec spec;
    spec.subsets = 3;
    spec.mask_fraction = 0.05;
    spec.budget = budget;
    spec.seed = 17;
    return spec;
}

Index count_true(const BoolMatrix& m) { return static_cast<Index>(m.count()); }

}  // namespace

TEST_CASE("hidden_count rounds the hidden fraction up") {
    CHECK(hidden_count(100, 0.05) == 5);
    CHECK(hidden_count(101, 0.05) == 6);
    CHECK(hidden_count(4, 0.5) == 2);
    CHECK(hidden_count(1000, 0.001) == 1);
}

TEST_CASE("mask subsets have the requested size and only hide observed cells") {
    Rng rng(1);
    const BoolMatrix mask = random_mask(rng, 20, 30, 0.2);
    HyperSearchSpec spec = small_search(1);
    spec.subsets = 5;
    const auto subsets = draw_mask_subsets(mask, spec);
    REQUIRE(subsets.size() == 5);
    const Index expected = static_cast<Index>(std::ceil(0.05 * static_cast<double>(count_true(mask))));
    std::set<std::vector<bool>> distinct;
    for (const auto& s : subsets) {
        CHECK(count_true(s) == expected);
        CHECK(count_true(s.array() && !mask.array()) == 0);
        distinct.insert(std::vector<bool>(s.data(), s.data() + s.size()));
    }
    CHECK(distinct.size() == 5);

    const auto again = draw_mask_subsets(mask, spec);
    for (std::size_t k = 0; k < subsets.size(); ++k) {
        CHECK(subsets[k] == again[k]);
    }
    spec.seed += 1;
    CHECK(draw_mask_subsets(mask, spec)[0] != subsets[0]);
}

TEST_CASE("a half-hiding subset of a 2x2 mask hides two cells") {
    const BoolMatrix mask = BoolMatrix::Constant(2, 2, true);
    HyperSearchSpec spec = small_search(1);
    spec.mask_fraction = 0.5;
    spec.subsets = 20;
    for (const auto& s : draw_mask_subsets(mask, spec)) {
        CHECK(count_true(s) == 2);
    }
}

TEST_CASE("cv objective matches a direct recomputation of the folds") {
    const ObservationMatrix d = synthetic_observations(2, 15, 20, 2);
    const SolverSpec solver = batch_solver(2);
    const auto subsets = draw_mask_subsets(d.mask, small_search(1));
    const CvResult cv = cv_objective(d, subsets, solver);
    REQUIRE(cv.fold_errors.size() == subsets.size());
    double total = 0.0;
    for (std::size_t f = 0; f < subsets.size(); ++f) {
        BoolMatrix kept = d.mask;
        Matrix data = d.data;
        for (Index j = 0; j < 20; ++j) {
            for (Index i = 0; i < 15; ++i) {
                if (subsets[f](i, j)) {
                    kept(i, j) = false;
                    data(i, j) = 0.0;
                }
            }
        }
        const Decomposition dec = run_solver(solver, ObservationMatrix(data, kept));
        double err = 0.0;
        for (Index j = 0; j < 20; ++j) {
            for (Index i = 0; i < 15; ++i) {
                if (subsets[f](i, j)) err += std::abs(d.data(i, j) - dec.X(i, j));
            }
        }
        CHECK(cv.fold_errors[f] == doctest::Approx(err).epsilon(1e-12));
        total += err;
    }
    CHECK(cv.objective == doctest::Approx(total / 3.0).epsilon(1e-12));

    const CvResult threaded = cv_objective(d, subsets, solver, 3);
    CHECK(threaded.fold_errors == cv.fold_errors);
}

TEST_CASE("cv objective is near zero when the held-out cells are predictable") {
    Rng rng(3);
    const Matrix clean = random_low_rank(rng, 30, 30, 2);
    const ObservationMatrix d(clean);
    const auto subsets = draw_mask_subsets(d.mask, small_search(1));
    const CvResult cv = cv_objective(d, subsets, pcp_solver());
    const double scale = clean.cwiseAbs().sum() * 0.05;
    CHECK(cv.objective < 1e-3 * scale);
}

TEST_CASE("failing folds score infinity and tuning without any finite score throws") {
    const ObservationMatrix d = synthetic_observations(4, 10, 12, 2);
    SolverSpec online;
    online.kind = SolverKind::online;
    online.name = "online";
    online.online.rank = 2;
    online.online.burnin = 50;
    const auto subsets = draw_mask_subsets(d.mask, small_search(1));
    const CvResult cv = cv_objective(d, subsets, online);
    CHECK(std::isinf(cv.objective));
    for (const auto& msg : cv.fold_messages) CHECK(!msg.empty());
    CHECK_THROWS_AS((void)tune(d, small_search(2), online), TuningError);
}

TEST_CASE("parameters are read and written by name") {
    const SolverSpec solver = batch_solver(2);
    const auto bounds = default_bounds(solver);
    REQUIRE(bounds.size() == 3);
    CHECK(bounds[2].name == "eta1");
    CHECK(get_parameters(solver, bounds) == std::vector<double>{0.1, 0.3, 0.5});
    const SolverSpec changed = with_parameters(solver, bounds, {1.0, 2.0, 3.0});
    CHECK(changed.batch.lambda1 == 1.0);
    CHECK(changed.batch.lambda2 == 2.0);
    CHECK(changed.batch.penalties[0].weight == 3.0);
    CHECK_THROWS_AS((void)get_parameters(solver, {{"eta2", 1, 2}}), ConfigError);
    CHECK_THROWS_AS((void)get_parameters(pcp_solver(), {{"lambda1", 1, 2}}), ConfigError);
    CHECK(default_bounds(pcp_solver()).size() == 1);
}

TEST_CASE("search specification validation") {
    HyperSearchSpec spec = small_search(4);
    spec.bounds = {{"lambda1", 0.0, 1.0}};
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec.bounds = {{"lambda1", 2.0, 1.0}};
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec.bounds = {{"lambda1", 0.1, 1.0}, {"lambda1", 0.2, 2.0}};
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec.bounds.clear();
    spec.mask_fraction = 1.0;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec.mask_fraction = 0.05;
    spec.budget = 0;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("tune spends the budget, starts from the base point and reports the trace minimum") {
    const ObservationMatrix d = synthetic_observations(5, 15, 20, 2);
    const SolverSpec solver = batch_solver(2);
    const TuneResult result = tune(d, small_search(6), solver);
    REQUIRE(result.trace.size() == 6);
    CHECK(result.trace[0].source == "design");
    CHECK(result.trace[1].source == "design");
    CHECK(result.trace[2].source == "ei");
    CHECK(result.trace[0].parameters == get_parameters(solver, result.bounds));
    double best = result.trace[0].result.objective;
    for (const auto& e : result.trace) {
        best = std::min(best, e.result.objective);
        for (std::size_t i = 0; i < e.parameters.size(); ++i) {
            CHECK(e.parameters[i] >= result.bounds[i].low);
            CHECK(e.parameters[i] <= result.bounds[i].high);
        }
    }
    CHECK(result.best_entry().result.objective == best);
    CHECK(get_parameters(result.best, result.bounds) == result.best_entry().parameters);

    const TuneResult again = tune(d, small_search(6), solver);
    for (std::size_t i = 0; i < result.trace.size(); ++i) {
        CHECK(again.trace[i].parameters == result.trace[i].parameters);
        CHECK(again.trace[i].result.objective == result.trace[i].result.objective);
    }
}

TEST_CASE("a budget of one evaluates only the base point") {
    const ObservationMatrix d = synthetic_observations(6, 10, 12, 2);
    const SolverSpec solver = batch_solver(2);
    const TuneResult result = tune(d, small_search(1), solver);
    REQUIRE(result.trace.size() == 1);
    CHECK(result.best_index == 0);
    CHECK(result.trace[0].parameters == get_parameters(solver, result.bounds));
}

TEST_CASE("random search draws its proposals uniformly in log space") {
    const ObservationMatrix d = synthetic_observations(7, 10, 12, 2);
    HyperSearchSpec spec = small_search(5);
    spec.method = SearchMethod::random;
    const TuneResult result = tune(d, spec, batch_solver(2));
    REQUIRE(result.trace.size() == 5);
    for (std::size_t i = 2; i < 5; ++i) CHECK(result.trace[i].source == "random");
}

TEST_CASE("tuning the pcp weight beats both ends of its range") {
    Rng rng(8);
    Matrix data = random_low_rank(rng, 30, 30, 2);
    for (Index j = 0; j < 30; ++j) {
        for (Index i = 0; i < 30; ++i) {
            if (rng.uniform() < 0.05) data(i, j) += rng.uniform(-10.0, 10.0);
        }
    }
    const ObservationMatrix d(data);
    HyperSearchSpec spec = small_search(8);
    spec.bounds = {{"lambda2", 1e-3, 1.0}};
    const TuneResult result = tune(d, spec, pcp_solver());
    const auto subsets = draw_mask_subsets(d.mask, spec);
    const double best = result.best_entry().result.objective;
    for (const double end : {1e-3, 1.0}) {
        const CvResult cv = cv_objective(d, subsets, with_parameters(pcp_solver(), spec.bounds, {end}));
        CHECK(best < cv.objective);
    }
}

TEST_CASE("trace csv and solver entries") {
    const ObservationMatrix d = synthetic_observations(9, 10, 12, 2);
    const TuneResult result = tune(d, small_search(2), batch_solver(2));
    std::ostringstream out;
    write_trace_csv(out, result);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "evaluation,source,lambda1,lambda2,eta1,fold1,fold2,fold3,mean");
    int rows = 0;
    while (std::getline(in, line)) {
        CHECK(split_csv_line(line).size() == 9);
        ++rows;
    }
    CHECK(rows == 2);

    const ConfigEntries batch = solver_config_entries(batch_solver(2));
    const ConfigEntries expected{{"mode", "batch"},    {"lambda1", "0.1"}, {"lambda2", "0.3"},
                                 {"penalties", "1:0.5"}, {"rank", "2"}};
    CHECK(batch == expected);
    SolverSpec pcp = pcp_solver();
    pcp.pcp.lambda2 = 0.25;
    const ConfigEntries p{{"mode", "pcp"}, {"pcp-lambda", "0.25"}};
    CHECK(solver_config_entries(pcp) == p);
}
