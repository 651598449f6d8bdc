// JSON views of verifier and synthesis reports. Runtimes are left out so the
// same inputs always serialize to the same bytes.
#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "mctl/error.hpp"
#include "mctl/estimates.hpp"
#include "mctl/schedule.hpp"
#include "mctl/synthesis.hpp"

namespace mctl {

namespace estimates {

inline void to_json(nlohmann::json& j, const BoundReport& r) {
    j = {{"name", r.name},       {"lhs", r.lhs},   {"rhs", r.rhs},
         {"slack", r.slack()},   {"pass", r.pass}, {"tol", r.tol},
         {"hypothesis_ok", r.hypothesis_ok}};
    if (!r.note.empty()) j["note"] = r.note;
}

inline void to_json(nlohmann::json& j, const LedgerEntry& e) {
    j = {{"name", e.name}, {"measured", e.measured}, {"budget", e.budget}, {"pass", e.pass}};
}

inline void to_json(nlohmann::json& j, const BudgetLedger& l) {
    j = {{"eps", l.eps},
         {"entries", l.entries},
         {"closure", {{"lhs", l.closure_lhs}, {"rhs", l.closure_rhs}, {"pass", l.closure_pass}}},
         {"all_pass", l.all_pass()}};
}

}  // namespace estimates

namespace synthesis {

inline void to_json(nlohmann::json& j, const SynthesisReport& r) {
    const SynthesisPlan& p = r.plan;
    j = {{"plan",
          {{"eta", p.eta},
           {"v1", p.v1},
           {"T1", p.t1},
           {"M_eps", p.amplification},
           {"n_iter", p.n_iter},
           {"lead_time", p.lead_time},
           {"window", p.window},
           {"v0_eta_min", p.v0_eta.size() ? p.v0_eta.min() : 0.0}}},
         {"approximants",
          {{"sigma", r.sigma}, {"delta_floor", r.delta_floor}, {"iterations", r.approximant_iterations}}},
         {"search", {{"T1_halvings", r.t1_halvings}, {"windows_tried", r.windows_tried}}},
         {"stages",
          {{"target_approximation", r.stages.target_approximation},
           {"initial_approximation", r.stages.initial_approximation},
           {"cutoff", r.stages.cutoff},
           {"semigroup", r.stages.semigroup},
           {"phase1_smooth", r.stages.phase1_smooth},
           {"phase1", r.stages.phase1},
           {"phase2", r.stages.phase2}}},
         {"ledger", r.ledger},
         {"eps", r.eps},
         {"phase1_error", r.phase1_error},
         {"final_error", r.final_error},
         {"phase2_thm14_bound", r.thm14_bound_phase2},
         {"step_dt", r.step_dt},
         {"success", r.success}};
    if (!r.note.empty()) j["note"] = r.note;
}

}  // namespace synthesis

/// Writes to a sibling temporary and renames, so readers never see a partial file.
inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw ConfigError("cannot write " + tmp.string());
        out << text;
        if (!out) throw ConfigError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    write_text_atomic(path, j.dump(2) + "\n");
}

}  // namespace mctl
