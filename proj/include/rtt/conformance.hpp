#pragma once

#include "rtt/automaton.hpp"
#include "rtt/system.hpp"
#include "rtt/table.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace rtt {

// ---------------------------------------------------------------------------
// Traces

/// Recorded cycles of one system. Values are raw (see Type).
struct Trace {
    std::string name;
    std::vector<std::string> variables;            // unqualified
    std::vector<std::vector<std::int64_t>> cycles;  // one value per variable

    std::size_t length() const { return cycles.size(); }
};

/// Reads `trace::var=value ...` lines (`#` comments, blank lines skipped).
/// The `trace::` prefix may be omitted. Variables the table does not know
/// are skipped. Throws ParseError on malformed lines, unknown values or
/// lines assigning different variable sets.
Trace parse_trace(std::string_view text, const RelationalTable& table, const std::string& trace);
std::string format_trace(const Trace& trace, const RelationalTable& table);

// ---------------------------------------------------------------------------
// Monitoring

enum class VerdictKind { Conforms, ConformsWeak, Violation, NotCovered, Inconclusive };
std::string_view to_string(VerdictKind k);

struct Schedule {
    GlobalBinding binding;
    std::vector<std::vector<bool>> stutter;  // per super-step, per trace
    std::vector<std::vector<int>> rows;      // rows of the live tokens entering each super-step
};

struct Verdict {
    VerdictKind kind = VerdictKind::Inconclusive;
    std::size_t step = 0;          // violation / death step, or super-steps consumed
    Schedule witness;              // accepting run, or the run up to the reported failure
    std::vector<int> failed_rows;  // violation only
    std::vector<std::string> failed_cells;
    std::string summary;
};

struct MonitorOptions {
    std::size_t max_steps = std::numeric_limits<std::size_t>::max();
    std::size_t max_nodes = 2'000'000;
    std::optional<GlobalBinding> binding;                  // restrict the global search
    /// Restricts the stutter search. Within the schedule, a forced stutter of an
    /// exhausted trace is taken as recorded, so a death there is reported.
    std::optional<std::vector<std::vector<bool>>> schedule;
};

/// Traces are matched to table traces by name.
Verdict monitor(const std::vector<Trace>& traces, const RelationalTable& table, const MonitorOptions& options = {});
Verdict monitor(const std::vector<Trace>& traces, const RelationalTable& table, const RowAutomaton& automaton,
                const MonitorOptions& options = {});

// ---------------------------------------------------------------------------
// Model checking

enum class Mode { Weak, Strict };
enum class Outcome { Holds, Fails, Unknown };
std::string_view to_string(Mode m);
std::string_view to_string(Outcome o);

struct CexStep {
    std::vector<std::int64_t> inputs;   // product inputs, ProductSystem::inputs() order
    std::vector<std::int64_t> visible;  // frame after the step, CheckLayout order
    std::vector<int> rows;              // rows of live tokens entering the step
};

struct Counterexample {
    GlobalBinding binding;
    std::vector<CexStep> steps;
    std::optional<std::size_t> loop_start;  // lasso: steps[loop_start..] repeat
    std::vector<std::string> diagnostics;

    /// Per-trace recorded cycles induced by the counterexample (stuttering
    /// super-steps omitted), and the stutter schedule.
    std::vector<Trace> traces(const ProductSystem& sys) const;
    std::vector<std::vector<bool>> schedule(const ProductSystem& sys) const;
};

struct CheckStats {
    std::size_t states = 0;
    std::size_t transitions = 0;
    double seconds = 0;
};

struct CheckResult {
    Mode mode = Mode::Weak;
    Outcome outcome = Outcome::Unknown;
    std::optional<Counterexample> counterexample;
    CheckStats stats;
    std::string message;

    bool holds() const { return outcome == Outcome::Holds; }
};

struct CheckOptions {
    std::size_t max_states = 1'000'000;
};

/// Names and types of the visible frame: per trace `t::stutt`, then every
/// variable of the component in declaration order.
struct CheckLayout {
    std::vector<std::string> names;
    std::vector<Type> types;
};
CheckLayout check_layout(const ProductSystem& sys);

/// Throws Error unless traces, column kinds and column types line up.
void check_compatible(const ProductSystem& sys, const RelationalTable& table);

/// Throws Error when the product does not match the table (traces, column
/// kinds or types, or cells referring to unknown variables).
CheckResult check_weak(const ProductSystem& sys, const RelationalTable& table, const CheckOptions& options = {});
CheckResult check_strict(const ProductSystem& sys, const RelationalTable& table, const CheckOptions& options = {});
CheckResult check(const ProductSystem& sys, const RelationalTable& table, Mode mode, const CheckOptions& options = {});

// ---------------------------------------------------------------------------
// Reports

std::string format_verdict(const Verdict& v, const RelationalTable& table);
std::string format_verdict_json(const Verdict& v, const RelationalTable& table);
/// `k | trace::var=value ... | rows ...`, one line per super-step.
std::string format_counterexample(const Counterexample& cex, const ProductSystem& sys, const RelationalTable& table);
std::string format_result(const CheckResult& r, const ProductSystem& sys, const RelationalTable& table);
std::string format_result_json(const CheckResult& r, const ProductSystem& sys, const RelationalTable& table);

} // namespace rtt
