#pragma once

#include "rtt/table.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace rtt {

struct AutomatonState {
    int id = 0;
    int row = -1;       // source row id
    int copy = 0;       // 1-based position within the row's unrolled duration
    int instance = 0;   // unrolled occurrence of the row; equal instance = stay edge
    ExprPtr input_guard;
    ExprPtr output_guard;
    bool omega = false;
    bool progress = false;
};

/// Where a token may go after one cycle.
struct Successors {
    std::vector<int> states;  // sorted, unique
    bool accept = false;      // the table may end here
};

class RowAutomaton {
public:
    std::vector<AutomatonState> states;
    Successors initial;
    std::vector<Successors> next;  // indexed by state id

    bool is_stay(int from, int to) const { return states[from].instance == states[to].instance; }
    std::size_t edge_count() const;

    /// Node/edge listing, one item per line, stable order.
    std::string to_graph() const;
};

/// Unrolls durations and groups into a token automaton. The table should be
/// validated first; throws Error on structures it cannot encode.
RowAutomaton compile(const RelationalTable& table);

/// Applies a state permutation (`perm[old] = new`). Used to test that
/// verdicts do not depend on numbering.
RowAutomaton renumber(const RowAutomaton& a, const std::vector<int>& perm);

/// Guards bound to a slot layout.
class BoundAutomaton {
public:
    BoundAutomaton(const RowAutomaton& automaton, const Symbols& symbols, const SlotMap& slots);

    const RowAutomaton& automaton() const { return *a_; }
    EvalResult input(int state, const EvalEnv& env) const { return in_[state].evaluate(env); }
    EvalResult output(int state, const EvalEnv& env) const { return out_[state].evaluate(env); }

private:
    const RowAutomaton* a_;
    std::vector<CompiledExpr> in_, out_;
};

struct RunToken {
    int state = 0;
    /// Progress states this token was reached from by a stay edge. Empty means
    /// it was reached some other way and is never pruned.
    std::vector<int> stay_sources;

    bool operator==(const RunToken&) const = default;
    auto operator<=>(const RunToken&) const = default;
};

struct TokenSet {
    std::vector<RunToken> tokens;            // sorted by state, one per state
    std::vector<int> progress_parents;    // progress states that survived the last step

    bool empty() const { return tokens.empty(); }
    bool has_omega(const RowAutomaton& a) const;
    bool operator==(const TokenSet&) const = default;
    auto operator<=>(const TokenSet&) const = default;
};

enum class Fate { Uncovered, Violated, Survived, Pruned };
std::string_view to_string(Fate f);

struct StepEvents {
    bool any_accept = false;
    bool all_uncovered = false;
    bool any_violation = false;
    bool division_by_zero = false;
    std::vector<std::pair<int, Fate>> fates;  // per token, in token order

    bool any_survivor() const;
};

TokenSet initial_tokens(const RowAutomaton& a);

/// One cycle: classifies every token under `env` and moves the survivors.
std::pair<TokenSet, StepEvents> successors(const BoundAutomaton& a, const TokenSet& tokens, const EvalEnv& env);

} // namespace rtt
