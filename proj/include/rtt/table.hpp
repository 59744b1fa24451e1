#pragma once

#include "rtt/expr.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace rtt {

/// Name of the implicit Boolean variable wired to a trace's pause column.
inline constexpr std::string_view kStutterVar = "stutt";

/// Repetition bounds of a row or group.
///
/// `upper == nullopt` means unbounded but finite; `omega` means infinite
/// repetition (lower 1, no upper bound, no progress flag).
struct Duration {
    std::int64_t lower = 1;
    std::optional<std::int64_t> upper = 1;
    bool omega = false;
    bool progress = false;

    static Duration exactly(std::int64_t n) { return {n, n, false, false}; }
    static Duration between(std::int64_t lo, std::int64_t hi) { return {lo, hi, false, false}; }
    static Duration at_least(std::int64_t lo) { return {lo, std::nullopt, false, false}; }
    static Duration infinite() { return {1, std::nullopt, true, false}; }

    bool unbounded() const { return omega || !upper; }
    bool allows(std::int64_t count) const;
    bool operator==(const Duration&) const = default;
};

/// `1`, `[1,5]`, `>=6`, `-`, `omega`, with optional `p` suffix.
std::string to_string(const Duration& d);
Duration parse_duration(TokenStream& ts);
Duration parse_duration(std::string_view text);

struct ColumnDecl {
    std::string trace;
    std::string variable;
    ColumnKind kind = ColumnKind::Input;
    Type type;

    std::string name() const { return trace + "::" + variable; }
    bool operator==(const ColumnDecl&) const = default;
};

struct GlobalDecl {
    std::string name;
    Type type;
    bool operator==(const GlobalDecl&) const = default;
};

/// A row or a group of rows. Groups nest; a row's cells are keyed by
/// column name (`trace::var`, pause columns as `trace::stutt`).
struct Block {
    enum class Kind { Row, Group };
    Kind kind = Kind::Row;
    Duration duration;
    int row_id = -1;
    std::map<std::string, CellExpr, std::less<>> cells;
    std::vector<Block> children;
    SourcePos pos;

    bool is_row() const { return kind == Kind::Row; }
    bool operator==(const Block&) const = default;
};

/// Guards of one row, split by column kind and desugared.
struct RowGuards {
    ExprPtr input;   // input and pause columns
    ExprPtr output;  // output columns
};

/// Values of the global variables, in declaration order.
using GlobalBinding = std::vector<std::int64_t>;

class RelationalTable {
public:
    std::string name;
    std::vector<std::string> traces;
    std::vector<GlobalDecl> globals;
    std::optional<int> history;
    EnumRegistry enums;
    std::vector<ColumnDecl> columns;
    Block body;  // the root group

    const ColumnDecl* find_column(std::string_view qualified) const;
    bool has_pause_column(std::string_view trace) const;
    CellContext cell_context(const ColumnDecl& column) const;

    /// Column variables, pause variables, and variables referenced in other
    /// traces under a name that has a column in some trace (typed like it).
    Symbols symbols() const;
    /// Column name -> index in `columns`.
    SlotMap column_slots() const;

    /// All rows in document order.
    std::vector<const Block*> rows() const;
    const Block* row(int id) const;

    /// Desugared input/output guards; unlisted cells are don't-care, except
    /// pause cells, which default to FALSE.
    RowGuards guards(const Block& row) const;
    ExprPtr cell_constraint(const Block& row, const ColumnDecl& column) const;

    /// Declared history bound, or the deepest back-reference.
    int history_bound() const;

    /// All combinations of global values, lexicographic in declaration order.
    std::vector<GlobalBinding> global_bindings() const;
    std::string format_binding(const GlobalBinding& g) const;
};

/// Structural equality (cells compared as parsed ASTs).
bool same_table(const RelationalTable& a, const RelationalTable& b);

/// Parses the `.rtt` block format. Throws ParseError.
RelationalTable parse_table(std::string_view text);
/// Canonical text; `parse_table(print_table(t))` is structurally equal to `t`.
std::string print_table(const RelationalTable& table);

/// Well-formedness diagnostics; empty iff the table is well-formed.
std::vector<Diagnostic> validate(const RelationalTable& table);

// ---------------------------------------------------------------------------
// Concrete tables

struct ConcreteRow {
    std::vector<std::int64_t> values;  // one per column
    std::int64_t count = 1;
    bool operator==(const ConcreteRow&) const = default;
};

struct ConcreteTable {
    std::vector<ColumnDecl> columns;
    std::vector<ConcreteRow> rows;

    /// One valuation per cycle, rows unrolled by their counts.
    std::vector<std::vector<std::int64_t>> cycles() const;
};

/// Reads a parsed table whose cells are all literals (or equalities with a
/// literal) and whose durations are exact. Throws Error otherwise.
ConcreteTable to_concrete(const RelationalTable& table);
RelationalTable from_concrete(const ConcreteTable& concrete, const RelationalTable& like);

/// How often each row and group is unwound. For a group, `iterations`
/// holds one choice per child for each repetition.
struct RepetitionChoice {
    std::int64_t count = 1;
    std::vector<std::vector<RepetitionChoice>> iterations;
};

/// Every row and group at its lower bound. Throws Error for omega durations.
RepetitionChoice minimal_choice(const Block& block);

/// Unwinds `table` under `choice`, choosing for every non-literal cell the
/// smallest values (column order) that satisfy the row. Throws Error on
/// out-of-bounds counts, omega, unsatisfiable rows, or cells that refer to
/// variables without a column.
ConcreteTable instantiate(const RelationalTable& table, const GlobalBinding& globals,
                          const RepetitionChoice& choice);

struct InstanceResult {
    bool holds = false;
    GlobalBinding binding;        // witness, or best attempt
    std::vector<int> rows;        // row id per matched cycle
    std::size_t matched_cycles = 0;
    std::string explanation;
};

/// Whether `concrete` is one of the tables described by `table`. Searches all
/// global bindings (or only `fixed`) and all unwindings. Throws Error when
/// the column sets differ.
InstanceResult is_instance(const ConcreteTable& concrete, const RelationalTable& table,
                           const std::optional<GlobalBinding>& fixed = std::nullopt);

// ---------------------------------------------------------------------------
// Structural unwinding

/// Interprets the table's row/group structure directly: a position is a path
/// of (child index, iteration) pairs down to a row plus the number of times
/// that row instance has been applied. Unbounded counters saturate at the
/// lower bound.
class Unwinder {
public:
    using Position = std::vector<std::int64_t>;

    struct Next {
        std::vector<Position> positions;  // sorted, unique
        bool accept = false;              // the table may end here
    };

    explicit Unwinder(const Block& root);

    /// Positions of the first cycle.
    Next start() const;
    /// Positions after applying `pos` for one cycle.
    Next after(const Position& pos) const;
    const Block& row_at(const Position& pos) const;

private:
    struct Frame {
        const Block* group;
        std::int64_t index;
        std::int64_t iteration;
    };
    void enter(std::vector<Frame> frames, Next& out, std::set<std::vector<std::int64_t>>& seen) const;
    void advance(std::vector<Frame> frames, Next& out, std::set<std::vector<std::int64_t>>& seen) const;
    std::vector<Frame> decode(const Position& pos, std::int64_t& row_count) const;
    static Position encode(const std::vector<Frame>& frames, std::int64_t row_count);

    const Block& root_;
};

} // namespace rtt
