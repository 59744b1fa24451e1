#pragma once

#include "rtt/error.hpp"
#include "rtt/lexer.hpp"
#include "rtt/types.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rtt {

enum class Op {
    Not, Neg,
    And, Or,
    Add, Sub, Mul, Div, Mod,
    Eq, Ne, Lt, Le, Gt, Ge,
};

std::string_view op_symbol(Op op);
bool is_comparison(Op op);
bool is_logical(Op op);
bool is_arithmetic(Op op);

/// Reference to a variable, possibly in another trace and/or an earlier cycle.
///
/// Surface forms inside a cell of column `p::X` (two traces p, q):
///   `Y`      Y in trace p          `q::Y`  Y in trace q
///   `::Y`    Y in the other trace  `q::`   X in trace q
///   `::`     X in the other trace
/// Any form may carry a back-reference suffix `[-n]`.
struct VarRef {
    std::string trace;     // empty: unspecified
    std::string variable;  // empty: the column's variable
    bool other = false;    // leading `::` without a trace name
    int offset = 0;        // <= 0

    bool qualified() const { return !trace.empty() && !variable.empty() && !other; }
    std::string qualified_name() const;
    bool operator==(const VarRef&) const = default;
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

enum class ExprKind { Int, Bool, EnumConst, Var, Global, Unary, Binary };

struct Expr {
    ExprKind kind = ExprKind::Int;
    std::int64_t value = 0;   // Int / Bool literal
    std::string name;         // EnumConst constant, Global name
    std::string qualifier;    // EnumConst `Type.` qualifier, may be empty
    VarRef ref;               // Var
    Op op = Op::Not;          // Unary / Binary
    ExprPtr lhs, rhs;
    SourcePos pos;

    static ExprPtr integer(std::int64_t v, SourcePos pos = {});
    static ExprPtr boolean(bool b, SourcePos pos = {});
    static ExprPtr enum_const(std::string constant, std::string qualifier = {}, SourcePos pos = {});
    static ExprPtr var(VarRef ref, SourcePos pos = {});
    static ExprPtr global(std::string name, SourcePos pos = {});
    static ExprPtr unary(Op op, ExprPtr e, SourcePos pos = {});
    static ExprPtr binary(Op op, ExprPtr a, ExprPtr b, SourcePos pos = {});
};

/// Structural equality, ignoring source positions.
bool equal(const Expr& a, const Expr& b);
std::string to_string(const Expr& e);

/// Conjunction of expressions; `true` for an empty list.
ExprPtr conjunction(const std::vector<ExprPtr>& parts);

// ---------------------------------------------------------------------------
// Cells

enum class ColumnKind { Input, Output, Pause };

std::string_view to_string(ColumnKind k);

/// Everything the cell parser and desugarer need to know about a cell's column.
struct CellContext {
    std::string trace;
    std::string variable;  // for pause columns: "stutt"
    ColumnKind kind = ColumnKind::Input;
    Type type;
    std::vector<std::string> traces;
    std::set<std::string, std::less<>> globals;
    const EnumRegistry* enums = nullptr;

    std::string column_name() const { return trace + "::" + variable; }
};

/// One comma-separated part of a cell.
struct CellItem {
    enum class Kind { DontCare, Interval, Compare, Bare, Constraint };
    Kind kind = Kind::DontCare;
    Op cmp = Op::Eq;  // Compare
    ExprPtr a;        // Interval lower / Compare rhs / Bare / Constraint
    ExprPtr b;        // Interval upper

    bool operator==(const CellItem& other) const;
};

/// A cell: comma-list of abbreviations, read as their conjunction.
struct CellExpr {
    std::vector<CellItem> items;

    bool is_dont_care() const;
    bool operator==(const CellExpr&) const = default;
    static CellExpr dont_care();
};

/// Surface syntax of a cell (the inverse of parse_cell up to whitespace).
std::string to_string(const CellExpr& cell);

/// Parses cell text under its column context. Throws ParseError (with a
/// position inside the cell text) on syntax errors, on `::` forms when the
/// table does not have exactly two traces, and on back-references to globals.
CellExpr parse_cell(std::string_view text, const CellContext& context, SourcePos origin = {1, 1});

/// Rewrites abbreviations into one Boolean constraint with every variable
/// reference fully qualified. Idempotent.
CellExpr desugar(const CellExpr& cell, const CellContext& context);

/// The constraint of a desugared cell.
ExprPtr constraint_of(const CellExpr& desugared);

// ---------------------------------------------------------------------------
// Expressions outside tables (reactive programs)

/// How bare identifiers resolve while parsing.
struct NameScope {
    std::vector<std::string> traces;                 // for `::` forms
    std::set<std::string, std::less<>> globals;
    const EnumRegistry* enums = nullptr;
    bool allow_relational = true;                    // `::` forms
    bool allow_backrefs = true;                      // `[-n]`
};

/// Parses one expression from the stream (stops at the first token that
/// cannot continue it).
ExprPtr parse_expression(TokenStream& ts, const NameScope& scope);

// ---------------------------------------------------------------------------
// Typing

struct Symbols {
    std::map<std::string, Type, std::less<>> vars;     // qualified "t::x" or plain "x"
    std::map<std::string, Type, std::less<>> globals;
    const EnumRegistry* enums = nullptr;
};

/// Type of `e`. Throws TypeError on unknown identifiers, type mismatches,
/// and ambiguous enum constants.
Type typecheck(const Expr& e, const Symbols& symbols);

/// Resolves an enum constant node to (type, ordinal). Throws TypeError.
std::pair<EnumTypePtr, int> resolve_enum_constant(const Expr& e, const EnumRegistry* enums);

/// Largest back-reference depth in `e` (0 if none).
int max_backref(const Expr& e);

/// Visits every variable reference.
void for_each_var(const Expr& e, const std::function<void(const VarRef&)>& fn);
bool mentions_globals(const Expr& e);

// ---------------------------------------------------------------------------
// Evaluation

/// A view of current and past valuations in slot order.
/// `past` holds `depth` frames of `width` slots each, oldest first.
struct EvalEnv {
    std::span<const std::int64_t> current;
    std::span<const std::int64_t> past;
    std::size_t width = 0;
    std::span<const std::int64_t> globals;

    std::size_t depth() const { return width == 0 ? 0 : past.size() / width; }
};

struct EvalResult {
    std::int64_t value = 0;
    bool division_by_zero = false;
};

/// An expression bound to slot indices, ready for repeated evaluation.
///
/// Boolean atoms (comparisons and Boolean variable reads) whose operands read
/// history that does not exist yet, or divide by zero, evaluate to FALSE.
class CompiledExpr {
public:
    CompiledExpr() = default;

    EvalResult evaluate(const EvalEnv& env) const;
    bool holds(const EvalEnv& env) const { return evaluate(env).value != 0; }
    bool empty() const { return nodes_.empty(); }

private:
    friend class ExprCompiler;

    enum class Code : std::uint8_t { Const, Var, Global, Unary, Binary };
    struct Node {
        Code code = Code::Const;
        Op op = Op::Not;
        bool atom = false;
        std::int64_t imm = 0;
        int slot = 0;
        int offset = 0;
        int a = -1;
        int b = -1;
    };
    enum class Status : std::uint8_t { Ok, MissingHistory, DivByZero };

    std::pair<std::int64_t, Status> eval(int index, const EvalEnv& env, bool& div0) const;

    std::vector<Node> nodes_;
    int root_ = -1;
};

/// Maps names to slots. Variable keys are qualified names or plain names,
/// matching how the expression refers to them.
struct SlotMap {
    std::map<std::string, int, std::less<>> vars;
    std::map<std::string, int, std::less<>> globals;
};

/// Binds a typechecked expression. Throws TypeError if a name has no slot.
CompiledExpr compile(const Expr& e, const Symbols& symbols, const SlotMap& slots);

/// Convenience for one-off evaluation: history frames oldest first, the
/// last frame being the current one.
class History {
public:
    explicit History(std::size_t width) : width_(width) {}
    void push(std::vector<std::int64_t> frame);
    std::size_t size() const { return frames_.size() / (width_ ? width_ : 1); }
    EvalEnv env(std::span<const std::int64_t> globals) const;

private:
    std::size_t width_;
    std::vector<std::int64_t> frames_;
};

} // namespace rtt
