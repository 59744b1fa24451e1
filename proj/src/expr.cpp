#include "rtt/expr.hpp"

#include <algorithm>
#include <sstream>

namespace rtt {

// ---------------------------------------------------------------------------
// Operators and nodes

std::string_view op_symbol(Op op)
{
    switch (op) {
    case Op::Not: return "!";
    case Op::Neg: return "-";
    case Op::And: return "&&";
    case Op::Or: return "||";
    case Op::Add: return "+";
    case Op::Sub: return "-";
    case Op::Mul: return "*";
    case Op::Div: return "/";
    case Op::Mod: return "mod";
    case Op::Eq: return "=";
    case Op::Ne: return "!=";
    case Op::Lt: return "<";
    case Op::Le: return "<=";
    case Op::Gt: return ">";
    case Op::Ge: return ">=";
    }
    return "?";
}

bool is_comparison(Op op)
{
    return op == Op::Eq || op == Op::Ne || op == Op::Lt || op == Op::Le || op == Op::Gt || op == Op::Ge;
}

bool is_logical(Op op) { return op == Op::And || op == Op::Or || op == Op::Not; }

bool is_arithmetic(Op op)
{
    return op == Op::Add || op == Op::Sub || op == Op::Mul || op == Op::Div || op == Op::Mod || op == Op::Neg;
}

std::string VarRef::qualified_name() const
{
    if (trace.empty())
        return variable;
    return trace + "::" + variable;
}

ExprPtr Expr::integer(std::int64_t v, SourcePos pos)
{
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Int;
    e->value = v;
    e->pos = pos;
    return e;
}

ExprPtr Expr::boolean(bool b, SourcePos pos)
{
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Bool;
    e->value = b ? 1 : 0;
    e->pos = pos;
    return e;
}

ExprPtr Expr::enum_const(std::string constant, std::string qualifier, SourcePos pos)
{
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::EnumConst;
    e->name = std::move(constant);
    e->qualifier = std::move(qualifier);
    e->pos = pos;
    return e;
}

ExprPtr Expr::var(VarRef ref, SourcePos pos)
{
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Var;
    e->ref = std::move(ref);
    e->pos = pos;
    return e;
}

ExprPtr Expr::global(std::string name, SourcePos pos)
{
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Global;
    e->name = std::move(name);
    e->pos = pos;
    return e;
}

ExprPtr Expr::unary(Op op, ExprPtr a, SourcePos pos)
{
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Unary;
    e->op = op;
    e->lhs = std::move(a);
    e->pos = pos;
    return e;
}

ExprPtr Expr::binary(Op op, ExprPtr a, ExprPtr b, SourcePos pos)
{
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Binary;
    e->op = op;
    e->lhs = std::move(a);
    e->rhs = std::move(b);
    e->pos = pos;
    return e;
}

bool equal(const Expr& a, const Expr& b)
{
    if (a.kind != b.kind)
        return false;
    switch (a.kind) {
    case ExprKind::Int:
    case ExprKind::Bool: return a.value == b.value;
    case ExprKind::EnumConst: return a.name == b.name && a.qualifier == b.qualifier;
    case ExprKind::Var: return a.ref == b.ref;
    case ExprKind::Global: return a.name == b.name;
    case ExprKind::Unary: return a.op == b.op && equal(*a.lhs, *b.lhs);
    case ExprKind::Binary: return a.op == b.op && equal(*a.lhs, *b.lhs) && equal(*a.rhs, *b.rhs);
    }
    return false;
}

namespace {

int precedence(const Expr& e)
{
    if (e.kind == ExprKind::Unary)
        return 6;
    if (e.kind != ExprKind::Binary)
        return 7;
    switch (e.op) {
    case Op::Or: return 1;
    case Op::And: return 2;
    case Op::Add:
    case Op::Sub: return 4;
    case Op::Mul:
    case Op::Div:
    case Op::Mod: return 5;
    default: return 3;
    }
}

void print(std::ostream& os, const Expr& e, int min_prec)
{
    bool paren = precedence(e) < min_prec;
    if (paren)
        os << '(';
    switch (e.kind) {
    case ExprKind::Int: os << e.value; break;
    case ExprKind::Bool: os << (e.value ? "TRUE" : "FALSE"); break;
    case ExprKind::EnumConst:
        if (!e.qualifier.empty())
            os << e.qualifier << '.';
        os << e.name;
        break;
    case ExprKind::Global: os << e.name; break;
    case ExprKind::Var:
        if (e.ref.other)
            os << "::" << e.ref.variable;
        else if (!e.ref.trace.empty())
            os << e.ref.trace << "::" << e.ref.variable;
        else
            os << e.ref.variable;
        if (e.ref.offset != 0)
            os << '[' << e.ref.offset << ']';
        break;
    case ExprKind::Unary:
        os << op_symbol(e.op);
        print(os, *e.lhs, 6);
        break;
    case ExprKind::Binary: {
        int p = precedence(e);
        print(os, *e.lhs, p == 3 ? 4 : p);
        os << ' ' << op_symbol(e.op) << ' ';
        print(os, *e.rhs, p + 1);
        break;
    }
    }
    if (paren)
        os << ')';
}

} // namespace

std::string to_string(const Expr& e)
{
    std::ostringstream os;
    print(os, e, 0);
    return os.str();
}

ExprPtr conjunction(const std::vector<ExprPtr>& parts)
{
    if (parts.empty())
        return Expr::boolean(true);
    ExprPtr acc = parts.front();
    for (std::size_t i = 1; i < parts.size(); ++i)
        acc = Expr::binary(Op::And, acc, parts[i]);
    return acc;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

std::optional<Op> comparison_token(const Token& t)
{
    if (t.kind != TokenKind::Punct)
        return std::nullopt;
    if (t.text == "=" || t.text == "==")
        return Op::Eq;
    if (t.text == "!=" || t.text == "<>")
        return Op::Ne;
    if (t.text == "<")
        return Op::Lt;
    if (t.text == "<=")
        return Op::Le;
    if (t.text == ">")
        return Op::Gt;
    if (t.text == ">=")
        return Op::Ge;
    return std::nullopt;
}

bool is_keyword(std::string_view w)
{
    return w == "and" || w == "or" || w == "not" || w == "mod" || w == "TRUE" || w == "FALSE"
        || w == "true" || w == "false";
}

class ExprParser {
public:
    ExprParser(TokenStream& ts, const NameScope& scope) : ts_(ts), scope_(scope) {}

    ExprPtr parse() { return parse_or(); }

private:
    ExprPtr parse_or()
    {
        auto lhs = parse_and();
        for (;;) {
            auto pos = ts_.peek().pos;
            if (ts_.accept("||") || ts_.accept("|") || ts_.accept_ident("or"))
                lhs = Expr::binary(Op::Or, lhs, parse_and(), pos);
            else
                return lhs;
        }
    }

    ExprPtr parse_and()
    {
        auto lhs = parse_cmp();
        for (;;) {
            auto pos = ts_.peek().pos;
            if (ts_.accept("&&") || ts_.accept("&") || ts_.accept_ident("and"))
                lhs = Expr::binary(Op::And, lhs, parse_cmp(), pos);
            else
                return lhs;
        }
    }

    ExprPtr parse_cmp()
    {
        auto lhs = parse_add();
        if (auto op = comparison_token(ts_.peek())) {
            auto pos = ts_.next().pos;
            auto rhs = parse_add();
            lhs = Expr::binary(*op, lhs, rhs, pos);
            if (comparison_token(ts_.peek()))
                ts_.fail("comparisons do not chain; use parentheses");
        }
        return lhs;
    }

    ExprPtr parse_add()
    {
        auto lhs = parse_mul();
        for (;;) {
            auto pos = ts_.peek().pos;
            if (ts_.accept("+"))
                lhs = Expr::binary(Op::Add, lhs, parse_mul(), pos);
            else if (ts_.accept("-"))
                lhs = Expr::binary(Op::Sub, lhs, parse_mul(), pos);
            else
                return lhs;
        }
    }

    ExprPtr parse_mul()
    {
        auto lhs = parse_unary();
        for (;;) {
            auto pos = ts_.peek().pos;
            if (ts_.accept("*"))
                lhs = Expr::binary(Op::Mul, lhs, parse_unary(), pos);
            else if (ts_.accept("/"))
                lhs = Expr::binary(Op::Div, lhs, parse_unary(), pos);
            else if (ts_.accept("%") || ts_.accept_ident("mod"))
                lhs = Expr::binary(Op::Mod, lhs, parse_unary(), pos);
            else
                return lhs;
        }
    }

    ExprPtr parse_unary()
    {
        auto pos = ts_.peek().pos;
        if (ts_.accept("-")) {
            if (ts_.peek().kind == TokenKind::Int)
                return Expr::integer(-ts_.next().value, pos);
            return Expr::unary(Op::Neg, parse_unary(), pos);
        }
        if (ts_.accept("!") || ts_.accept_ident("not"))
            return Expr::unary(Op::Not, parse_unary(), pos);
        return parse_primary();
    }

    int parse_backref()
    {
        if (ts_.peek().is("[") && ts_.peek(1).is("-")) {
            if (!scope_.allow_backrefs)
                ts_.fail("back-references are not allowed here");
            ts_.next();
            ts_.next();
            if (ts_.peek().kind != TokenKind::Int)
                ts_.fail("expected back-reference depth");
            auto n = ts_.next().value;
            ts_.expect("]");
            return static_cast<int>(-n);
        }
        return 0;
    }

    void require_two_traces(const Token& at)
    {
        if (!scope_.allow_relational)
            TokenStream::fail_at(at, "relational references are not allowed here");
        if (scope_.traces.size() != 2)
            TokenStream::fail_at(at, "shorthand requires exactly two traces");
    }

    ExprPtr parse_primary()
    {
        const Token& t = ts_.peek();
        auto pos = t.pos;
        if (t.kind == TokenKind::Int) {
            ts_.next();
            return Expr::integer(t.value, pos);
        }
        if (ts_.accept("(")) {
            auto e = parse_or();
            ts_.expect(")");
            return e;
        }
        if (t.is("::")) {
            Token at = ts_.next();
            require_two_traces(at);
            VarRef ref;
            ref.other = true;
            if (ts_.peek().kind == TokenKind::Ident && !is_keyword(ts_.peek().text))
                ref.variable = ts_.next().text;
            ref.offset = parse_backref();
            return Expr::var(std::move(ref), pos);
        }
        if (t.kind != TokenKind::Ident)
            ts_.fail("expected expression, found " + describe(t));
        if (t.text == "TRUE" || t.text == "true") {
            ts_.next();
            return Expr::boolean(true, pos);
        }
        if (t.text == "FALSE" || t.text == "false") {
            ts_.next();
            return Expr::boolean(false, pos);
        }
        if (is_keyword(t.text))
            ts_.fail("unexpected keyword '" + t.text + "'");
        Token name = ts_.next();

        if (ts_.peek().is("::")) {
            Token at = ts_.next();
            if (!scope_.allow_relational)
                TokenStream::fail_at(at, "relational references are not allowed here");
            if (!scope_.traces.empty()
                && std::find(scope_.traces.begin(), scope_.traces.end(), name.text) == scope_.traces.end())
                TokenStream::fail_at(name, "unknown trace '" + name.text + "'");
            VarRef ref;
            ref.trace = name.text;
            if (ts_.peek().kind == TokenKind::Ident && !is_keyword(ts_.peek().text))
                ref.variable = ts_.next().text;
            ref.offset = parse_backref();
            return Expr::var(std::move(ref), pos);
        }
        if (ts_.peek().is(".")) {
            ts_.next();
            auto constant = ts_.expect_name();
            if (!scope_.enums || !scope_.enums->find(name.text))
                TokenStream::fail_at(name, "unknown enum type '" + name.text + "'");
            return Expr::enum_const(constant, name.text, pos);
        }
        if (scope_.globals.count(name.text)) {
            if (parse_backref() != 0)
                TokenStream::fail_at(name, "back-reference on global variable '" + name.text + "'");
            return Expr::global(name.text, pos);
        }
        if (scope_.enums && !scope_.enums->declaring(name.text).empty()) {
            if (ts_.peek().is("[") && ts_.peek(1).is("-"))
                ts_.fail("back-reference on enum constant '" + name.text + "'");
            return Expr::enum_const(name.text, {}, pos);
        }
        VarRef ref;
        ref.variable = name.text;
        ref.offset = parse_backref();
        return Expr::var(std::move(ref), pos);
    }

    TokenStream& ts_;
    const NameScope& scope_;
};

NameScope scope_of(const CellContext& ctx)
{
    NameScope s;
    s.traces = ctx.traces;
    s.globals = ctx.globals;
    s.enums = ctx.enums;
    return s;
}

bool syntactically_boolean(const Expr& e)
{
    if (e.kind == ExprKind::Bool)
        return true;
    if (e.kind == ExprKind::Unary)
        return e.op == Op::Not;
    if (e.kind == ExprKind::Binary)
        return is_logical(e.op) || is_comparison(e.op);
    return false;
}

} // namespace

ExprPtr parse_expression(TokenStream& ts, const NameScope& scope)
{
    return ExprParser(ts, scope).parse();
}

std::string_view to_string(ColumnKind k)
{
    switch (k) {
    case ColumnKind::Input: return "in";
    case ColumnKind::Output: return "out";
    case ColumnKind::Pause: return "pause";
    }
    return "?";
}

bool CellItem::operator==(const CellItem& o) const
{
    if (kind != o.kind || cmp != o.cmp)
        return false;
    auto same = [](const ExprPtr& x, const ExprPtr& y) {
        if (!x || !y)
            return !x && !y;
        return equal(*x, *y);
    };
    return same(a, o.a) && same(b, o.b);
}

bool CellExpr::is_dont_care() const
{
    return std::all_of(items.begin(), items.end(),
                       [](const CellItem& i) { return i.kind == CellItem::Kind::DontCare; });
}

CellExpr CellExpr::dont_care()
{
    return CellExpr{{CellItem{}}};
}

std::string to_string(const CellExpr& cell)
{
    std::string out;
    for (std::size_t i = 0; i < cell.items.size(); ++i) {
        if (i)
            out += ", ";
        const auto& it = cell.items[i];
        switch (it.kind) {
        case CellItem::Kind::DontCare: out += "-"; break;
        case CellItem::Kind::Interval: out += "[" + to_string(*it.a) + ", " + to_string(*it.b) + "]"; break;
        case CellItem::Kind::Compare: out += std::string(op_symbol(it.cmp)) + to_string(*it.a); break;
        case CellItem::Kind::Bare:
        case CellItem::Kind::Constraint: out += to_string(*it.a); break;
        }
    }
    return out;
}

CellExpr parse_cell(std::string_view text, const CellContext& context, SourcePos origin)
{
    LexOptions lex;
    lex.comments = false;
    lex.origin = origin;
    TokenStream ts(tokenize(text, lex));
    CellExpr cell;
    auto scope = scope_of(context);
    if (ts.at_end())
        return CellExpr::dont_care();
    for (;;) {
        CellItem item;
        const Token& t = ts.peek();
        if (t.is("-") && (ts.peek(1).is(",") || ts.peek(1).kind == TokenKind::End)) {
            ts.next();
            item.kind = CellItem::Kind::DontCare;
        } else if (t.is("[")) {
            ts.next();
            item.kind = CellItem::Kind::Interval;
            item.a = parse_expression(ts, scope);
            ts.expect(",");
            item.b = parse_expression(ts, scope);
            ts.expect("]");
        } else if (auto op = comparison_token(t)) {
            ts.next();
            item.kind = CellItem::Kind::Compare;
            item.cmp = *op;
            item.a = parse_expression(ts, scope);
        } else {
            item.kind = CellItem::Kind::Bare;
            item.a = parse_expression(ts, scope);
        }
        cell.items.push_back(std::move(item));
        if (ts.at_end())
            break;
        ts.expect(",");
    }
    return cell;
}

namespace {

ExprPtr qualify(const ExprPtr& e, const CellContext& ctx)
{
    switch (e->kind) {
    case ExprKind::Var: {
        VarRef ref = e->ref;
        if (ref.other) {
            if (ctx.traces.size() != 2)
                throw ParseError(e->pos, "shorthand requires exactly two traces");
            ref.trace = ctx.traces[0] == ctx.trace ? ctx.traces[1] : ctx.traces[0];
            ref.other = false;
        } else if (ref.trace.empty()) {
            ref.trace = ctx.trace;
        }
        if (ref.variable.empty())
            ref.variable = ctx.variable;
        if (ref == e->ref)
            return e;
        return Expr::var(std::move(ref), e->pos);
    }
    case ExprKind::Unary: {
        auto a = qualify(e->lhs, ctx);
        return a == e->lhs ? e : Expr::unary(e->op, a, e->pos);
    }
    case ExprKind::Binary: {
        auto a = qualify(e->lhs, ctx);
        auto b = qualify(e->rhs, ctx);
        return (a == e->lhs && b == e->rhs) ? e : Expr::binary(e->op, a, b, e->pos);
    }
    default: return e;
    }
}

} // namespace

CellExpr desugar(const CellExpr& cell, const CellContext& ctx)
{
    VarRef col_ref{ctx.trace, ctx.variable, false, 0};
    auto col = Expr::var(col_ref);
    std::vector<ExprPtr> parts;
    for (const auto& item : cell.items) {
        switch (item.kind) {
        case CellItem::Kind::DontCare: break;
        case CellItem::Kind::Interval:
            parts.push_back(Expr::binary(
                Op::And, Expr::binary(Op::Ge, col, qualify(item.a, ctx)),
                Expr::binary(Op::Le, col, qualify(item.b, ctx))));
            break;
        case CellItem::Kind::Compare: parts.push_back(Expr::binary(item.cmp, col, qualify(item.a, ctx))); break;
        case CellItem::Kind::Bare: {
            auto e = qualify(item.a, ctx);
            if (ctx.type.kind != TypeKind::Bool && syntactically_boolean(*e))
                parts.push_back(e);
            else
                parts.push_back(Expr::binary(Op::Eq, col, e));
            break;
        }
        case CellItem::Kind::Constraint: parts.push_back(qualify(item.a, ctx)); break;
        }
    }
    CellItem out;
    out.kind = CellItem::Kind::Constraint;
    out.a = conjunction(parts);
    return CellExpr{{out}};
}

ExprPtr constraint_of(const CellExpr& desugared)
{
    if (desugared.items.size() != 1 || desugared.items[0].kind != CellItem::Kind::Constraint)
        throw Error("cell is not desugared");
    return desugared.items[0].a;
}

// ---------------------------------------------------------------------------
// Typing

std::pair<EnumTypePtr, int> resolve_enum_constant(const Expr& e, const EnumRegistry* enums)
{
    if (!enums)
        throw TypeError("unknown identifier '" + e.name + "'");
    if (!e.qualifier.empty()) {
        auto t = enums->find(e.qualifier);
        if (!t)
            throw TypeError("unknown enum type '" + e.qualifier + "'");
        auto o = t->ordinal(e.name);
        if (!o)
            throw TypeError("'" + e.name + "' is not a constant of enum " + e.qualifier);
        return {t, *o};
    }
    auto candidates = enums->declaring(e.name);
    if (candidates.empty())
        throw TypeError("unknown identifier '" + e.name + "'");
    if (candidates.size() > 1)
        throw TypeError("ambiguous enum constant '" + e.name + "'; qualify it as Type." + e.name);
    return {candidates[0], *candidates[0]->ordinal(e.name)};
}

namespace {

std::string var_key(const VarRef& ref)
{
    if (ref.other || (ref.variable.empty()))
        throw TypeError("unresolved relational reference");
    return ref.qualified_name();
}

} // namespace

Type typecheck(const Expr& e, const Symbols& symbols)
{
    switch (e.kind) {
    case ExprKind::Int: return Type::integer(e.value, e.value);
    case ExprKind::Bool: return Type::boolean();
    case ExprKind::EnumConst: return Type::enumeration(resolve_enum_constant(e, symbols.enums).first);
    case ExprKind::Var: {
        auto key = var_key(e.ref);
        auto it = symbols.vars.find(key);
        if (it == symbols.vars.end())
            throw TypeError("unknown variable '" + key + "'");
        return it->second;
    }
    case ExprKind::Global: {
        auto it = symbols.globals.find(e.name);
        if (it == symbols.globals.end())
            throw TypeError("unknown global '" + e.name + "'");
        return it->second;
    }
    case ExprKind::Unary: {
        auto t = typecheck(*e.lhs, symbols);
        if (e.op == Op::Not) {
            if (t.kind != TypeKind::Bool)
                throw TypeError("operand of '!' must be Boolean in '" + to_string(e) + "'");
            return t;
        }
        if (t.kind == TypeKind::Enum)
            throw TypeError("arithmetic on enum in '" + to_string(e) + "'");
        if (t.kind != TypeKind::Int)
            throw TypeError("operand of '-' must be an integer in '" + to_string(e) + "'");
        return Type::integer(-t.hi, -t.lo);
    }
    case ExprKind::Binary: {
        auto a = typecheck(*e.lhs, symbols);
        auto b = typecheck(*e.rhs, symbols);
        if (is_logical(e.op)) {
            if (a.kind != TypeKind::Bool || b.kind != TypeKind::Bool)
                throw TypeError("operands of '" + std::string(op_symbol(e.op)) + "' must be Boolean in '"
                                + to_string(e) + "'");
            return Type::boolean();
        }
        if (is_arithmetic(e.op)) {
            if (a.kind == TypeKind::Enum || b.kind == TypeKind::Enum)
                throw TypeError("arithmetic on enum in '" + to_string(e) + "'");
            if (a.kind != TypeKind::Int || b.kind != TypeKind::Int)
                throw TypeError("arithmetic on Boolean in '" + to_string(e) + "'");
            // The result range is not tracked precisely; callers check ranges at runtime.
            return Type::integer(INT32_MIN, INT32_MAX);
        }
        if (e.op == Op::Eq || e.op == Op::Ne) {
            if (!a.compatible(b))
                throw TypeError("cannot compare " + to_string(a) + " with " + to_string(b) + " in '"
                                + to_string(e) + "'");
            return Type::boolean();
        }
        if (a.kind != TypeKind::Int || b.kind != TypeKind::Int)
            throw TypeError("ordering comparison on non-integers in '" + to_string(e) + "'");
        return Type::boolean();
    }
    }
    throw TypeError("bad expression");
}

int max_backref(const Expr& e)
{
    switch (e.kind) {
    case ExprKind::Var: return -e.ref.offset;
    case ExprKind::Unary: return max_backref(*e.lhs);
    case ExprKind::Binary: return std::max(max_backref(*e.lhs), max_backref(*e.rhs));
    default: return 0;
    }
}

void for_each_var(const Expr& e, const std::function<void(const VarRef&)>& fn)
{
    if (e.kind == ExprKind::Var)
        fn(e.ref);
    if (e.lhs)
        for_each_var(*e.lhs, fn);
    if (e.rhs)
        for_each_var(*e.rhs, fn);
}

bool mentions_globals(const Expr& e)
{
    if (e.kind == ExprKind::Global)
        return true;
    return (e.lhs && mentions_globals(*e.lhs)) || (e.rhs && mentions_globals(*e.rhs));
}

// ---------------------------------------------------------------------------
// Evaluation

class ExprCompiler {
public:
    ExprCompiler(const Symbols& symbols, const SlotMap& slots) : symbols_(symbols), slots_(slots) {}

    CompiledExpr run(const Expr& e)
    {
        out_.root_ = emit(e).first;
        return std::move(out_);
    }

private:
    using Node = CompiledExpr::Node;
    using Code = CompiledExpr::Code;

    std::pair<int, Type> emit(const Expr& e)
    {
        Node n;
        Type t = Type::boolean();
        switch (e.kind) {
        case ExprKind::Int:
        case ExprKind::Bool:
            n.code = Code::Const;
            n.imm = e.value;
            t = typecheck(e, symbols_);
            break;
        case ExprKind::EnumConst: {
            auto [et, ord] = resolve_enum_constant(e, symbols_.enums);
            n.code = Code::Const;
            n.imm = ord;
            t = Type::enumeration(et);
            break;
        }
        case ExprKind::Var: {
            t = typecheck(e, symbols_);
            auto key = var_key(e.ref);
            auto it = slots_.vars.find(key);
            if (it == slots_.vars.end())
                throw TypeError("no value slot for variable '" + key + "'");
            n.code = Code::Var;
            n.slot = it->second;
            n.offset = -e.ref.offset;
            break;
        }
        case ExprKind::Global: {
            t = typecheck(e, symbols_);
            auto it = slots_.globals.find(e.name);
            if (it == slots_.globals.end())
                throw TypeError("no value slot for global '" + e.name + "'");
            n.code = Code::Global;
            n.slot = it->second;
            break;
        }
        case ExprKind::Unary:
            t = typecheck(e, symbols_);
            n.code = Code::Unary;
            n.op = e.op;
            n.a = emit(*e.lhs).first;
            break;
        case ExprKind::Binary:
            t = typecheck(e, symbols_);
            n.code = Code::Binary;
            n.op = e.op;
            n.a = emit(*e.lhs).first;
            n.b = emit(*e.rhs).first;
            break;
        }
        bool connective = (n.code == Code::Unary || n.code == Code::Binary) && is_logical(n.op);
        n.atom = t.kind == TypeKind::Bool && !connective;
        out_.nodes_.push_back(n);
        return {static_cast<int>(out_.nodes_.size()) - 1, t};
    }

    const Symbols& symbols_;
    const SlotMap& slots_;
    CompiledExpr out_;
};

CompiledExpr compile(const Expr& e, const Symbols& symbols, const SlotMap& slots)
{
    return ExprCompiler(symbols, slots).run(e);
}

std::pair<std::int64_t, CompiledExpr::Status> CompiledExpr::eval(int index, const EvalEnv& env, bool& div0) const
{
    const Node& n = nodes_[static_cast<std::size_t>(index)];
    std::int64_t v = 0;
    Status st = Status::Ok;
    switch (n.code) {
    case Code::Const: v = n.imm; break;
    case Code::Global: v = env.globals[static_cast<std::size_t>(n.slot)]; break;
    case Code::Var:
        if (n.offset == 0) {
            v = env.current[static_cast<std::size_t>(n.slot)];
        } else if (static_cast<std::size_t>(n.offset) > env.depth()) {
            st = Status::MissingHistory;
        } else {
            auto frame = env.depth() - static_cast<std::size_t>(n.offset);
            v = env.past[frame * env.width + static_cast<std::size_t>(n.slot)];
        }
        break;
    case Code::Unary: {
        auto [x, s] = eval(n.a, env, div0);
        st = s;
        v = n.op == Op::Not ? (x == 0) : -x;
        break;
    }
    case Code::Binary: {
        auto [x, sx] = eval(n.a, env, div0);
        auto [y, sy] = eval(n.b, env, div0);
        st = sx != Status::Ok ? sx : sy;
        switch (n.op) {
        case Op::And: v = (x != 0) && (y != 0); break;
        case Op::Or: v = (x != 0) || (y != 0); break;
        case Op::Add: v = x + y; break;
        case Op::Sub: v = x - y; break;
        case Op::Mul: v = x * y; break;
        case Op::Div:
        case Op::Mod:
            if (st == Status::Ok && y == 0)
                st = Status::DivByZero;
            else if (y != 0)
                v = n.op == Op::Div ? x / y : x % y;
            break;
        case Op::Eq: v = x == y; break;
        case Op::Ne: v = x != y; break;
        case Op::Lt: v = x < y; break;
        case Op::Le: v = x <= y; break;
        case Op::Gt: v = x > y; break;
        case Op::Ge: v = x >= y; break;
        default: break;
        }
        break;
    }
    }
    if (st != Status::Ok && n.atom) {
        if (st == Status::DivByZero)
            div0 = true;
        return {0, Status::Ok};
    }
    return {v, st};
}

EvalResult CompiledExpr::evaluate(const EvalEnv& env) const
{
    if (root_ < 0)
        return {1, false};
    bool div0 = false;
    auto [v, st] = eval(root_, env, div0);
    if (st == Status::DivByZero)
        div0 = true;
    return {st == Status::Ok ? v : 0, div0};
}

void History::push(std::vector<std::int64_t> frame)
{
    if (frame.size() != width_)
        throw Error("history frame has wrong width");
    frames_.insert(frames_.end(), frame.begin(), frame.end());
}

EvalEnv History::env(std::span<const std::int64_t> globals) const
{
    EvalEnv env;
    env.width = width_;
    env.globals = globals;
    if (frames_.empty())
        return env;
    std::span<const std::int64_t> all(frames_);
    env.current = all.subspan(frames_.size() - width_);
    env.past = all.first(frames_.size() - width_);
    return env;
}

} // namespace rtt
