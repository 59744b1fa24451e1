#include "rtt/table.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <sstream>

namespace rtt {

// ---------------------------------------------------------------------------
// Durations

bool Duration::allows(std::int64_t count) const
{
    if (omega)
        return false;
    return count >= lower && (!upper || count <= *upper);
}

std::string to_string(const Duration& d)
{
    std::string s;
    if (d.omega)
        return "omega";
    if (!d.upper) {
        if (d.lower == 0)
            s = "-";
        else
            s = ">=" + std::to_string(d.lower);
    } else if (*d.upper == d.lower) {
        s = std::to_string(d.lower);
    } else {
        s = "[" + std::to_string(d.lower) + "," + std::to_string(*d.upper) + "]";
    }
    if (d.progress)
        s += "p";
    return s;
}

Duration parse_duration(TokenStream& ts)
{
    Duration d;
    const Token& t = ts.peek();
    if (t.is_ident("omega")) {
        ts.next();
        return Duration::infinite();
    }
    if (t.kind == TokenKind::Int) {
        d = Duration::exactly(ts.next().value);
    } else if (t.is("[")) {
        ts.next();
        if (ts.peek().kind != TokenKind::Int)
            ts.fail("expected duration lower bound");
        d.lower = ts.next().value;
        ts.expect(",");
        if (ts.accept("-")) {
            d.upper.reset();
        } else {
            if (ts.peek().kind != TokenKind::Int)
                ts.fail("expected duration upper bound or '-'");
            d.upper = ts.next().value;
        }
        ts.expect("]");
        if (d.upper && *d.upper < d.lower)
            TokenStream::fail_at(t, "duration lower bound exceeds upper bound");
    } else if (t.is(">=")) {
        ts.next();
        if (ts.peek().kind != TokenKind::Int)
            ts.fail("expected duration lower bound");
        d = Duration::at_least(ts.next().value);
    } else if (t.is("-")) {
        ts.next();
        d = Duration::at_least(0);
    } else {
        ts.fail("expected duration, found " + describe(t));
    }
    if (ts.peek().is_ident("p")) {
        ts.next();
        d.progress = true;
    }
    return d;
}

Duration parse_duration(std::string_view text)
{
    LexOptions lex;
    lex.comments = false;
    TokenStream ts(tokenize(text, lex));
    auto d = parse_duration(ts);
    if (!ts.at_end())
        ts.fail("trailing input after duration");
    return d;
}

// ---------------------------------------------------------------------------
// Table accessors

const ColumnDecl* RelationalTable::find_column(std::string_view qualified) const
{
    for (const auto& c : columns)
        if (c.name() == qualified)
            return &c;
    return nullptr;
}

bool RelationalTable::has_pause_column(std::string_view trace) const
{
    return std::any_of(columns.begin(), columns.end(),
                       [&](const ColumnDecl& c) { return c.kind == ColumnKind::Pause && c.trace == trace; });
}

CellContext RelationalTable::cell_context(const ColumnDecl& column) const
{
    CellContext ctx;
    ctx.trace = column.trace;
    ctx.variable = column.variable;
    ctx.kind = column.kind;
    ctx.type = column.type;
    ctx.traces = traces;
    for (const auto& g : globals)
        ctx.globals.insert(g.name);
    ctx.enums = &enums;
    return ctx;
}

Symbols RelationalTable::symbols() const
{
    Symbols s;
    for (const auto& c : columns)
        s.vars[c.name()] = c.type;
    for (const auto& t : traces) {
        for (const auto& c : columns) {
            if (c.kind == ColumnKind::Pause)
                continue;
            s.vars.emplace(t + "::" + c.variable, c.type);
        }
    }
    for (const auto& g : globals)
        s.globals[g.name] = g.type;
    s.enums = &enums;
    return s;
}

SlotMap RelationalTable::column_slots() const
{
    SlotMap m;
    for (std::size_t i = 0; i < columns.size(); ++i)
        m.vars[columns[i].name()] = static_cast<int>(i);
    for (std::size_t i = 0; i < globals.size(); ++i)
        m.globals[globals[i].name] = static_cast<int>(i);
    return m;
}

namespace {

void collect_rows(const Block& b, std::vector<const Block*>& out)
{
    if (b.is_row()) {
        out.push_back(&b);
        return;
    }
    for (const auto& c : b.children)
        collect_rows(c, out);
}

} // namespace

std::vector<const Block*> RelationalTable::rows() const
{
    std::vector<const Block*> out;
    collect_rows(body, out);
    return out;
}

const Block* RelationalTable::row(int id) const
{
    for (const auto* r : rows())
        if (r->row_id == id)
            return r;
    return nullptr;
}

ExprPtr RelationalTable::cell_constraint(const Block& row, const ColumnDecl& column) const
{
    auto ctx = cell_context(column);
    auto it = row.cells.find(column.name());
    if (it == row.cells.end()) {
        if (column.kind == ColumnKind::Pause)
            return Expr::binary(Op::Eq, Expr::var(VarRef{column.trace, column.variable, false, 0}),
                                Expr::boolean(false));
        return Expr::boolean(true);
    }
    return constraint_of(desugar(it->second, ctx));
}

RowGuards RelationalTable::guards(const Block& row) const
{
    std::vector<ExprPtr> in, out;
    for (const auto& c : columns) {
        auto e = cell_constraint(row, c);
        if (e->kind == ExprKind::Bool && e->value == 1)
            continue;
        (c.kind == ColumnKind::Output ? out : in).push_back(e);
    }
    return {conjunction(in), conjunction(out)};
}

int RelationalTable::history_bound() const
{
    if (history)
        return *history;
    int deepest = 0;
    for (const auto* r : rows())
        for (const auto& c : columns)
            deepest = std::max(deepest, max_backref(*cell_constraint(*r, c)));
    return deepest;
}

std::vector<GlobalBinding> RelationalTable::global_bindings() const
{
    std::vector<GlobalBinding> out;
    GlobalBinding cur(globals.size());
    std::function<void(std::size_t)> rec = [&](std::size_t i) {
        if (i == globals.size()) {
            out.push_back(cur);
            return;
        }
        for (auto v = globals[i].type.min_raw(); v <= globals[i].type.max_raw(); ++v) {
            cur[i] = v;
            rec(i + 1);
        }
    };
    rec(0);
    return out;
}

std::string RelationalTable::format_binding(const GlobalBinding& g) const
{
    std::string s;
    for (std::size_t i = 0; i < globals.size() && i < g.size(); ++i) {
        if (i)
            s += " ";
        s += globals[i].name + "=" + format_value(globals[i].type, g[i]);
    }
    return s;
}

bool same_table(const RelationalTable& a, const RelationalTable& b)
{
    if (a.name != b.name || a.traces != b.traces || a.globals != b.globals || a.history != b.history
        || a.columns != b.columns)
        return false;
    if (a.enums.all().size() != b.enums.all().size())
        return false;
    for (std::size_t i = 0; i < a.enums.all().size(); ++i) {
        const auto& x = *a.enums.all()[i];
        const auto& y = *b.enums.all()[i];
        if (x.name != y.name || x.constants != y.constants)
            return false;
    }
    std::function<bool(const Block&, const Block&)> same = [&](const Block& x, const Block& y) {
        if (x.kind != y.kind || x.duration != y.duration || x.row_id != y.row_id || x.cells != y.cells
            || x.children.size() != y.children.size())
            return false;
        for (std::size_t i = 0; i < x.children.size(); ++i)
            if (!same(x.children[i], y.children[i]))
                return false;
        return true;
    };
    return same(a.body, b.body);
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

Type parse_type(TokenStream& ts, const EnumRegistry& enums)
{
    auto at = ts.peek();
    auto name = ts.expect_name();
    if (name == "bool")
        return Type::boolean();
    if (name == "int") {
        ts.expect("[");
        auto lo = ts.expect_int();
        ts.expect(",");
        auto hi = ts.expect_int();
        ts.expect("]");
        if (hi < lo)
            TokenStream::fail_at(at, "empty integer range");
        return Type::integer(lo, hi);
    }
    if (auto e = enums.find(name))
        return Type::enumeration(e);
    TokenStream::fail_at(at, "unknown type '" + name + "'");
}

class TableParser {
public:
    explicit TableParser(std::string_view text) : ts_(tokenize(text)) {}

    RelationalTable run()
    {
        ts_.expect_ident("table");
        t_.name = ts_.expect_name();
        t_.body.kind = Block::Kind::Group;
        t_.body.duration = Duration::exactly(1);
        bool body_started = false;
        while (!ts_.at_end()) {
            const Token& k = ts_.peek();
            if (k.is_ident("row") || k.is_ident("group")) {
                body_started = true;
                t_.body.children.push_back(parse_block());
                continue;
            }
            if (body_started)
                ts_.fail("declarations must precede rows, found " + describe(k));
            if (ts_.accept_ident("traces")) {
                if (!t_.traces.empty())
                    TokenStream::fail_at(k, "duplicate 'traces' declaration");
                while (ts_.peek().kind == TokenKind::Ident && !is_section_keyword(ts_.peek())) {
                    auto tr = ts_.next();
                    if (std::find(t_.traces.begin(), t_.traces.end(), tr.text) != t_.traces.end())
                        TokenStream::fail_at(tr, "duplicate trace '" + tr.text + "'");
                    t_.traces.push_back(tr.text);
                }
                if (t_.traces.empty())
                    ts_.fail("expected trace names");
            } else if (ts_.accept_ident("gvar")) {
                GlobalDecl g;
                auto at = ts_.peek();
                g.name = ts_.expect_name();
                ts_.expect(":");
                g.type = parse_type(ts_, t_.enums);
                for (const auto& o : t_.globals)
                    if (o.name == g.name)
                        TokenStream::fail_at(at, "duplicate global '" + g.name + "'");
                t_.globals.push_back(std::move(g));
            } else if (ts_.accept_ident("history")) {
                t_.history = static_cast<int>(ts_.expect_int());
                if (*t_.history < 0)
                    TokenStream::fail_at(k, "negative history bound");
            } else if (ts_.accept_ident("enum")) {
                auto name = ts_.expect_name();
                ts_.expect("{");
                std::vector<std::string> cs;
                do {
                    cs.push_back(ts_.expect_name());
                } while (ts_.accept(","));
                ts_.expect("}");
                try {
                    t_.enums.add(name, cs);
                } catch (const Error& e) {
                    TokenStream::fail_at(k, e.what());
                }
            } else if (ts_.accept_ident("column")) {
                parse_column(k);
            } else {
                ts_.fail("unexpected " + describe(k));
            }
        }
        if (t_.traces.empty())
            throw ParseError({1, 1}, "missing 'traces' declaration");
        if (t_.rows().empty())
            throw ParseError(ts_.peek().pos, "table has no rows");
        return std::move(t_);
    }

private:
    static bool is_section_keyword(const Token& t)
    {
        static const std::set<std::string, std::less<>> kw = {"traces", "gvar", "history", "enum",
                                                              "column", "row", "group"};
        return kw.count(t.text) > 0;
    }

    void require_trace(const Token& at, const std::string& trace)
    {
        if (std::find(t_.traces.begin(), t_.traces.end(), trace) == t_.traces.end())
            TokenStream::fail_at(at, "unknown trace '" + trace + "'");
    }

    void parse_column(const Token& at)
    {
        ColumnDecl c;
        if (ts_.accept_ident("pause")) {
            auto tr = ts_.peek();
            c.trace = ts_.expect_name();
            require_trace(tr, c.trace);
            c.variable = std::string(kStutterVar);
            c.kind = ColumnKind::Pause;
            c.type = Type::boolean();
        } else {
            if (ts_.accept_ident("in"))
                c.kind = ColumnKind::Input;
            else if (ts_.accept_ident("out"))
                c.kind = ColumnKind::Output;
            else
                ts_.fail("expected 'in', 'out' or 'pause'");
            auto tr = ts_.peek();
            c.trace = ts_.expect_name();
            require_trace(tr, c.trace);
            ts_.expect("::");
            c.variable = ts_.expect_name();
            if (c.variable == kStutterVar)
                TokenStream::fail_at(tr, "'stutt' is reserved for pause columns");
            ts_.expect(":");
            c.type = parse_type(ts_, t_.enums);
        }
        if (t_.find_column(c.name()))
            TokenStream::fail_at(at, "duplicate column '" + c.name() + "'");
        t_.columns.push_back(std::move(c));
    }

    Block parse_block()
    {
        Block b;
        b.pos = ts_.peek().pos;
        bool row = ts_.accept_ident("row");
        if (!row)
            ts_.expect_ident("group");
        b.kind = row ? Block::Kind::Row : Block::Kind::Group;
        b.duration = ts_.peek().is("{") ? Duration::exactly(1) : parse_duration(ts_);
        ts_.expect("{");
        if (row) {
            b.row_id = next_row_id_++;
            while (!ts_.accept("}"))
                parse_cell_assignment(b);
        } else {
            while (!ts_.accept("}")) {
                if (!ts_.peek().is_ident("row") && !ts_.peek().is_ident("group"))
                    ts_.fail("expected 'row', 'group' or '}', found " + describe(ts_.peek()));
                b.children.push_back(parse_block());
            }
            if (b.children.empty())
                throw ParseError(b.pos, "empty group");
        }
        return b;
    }

    void parse_cell_assignment(Block& row)
    {
        auto at = ts_.peek();
        std::string column;
        if (ts_.accept_ident("pause")) {
            ts_.expect("(");
            auto tr = ts_.peek();
            auto trace = ts_.expect_name();
            require_trace(tr, trace);
            ts_.expect(")");
            column = trace + "::" + std::string(kStutterVar);
        } else {
            auto first = ts_.expect_name();
            if (ts_.accept("::")) {
                require_trace(at, first);
                column = first + "::" + ts_.expect_name();
            } else if (t_.traces.size() == 1) {
                column = t_.traces[0] + "::" + first;
            } else {
                TokenStream::fail_at(at, "cell reference '" + first + "' must be qualified with a trace");
            }
        }
        const ColumnDecl* decl = t_.find_column(column);
        if (!decl)
            TokenStream::fail_at(at, "no column '" + column + "'");
        ts_.expect("=");
        auto str = ts_.peek();
        auto text = ts_.expect_string();
        ts_.accept(";");
        if (row.cells.count(column))
            TokenStream::fail_at(at, "duplicate cell for column '" + column + "'");
        SourcePos origin{str.pos.line, str.pos.column + 1};
        row.cells.emplace(column, parse_cell(text, t_.cell_context(*decl), origin));
    }

    TokenStream ts_;
    RelationalTable t_;
    int next_row_id_ = 0;
};

void print_block(std::ostream& os, const Block& b, int indent)
{
    std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    if (b.is_row()) {
        os << pad << "row " << to_string(b.duration) << " {";
        for (const auto& [col, cell] : b.cells) {
            auto sep = col.rfind("::");
            std::string trace = col.substr(0, sep);
            std::string var = col.substr(sep + 2);
            if (var == kStutterVar)
                os << " pause(" << trace << ")";
            else
                os << ' ' << col;
            os << " = \"" << to_string(cell) << "\";";
        }
        os << " }\n";
        return;
    }
    os << pad << "group " << to_string(b.duration) << " {\n";
    for (const auto& c : b.children)
        print_block(os, c, indent + 1);
    os << pad << "}\n";
}

} // namespace

RelationalTable parse_table(std::string_view text)
{
    return TableParser(text).run();
}

std::string print_table(const RelationalTable& t)
{
    std::ostringstream os;
    os << "table " << t.name << "\n";
    os << "traces";
    for (const auto& tr : t.traces)
        os << ' ' << tr;
    os << "\n";
    for (const auto& e : t.enums.all()) {
        os << "enum " << e->name << " { ";
        for (std::size_t i = 0; i < e->constants.size(); ++i)
            os << (i ? ", " : "") << e->constants[i];
        os << " }\n";
    }
    for (const auto& g : t.globals)
        os << "gvar " << g.name << " : " << to_string(g.type) << "\n";
    if (t.history)
        os << "history " << *t.history << "\n";
    for (const auto& c : t.columns) {
        if (c.kind == ColumnKind::Pause)
            os << "column pause " << c.trace << "\n";
        else
            os << "column " << to_string(c.kind) << ' ' << c.name() << " : " << to_string(c.type) << "\n";
    }
    // The root group is implicit when it runs exactly once.
    if (t.body.duration == Duration::exactly(1)) {
        for (const auto& c : t.body.children)
            print_block(os, c, 0);
    } else {
        print_block(os, t.body, 0);
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Validation

namespace {

/// Whether `b` contains an omega row or group (including itself).
bool contains_omega(const Block& b)
{
    if (b.duration.omega)
        return true;
    return std::any_of(b.children.begin(), b.children.end(), contains_omega);
}

void check_structure(const Block& b, bool under_omega, std::vector<Diagnostic>& out)
{
    const auto& d = b.duration;
    if (d.upper && *d.upper < d.lower)
        out.push_back({b.pos, "duration lower bound exceeds upper bound"});
    if (d.omega && d.progress)
        out.push_back({b.pos, "omega duration cannot carry the progress flag"});
    if (d.omega && under_omega)
        out.push_back({b.pos, "nested omega repetition"});
    if (b.is_row())
        return;
    if (b.children.empty()) {
        out.push_back({b.pos, "empty group"});
        return;
    }
    for (std::size_t i = 0; i < b.children.size(); ++i) {
        const auto& c = b.children[i];
        if (contains_omega(c)) {
            if (i + 1 < b.children.size())
                out.push_back({b.children[i + 1].pos, "unreachable rows after omega"});
            if (!c.duration.omega && !c.is_row() && c.duration != Duration::exactly(1))
                out.push_back({c.pos, "omega repetition inside a group that repeats"});
        }
        check_structure(c, under_omega || d.omega, out);
    }
}

void check_refs(const Expr& e, const RelationalTable& t, const std::string& where, std::vector<Diagnostic>& out,
                SourcePos pos)
{
    for_each_var(e, [&](const VarRef& r) {
        if (r.other && t.traces.size() != 2)
            out.push_back({pos, where + ": shorthand requires exactly two traces"});
        if (!r.trace.empty() && std::find(t.traces.begin(), t.traces.end(), r.trace) == t.traces.end())
            out.push_back({pos, where + ": unknown trace '" + r.trace + "'"});
        if (r.offset > 0)
            out.push_back({pos, where + ": positive back-reference offset"});
    });
}

} // namespace

std::vector<Diagnostic> validate(const RelationalTable& t)
{
    std::vector<Diagnostic> out;
    if (t.traces.empty())
        out.push_back({{}, "table declares no traces"});
    std::set<std::string> pause_traces;
    for (const auto& c : t.columns) {
        if (std::find(t.traces.begin(), t.traces.end(), c.trace) == t.traces.end())
            out.push_back({{}, "column '" + c.name() + "' refers to unknown trace"});
        if (c.kind == ColumnKind::Pause) {
            if (!pause_traces.insert(c.trace).second)
                out.push_back({{}, "more than one pause column for trace '" + c.trace + "'"});
            if (c.type.kind != TypeKind::Bool)
                out.push_back({{}, "pause column for '" + c.trace + "' must be Boolean"});
        }
    }
    for (const auto& g : t.globals)
        if (g.type.domain_size() <= 0)
            out.push_back({{}, "global '" + g.name + "' has an empty domain"});

    if (t.body.is_row()) {
        out.push_back({{}, "table body must be a group"});
        return out;
    }
    check_structure(t.body, false, out);
    auto rows = t.rows();
    if (rows.empty())
        out.push_back({{}, "table has no rows"});

    auto symbols = t.symbols();
    for (const auto* r : rows) {
        for (const auto& [col, cell] : r->cells) {
            std::string where = "row " + std::to_string(r->row_id) + ", column " + col;
            const auto* decl = t.find_column(col);
            if (!decl) {
                out.push_back({r->pos, where + ": no such column"});
                continue;
            }
            for (const auto& item : cell.items) {
                if (item.a)
                    check_refs(*item.a, t, where, out, r->pos);
                if (item.b)
                    check_refs(*item.b, t, where, out, r->pos);
            }
            try {
                auto e = constraint_of(desugar(cell, t.cell_context(*decl)));
                auto type = typecheck(*e, symbols);
                if (type.kind != TypeKind::Bool)
                    out.push_back({r->pos, where + ": cell is not a Boolean constraint"});
                if (t.history && max_backref(*e) > *t.history)
                    out.push_back({r->pos, where + ": back-reference deeper than history bound "
                                               + std::to_string(*t.history)});
            } catch (const Error& e) {
                out.push_back({r->pos, where + ": " + e.what()});
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Unwinder

Unwinder::Unwinder(const Block& root) : root_(root) {}

Unwinder::Position Unwinder::encode(const std::vector<Frame>& frames, std::int64_t row_count)
{
    Position p;
    p.reserve(frames.size() * 2 + 1);
    for (const auto& f : frames) {
        p.push_back(f.index);
        p.push_back(f.iteration);
    }
    p.push_back(row_count);
    return p;
}

std::vector<Unwinder::Frame> Unwinder::decode(const Position& pos, std::int64_t& row_count) const
{
    std::vector<Frame> frames;
    const Block* g = &root_;
    std::size_t n = (pos.size() - 1) / 2;
    for (std::size_t i = 0; i < n; ++i) {
        frames.push_back({g, pos[2 * i], pos[2 * i + 1]});
        if (i + 1 < n)
            g = &g->children[static_cast<std::size_t>(pos[2 * i])];
    }
    row_count = pos.back();
    return frames;
}

const Block& Unwinder::row_at(const Position& pos) const
{
    std::int64_t c = 0;
    auto frames = decode(pos, c);
    return frames.back().group->children[static_cast<std::size_t>(frames.back().index)];
}

namespace {

std::int64_t saturate(const Duration& d, std::int64_t count)
{
    if (d.omega)
        return std::min<std::int64_t>(count, 1);
    if (!d.upper)
        return std::min(count, std::max<std::int64_t>(d.lower, 1));
    return count;
}

bool can_repeat(const Duration& d, std::int64_t done)
{
    return d.omega || !d.upper || done < *d.upper;
}

bool can_leave(const Duration& d, std::int64_t done)
{
    return !d.omega && done >= d.lower;
}

bool may_apply(const Duration& d)
{
    return d.omega || !d.upper || *d.upper > 0;
}

} // namespace

void Unwinder::enter(std::vector<Frame> frames, Next& out, std::set<std::vector<std::int64_t>>& seen) const
{
    if (!seen.insert(encode(frames, -1)).second)
        return;
    Frame& f = frames.back();
    const Block& g = *f.group;
    if (f.index == static_cast<std::int64_t>(g.children.size())) {
        // End of one iteration of g.
        std::int64_t done = f.iteration;
        if (can_repeat(g.duration, done)) {
            auto again = frames;
            again.back().index = 0;
            again.back().iteration = saturate(g.duration, done + 1);
            enter(std::move(again), out, seen);
        }
        if (can_leave(g.duration, done)) {
            frames.pop_back();
            if (frames.empty()) {
                out.accept = true;
                return;
            }
            advance(std::move(frames), out, seen);
        }
        return;
    }
    const Block& child = g.children[static_cast<std::size_t>(f.index)];
    if (child.is_row()) {
        if (may_apply(child.duration))
            out.positions.push_back(encode(frames, 0));
    } else if (may_apply(child.duration)) {
        auto inner = frames;
        inner.push_back({&child, 0, 1});
        enter(std::move(inner), out, seen);
    }
    if (!child.duration.omega && child.duration.lower == 0)
        advance(std::move(frames), out, seen);
}

void Unwinder::advance(std::vector<Frame> frames, Next& out, std::set<std::vector<std::int64_t>>& seen) const
{
    frames.back().index += 1;
    enter(std::move(frames), out, seen);
}

Unwinder::Next Unwinder::start() const
{
    Next out;
    std::set<std::vector<std::int64_t>> seen;
    if (may_apply(root_.duration))
        enter({{&root_, 0, 1}}, out, seen);
    if (!root_.duration.omega && root_.duration.lower == 0)
        out.accept = true;
    std::sort(out.positions.begin(), out.positions.end());
    out.positions.erase(std::unique(out.positions.begin(), out.positions.end()), out.positions.end());
    return out;
}

Unwinder::Next Unwinder::after(const Position& pos) const
{
    Next out;
    std::set<std::vector<std::int64_t>> seen;
    std::int64_t count = 0;
    auto frames = decode(pos, count);
    const Block& row = row_at(pos);
    std::int64_t done = count + 1;
    if (can_repeat(row.duration, done))
        out.positions.push_back(encode(frames, saturate(row.duration, done)));
    if (can_leave(row.duration, done))
        advance(std::move(frames), out, seen);
    std::sort(out.positions.begin(), out.positions.end());
    out.positions.erase(std::unique(out.positions.begin(), out.positions.end()), out.positions.end());
    return out;
}

// ---------------------------------------------------------------------------
// Concrete tables

std::vector<std::vector<std::int64_t>> ConcreteTable::cycles() const
{
    std::vector<std::vector<std::int64_t>> out;
    for (const auto& r : rows)
        for (std::int64_t i = 0; i < r.count; ++i)
            out.push_back(r.values);
    return out;
}

namespace {

std::optional<std::int64_t> literal_value(const Expr& e, const EnumRegistry& enums)
{
    switch (e.kind) {
    case ExprKind::Int:
    case ExprKind::Bool: return e.value;
    case ExprKind::EnumConst:
        try {
            return resolve_enum_constant(e, &enums).second;
        } catch (const TypeError&) {
            return std::nullopt;
        }
    default: return std::nullopt;
    }
}

} // namespace

ConcreteTable to_concrete(const RelationalTable& t)
{
    ConcreteTable out;
    out.columns = t.columns;
    std::function<void(const Block&)> walk = [&](const Block& b) {
        if (!b.is_row()) {
            if (b.duration != Duration::exactly(1))
                throw Error("concrete tables cannot repeat groups");
            for (const auto& c : b.children)
                walk(c);
            return;
        }
        if (b.duration.omega || !b.duration.upper || *b.duration.upper != b.duration.lower
            || b.duration.lower < 1 || b.duration.progress)
            throw Error("row " + std::to_string(b.row_id) + ": concrete rows need an exact positive duration");
        ConcreteRow row;
        row.count = b.duration.lower;
        for (const auto& c : t.columns) {
            auto e = t.cell_constraint(b, c);
            std::optional<std::int64_t> v;
            if (e->kind == ExprKind::Binary && e->op == Op::Eq && e->lhs->kind == ExprKind::Var
                && e->lhs->ref.qualified_name() == c.name() && e->lhs->ref.offset == 0)
                v = literal_value(*e->rhs, t.enums);
            if (!v || !c.type.contains(*v))
                throw Error("row " + std::to_string(b.row_id) + ", column " + c.name()
                            + ": concrete cells must hold a literal of the column type");
            row.values.push_back(*v);
        }
        out.rows.push_back(std::move(row));
    };
    walk(t.body);
    return out;
}

RelationalTable from_concrete(const ConcreteTable& concrete, const RelationalTable& like)
{
    RelationalTable t;
    t.name = like.name + "_instance";
    t.traces = like.traces;
    for (const auto& e : like.enums.all())
        t.enums.add(e->name, e->constants);
    t.columns = concrete.columns;
    t.body.kind = Block::Kind::Group;
    t.body.duration = Duration::exactly(1);
    int id = 0;
    for (const auto& r : concrete.rows) {
        Block b;
        b.kind = Block::Kind::Row;
        b.row_id = id++;
        b.duration = Duration::exactly(r.count);
        for (std::size_t i = 0; i < concrete.columns.size(); ++i) {
            const auto& c = concrete.columns[i];
            auto text = format_value(c.type, r.values[i]);
            b.cells.emplace(c.name(), parse_cell(text, t.cell_context(c)));
        }
        t.body.children.push_back(std::move(b));
    }
    return t;
}

RepetitionChoice minimal_choice(const Block& b)
{
    if (b.duration.omega)
        throw Error("omega repetition cannot be instantiated as a finite table");
    RepetitionChoice c;
    c.count = b.duration.lower;
    if (!b.is_row()) {
        for (std::int64_t i = 0; i < c.count; ++i) {
            std::vector<RepetitionChoice> it;
            for (const auto& child : b.children)
                it.push_back(minimal_choice(child));
            c.iterations.push_back(std::move(it));
        }
    }
    return c;
}

namespace {

void unwind(const Block& b, const RepetitionChoice& c, std::vector<const Block*>& out)
{
    if (b.duration.omega)
        throw Error("omega repetition cannot be instantiated as a finite table");
    if (b.is_row()) {
        if (!b.duration.allows(c.count))
            throw Error("row " + std::to_string(b.row_id) + ": count " + std::to_string(c.count)
                        + " outside duration " + to_string(b.duration));
        for (std::int64_t i = 0; i < c.count; ++i)
            out.push_back(&b);
        return;
    }
    auto n = static_cast<std::int64_t>(c.iterations.size());
    if (!b.duration.allows(n))
        throw Error("group repetition " + std::to_string(n) + " outside duration " + to_string(b.duration));
    for (const auto& it : c.iterations) {
        if (it.size() != b.children.size())
            throw Error("repetition choice does not match group structure");
        for (std::size_t i = 0; i < it.size(); ++i)
            unwind(b.children[i], it[i], out);
    }
}

struct RowCheck {
    CompiledExpr constraint;
    int ready_at = -1;  // column index after which all current-cycle reads are assigned
};

std::vector<RowCheck> row_checks(const RelationalTable& t, const Block& row, const Symbols& symbols,
                                 const SlotMap& slots)
{
    std::vector<RowCheck> out;
    for (const auto& c : t.columns) {
        auto e = t.cell_constraint(row, c);
        RowCheck rc;
        for_each_var(*e, [&](const VarRef& r) {
            auto it = slots.vars.find(r.qualified_name());
            if (it == slots.vars.end())
                throw Error("row " + std::to_string(row.row_id) + ", column " + c.name()
                            + ": non-ground cell refers to '" + r.qualified_name() + "', which has no column");
            if (r.offset == 0)
                rc.ready_at = std::max(rc.ready_at, it->second);
        });
        rc.constraint = compile(*e, symbols, slots);
        out.push_back(std::move(rc));
    }
    return out;
}

} // namespace

ConcreteTable instantiate(const RelationalTable& t, const GlobalBinding& globals, const RepetitionChoice& choice)
{
    if (globals.size() != t.globals.size())
        throw Error("global binding has wrong arity");
    for (std::size_t i = 0; i < globals.size(); ++i)
        if (!t.globals[i].type.contains(globals[i]))
            throw Error("global '" + t.globals[i].name + "' out of its domain");
    std::vector<const Block*> cycles;
    unwind(t.body, choice, cycles);

    auto symbols = t.symbols();
    auto slots = t.column_slots();
    std::size_t width = t.columns.size();
    std::vector<std::int64_t> past;
    ConcreteTable out;
    out.columns = t.columns;

    for (std::size_t k = 0; k < cycles.size(); ++k) {
        auto checks = row_checks(t, *cycles[k], symbols, slots);
        std::vector<std::int64_t> cur(width, 0);
        EvalEnv env;
        env.width = width;
        env.globals = globals;
        env.current = cur;
        env.past = past;
        auto ok_at = [&](int col) {
            for (const auto& rc : checks)
                if (rc.ready_at == col && !rc.constraint.holds(env))
                    return false;
            return true;
        };
        std::function<bool(std::size_t)> search = [&](std::size_t col) {
            if (col == width)
                return true;
            const auto& type = t.columns[col].type;
            for (auto v = type.min_raw(); v <= type.max_raw(); ++v) {
                cur[col] = v;
                if (ok_at(static_cast<int>(col)) && search(col + 1))
                    return true;
            }
            return false;
        };
        if (!ok_at(-1) || !search(0))
            throw Error("cycle " + std::to_string(k) + " (row " + std::to_string(cycles[k]->row_id)
                        + "): no valuation satisfies the row");
        past.insert(past.end(), cur.begin(), cur.end());
        if (!out.rows.empty() && out.rows.back().values == cur)
            out.rows.back().count += 1;
        else
            out.rows.push_back({cur, 1});
    }
    return out;
}

InstanceResult is_instance(const ConcreteTable& concrete, const RelationalTable& t,
                           const std::optional<GlobalBinding>& fixed)
{
    // Map concrete columns onto the table's column order.
    if (concrete.columns.size() != t.columns.size())
        throw Error("column sets differ");
    std::vector<std::size_t> perm(t.columns.size());
    for (std::size_t i = 0; i < t.columns.size(); ++i) {
        auto it = std::find_if(concrete.columns.begin(), concrete.columns.end(),
                               [&](const ColumnDecl& c) { return c.name() == t.columns[i].name(); });
        if (it == concrete.columns.end() || !it->type.compatible(t.columns[i].type))
            throw Error("column sets differ: '" + t.columns[i].name() + "'");
        perm[i] = static_cast<std::size_t>(it - concrete.columns.begin());
    }
    std::vector<std::vector<std::int64_t>> cycles;
    for (const auto& raw : concrete.cycles()) {
        std::vector<std::int64_t> v(t.columns.size());
        for (std::size_t i = 0; i < v.size(); ++i)
            v[i] = raw[perm[i]];
        cycles.push_back(std::move(v));
    }
    std::size_t width = t.columns.size();
    std::vector<std::int64_t> flat;
    for (const auto& c : cycles)
        flat.insert(flat.end(), c.begin(), c.end());

    auto symbols = t.symbols();
    auto slots = t.column_slots();
    std::map<int, CompiledExpr> row_guard;
    for (const auto* r : t.rows()) {
        auto g = t.guards(*r);
        auto both = Expr::binary(Op::And, g.input, g.output);
        for_each_var(*both, [&](const VarRef& ref) {
            if (!slots.vars.count(ref.qualified_name()))
                throw Error("row " + std::to_string(r->row_id) + " refers to '" + ref.qualified_name()
                            + "', which has no column");
        });
        row_guard.emplace(r->row_id, compile(*both, symbols, slots));
    }

    Unwinder unwinder(t.body);
    std::vector<GlobalBinding> bindings = fixed ? std::vector<GlobalBinding>{*fixed} : t.global_bindings();

    InstanceResult best;
    bool have_best = false;
    for (const auto& g : bindings) {
        struct Entry {
            Unwinder::Position pos;
            int parent;
        };
        std::vector<std::vector<Entry>> layers;
        auto first = unwinder.start();
        if (cycles.empty()) {
            if (first.accept)
                return {true, g, {}, 0, "empty instance"};
            continue;
        }
        std::vector<Entry> layer;
        for (auto& p : first.positions)
            layer.push_back({p, -1});
        std::size_t matched = 0;
        bool accepted = false;
        int accept_from = -1;
        for (std::size_t k = 0; k < cycles.size() && !layer.empty(); ++k) {
            EvalEnv env;
            env.width = width;
            env.globals = g;
            env.current = std::span<const std::int64_t>(flat).subspan(k * width, width);
            env.past = std::span<const std::int64_t>(flat).first(k * width);
            std::vector<Entry> next;
            std::set<Unwinder::Position> seen;
            bool any = false;
            for (std::size_t i = 0; i < layer.size(); ++i) {
                const Block& row = unwinder.row_at(layer[i].pos);
                if (!row_guard.at(row.row_id).holds(env))
                    continue;
                any = true;
                auto succ = unwinder.after(layer[i].pos);
                if (k + 1 == cycles.size() && succ.accept && !accepted) {
                    accepted = true;
                    accept_from = static_cast<int>(i);
                }
                for (auto& p : succ.positions)
                    if (seen.insert(p).second)
                        next.push_back({p, static_cast<int>(i)});
            }
            if (!any)
                break;
            matched = k + 1;
            layers.push_back(std::move(layer));
            layer = std::move(next);
        }
        if (accepted) {
            InstanceResult r{true, g, {}, cycles.size(), "instance with " + t.format_binding(g)};
            int idx = accept_from;
            for (std::size_t k = layers.size(); k-- > 0;) {
                r.rows.push_back(unwinder.row_at(layers[k][static_cast<std::size_t>(idx)].pos).row_id);
                idx = layers[k][static_cast<std::size_t>(idx)].parent;
            }
            std::reverse(r.rows.begin(), r.rows.end());
            return r;
        }
        if (!have_best || matched > best.matched_cycles) {
            have_best = true;
            best.binding = g;
            best.matched_cycles = matched;
            std::ostringstream why;
            if (matched == cycles.size())
                why << "all " << cycles.size() << " cycles match with " << t.format_binding(g)
                    << " but the table cannot end there";
            else
                why << "best attempt " << (g.empty() ? std::string("(no globals)") : t.format_binding(g))
                    << " matches " << matched << " of " << cycles.size() << " cycles; cycle " << matched
                    << " satisfies no admissible row";
            best.explanation = why.str();
        }
    }
    if (!have_best)
        best.explanation = "the table requires at least one cycle";
    return best;
}

} // namespace rtt
