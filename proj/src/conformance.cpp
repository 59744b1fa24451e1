#include "rtt/conformance.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

namespace rtt {

namespace {

std::vector<int> rows_of(const RowAutomaton& a, const TokenSet& t)
{
    std::vector<int> r;
    for (const auto& tok : t.tokens)
        r.push_back(a.states[static_cast<std::size_t>(tok.state)].row);
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
    return r;
}

struct VecHash {
    std::size_t operator()(const std::vector<std::int64_t>& v) const noexcept
    {
        std::size_t h = 1469598103934665603ull;
        for (auto x : v) {
            h ^= static_cast<std::size_t>(x) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        }
        return h;
    }
};

void append_tokens(std::vector<std::int64_t>& key, const TokenSet& t)
{
    key.push_back(static_cast<std::int64_t>(t.tokens.size()));
    for (const auto& tok : t.tokens) {
        key.push_back(tok.state);
        key.push_back(static_cast<std::int64_t>(tok.stay_sources.size()));
        key.insert(key.end(), tok.stay_sources.begin(), tok.stay_sources.end());
    }
    key.push_back(static_cast<std::int64_t>(t.progress_parents.size()));
    key.insert(key.end(), t.progress_parents.begin(), t.progress_parents.end());
}

/// Evaluates the output cells of single rows, for diagnostics.
class CellProbe {
public:
    CellProbe(const RelationalTable& t, const Symbols& sym, const SlotMap& slots)
        : table_(t), symbols_(sym), slots_(slots)
    {
    }

    std::vector<std::string> failing(int row_id, const EvalEnv& env) const
    {
        std::vector<std::string> out;
        const Block* row = table_.row(row_id);
        if (!row)
            return out;
        for (const auto& c : table_.columns) {
            if (c.kind != ColumnKind::Output)
                continue;
            auto e = table_.cell_constraint(*row, c);
            try {
                if (!compile(*e, symbols_, slots_).holds(env))
                    out.push_back(c.name());
            } catch (const Error&) {
                out.push_back(c.name());
            }
        }
        return out;
    }

private:
    const RelationalTable& table_;
    const Symbols& symbols_;
    const SlotMap& slots_;
};

void push_history(std::vector<std::int64_t>& hist, const std::vector<std::int64_t>& frame, std::size_t depth)
{
    if (depth == 0)
        return;
    hist.insert(hist.end(), frame.begin(), frame.end());
    std::size_t max = depth * frame.size();
    if (hist.size() > max)
        hist.erase(hist.begin(), hist.begin() + static_cast<std::ptrdiff_t>(hist.size() - max));
}

} // namespace

// ---------------------------------------------------------------------------
// Traces

Trace parse_trace(std::string_view text, const RelationalTable& table, const std::string& trace)
{
    auto symbols = table.symbols();
    Trace out;
    out.name = trace;
    std::map<std::string, std::size_t> index;
    std::vector<bool> skipped_known;
    int line_no = 0;
    std::size_t start = 0;
    bool first = true;
    std::vector<std::string> first_names;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos)
            end = text.size();
        std::string_view line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string_view::npos)
            line = line.substr(0, hash);
        std::istringstream is{std::string(line)};
        std::string item;
        std::map<std::string, std::int64_t> values;
        std::vector<std::string> names;
        bool any = false;
        while (is >> item) {
            any = true;
            auto eq = item.find('=');
            if (eq == std::string::npos || eq == 0 || eq + 1 == item.size())
                throw ParseError({line_no, 1}, "expected trace::var=value, found '" + item + "'");
            std::string lhs = item.substr(0, eq);
            std::string rhs = item.substr(eq + 1);
            std::string var = lhs;
            auto sep = lhs.find("::");
            if (sep != std::string::npos) {
                if (lhs.substr(0, sep) != trace)
                    throw ParseError({line_no, 1}, "value for trace '" + lhs.substr(0, sep) + "' in trace '" + trace + "'");
                var = lhs.substr(sep + 2);
            }
            if (values.count(var))
                throw ParseError({line_no, 1}, "duplicate value for '" + var + "'");
            auto it = symbols.vars.find(trace + "::" + var);
            if (it == symbols.vars.end()) {
                values[var] = 0;
                names.push_back(var);
                continue;
            }
            auto v = parse_value(it->second, rhs);
            if (!v)
                throw ParseError({line_no, 1}, "bad value '" + rhs + "' for " + trace + "::" + var + " : "
                                                   + to_string(it->second));
            values[var] = *v;
            names.push_back(var);
        }
        if (!any)
            continue;
        std::sort(names.begin(), names.end());
        if (first) {
            first = false;
            first_names = names;
            for (const auto& n : names) {
                if (symbols.vars.count(trace + "::" + n)) {
                    index[n] = out.variables.size();
                    out.variables.push_back(n);
                }
            }
        } else if (names != first_names) {
            throw ParseError({line_no, 1}, "line assigns a different set of variables than the first line");
        }
        std::vector<std::int64_t> cycle(out.variables.size());
        for (const auto& [n, i] : index)
            cycle[i] = values[n];
        out.cycles.push_back(std::move(cycle));
    }
    return out;
}

std::string format_trace(const Trace& trace, const RelationalTable& table)
{
    auto symbols = table.symbols();
    std::ostringstream os;
    for (const auto& c : trace.cycles) {
        for (std::size_t i = 0; i < trace.variables.size(); ++i) {
            auto key = trace.name + "::" + trace.variables[i];
            auto it = symbols.vars.find(key);
            os << (i ? " " : "") << key << "=" << (it == symbols.vars.end() ? std::to_string(c[i]) : format_value(it->second, c[i]));
        }
        os << "\n";
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Monitor

std::string_view to_string(VerdictKind k)
{
    switch (k) {
    case VerdictKind::Conforms: return "conforms";
    case VerdictKind::ConformsWeak: return "conforms-weak";
    case VerdictKind::Violation: return "violation";
    case VerdictKind::NotCovered: return "not-covered";
    case VerdictKind::Inconclusive: return "inconclusive";
    }
    return "?";
}

namespace {

class Monitor {
public:
    Monitor(const std::vector<Trace>& traces, const RelationalTable& table, const RowAutomaton& a,
            const MonitorOptions& opt)
        : table_(table), a_(a), opt_(opt)
    {
        auto tsym = table.symbols();
        for (const auto& t : table.traces) {
            auto it = std::find_if(traces.begin(), traces.end(), [&](const Trace& x) { return x.name == t; });
            if (it == traces.end())
                throw Error("no trace given for '" + t + "'");
            traces_.push_back(&*it);
        }
        if (traces.size() != table.traces.size())
            throw Error("more traces given than the table declares");
        for (std::size_t c = 0; c < traces_.size(); ++c) {
            const auto& tr = *traces_[c];
            const auto& tname = table.traces[c];
            offsets_.push_back(names_.size());
            add_slot(tname + "::stutt", Type::boolean(), -1);
            std::vector<std::string> vars = tr.variables;
            for (const auto& col : table.columns) {
                if (col.trace != tname || col.kind == ColumnKind::Pause)
                    continue;
                if (std::find(vars.begin(), vars.end(), col.variable) == vars.end()) {
                    if (tr.length() > 0)
                        throw Error("trace '" + tname + "' has no values for column " + col.name());
                    vars.push_back(col.variable);
                }
            }
            if (tr.length() == 0) {
                // nothing recorded: give every referenced variable a slot
                auto prefix = tname + "::";
                for (const auto& [name, type] : tsym.vars) {
                    auto v = name.substr(prefix.size());
                    if (name.rfind(prefix, 0) == 0 && v != kStutterVar
                        && std::find(vars.begin(), vars.end(), v) == vars.end())
                        vars.push_back(v);
                }
            }
            for (const auto& v : vars) {
                auto key = tname + "::" + v;
                if (!tsym.vars.count(key))
                    continue;  // recorded but never mentioned by the table
                auto pos = std::find(tr.variables.begin(), tr.variables.end(), v);
                add_slot(key, tsym.vars.at(key),
                         pos == tr.variables.end() ? -1 : static_cast<int>(pos - tr.variables.begin()));
            }
            can_pause_.push_back(table.has_pause_column(tname));
        }
        offsets_.push_back(names_.size());
        symbols_.enums = &table.enums;
        for (const auto& g : table.globals)
            symbols_.globals[g.name] = g.type;
        for (std::size_t i = 0; i < names_.size(); ++i) {
            symbols_.vars[names_[i]] = types_[i];
            slots_.vars[names_[i]] = static_cast<int>(i);
        }
        for (std::size_t i = 0; i < table.globals.size(); ++i)
            slots_.globals[table.globals[i].name] = static_cast<int>(i);
        try {
            bound_.emplace(a_, symbols_, slots_);
        } catch (const TypeError& e) {
            throw Error(std::string("table does not match the traces: ") + e.what());
        }
        depth_ = static_cast<std::size_t>(table.history_bound());
    }

    Verdict run()
    {
        std::vector<GlobalBinding> bindings =
            opt_.binding ? std::vector<GlobalBinding>{*opt_.binding} : table_.global_bindings();
        struct Death {
            bool violation;
            std::size_t step;
            std::size_t binding;
            Verdict detail;
        };
        std::optional<Verdict> weak, inconclusive, violation, uncovered;
        for (std::size_t b = 0; b < bindings.size(); ++b) {
            auto r = search(bindings[b]);
            if (r.kind == VerdictKind::Conforms)
                return r;
            auto better = [](std::optional<Verdict>& slot, Verdict v, bool earliest) {
                if (!slot || (earliest ? v.step < slot->step : v.step > slot->step))
                    slot = std::move(v);
            };
            if (r.kind == VerdictKind::ConformsWeak && !weak)
                weak = r;
            if (r_inconclusive_) {
                better(inconclusive, *r_inconclusive_, false);
            }
            if (r_violation_)
                better(violation, *r_violation_, true);
            if (r_uncovered_)
                better(uncovered, *r_uncovered_, false);
        }
        if (weak)
            return *weak;
        if (inconclusive)
            return *inconclusive;
        if (violation)
            return *violation;
        if (uncovered)
            return *uncovered;
        Verdict v;
        v.kind = VerdictKind::Inconclusive;
        v.summary = "no global binding to search";
        return v;
    }

private:
    struct Node {
        std::vector<std::size_t> pos;
        std::vector<std::int64_t> history;
        TokenSet tokens;
        int parent = -1;
        std::vector<bool> move;
    };

    void add_slot(const std::string& name, const Type& t, int source)
    {
        names_.push_back(name);
        types_.push_back(t);
        source_.push_back(source);
    }

    std::vector<std::vector<bool>> moves(const Node& n, std::size_t step) const
    {
        std::size_t k = traces_.size();
        std::vector<std::vector<bool>> out;
        if (opt_.schedule) {
            if (step >= opt_.schedule->size())
                return out;
            const auto& m = (*opt_.schedule)[step];
            if (legal(n, m))
                out.push_back(m);
            return out;
        }
        for (std::size_t mask = 0; mask < (std::size_t{1} << k); ++mask) {
            std::vector<bool> m(k);
            for (std::size_t c = 0; c < k; ++c)
                m[c] = (mask >> (k - 1 - c)) & 1;
            if (legal(n, m))
                out.push_back(std::move(m));
        }
        return out;
    }

    bool legal(const Node& n, const std::vector<bool>& m) const
    {
        if (m.size() != traces_.size())
            return false;
        bool all = true;
        for (std::size_t c = 0; c < m.size(); ++c) {
            bool exhausted = n.pos[c] >= traces_[c]->length();
            if (m[c]) {
                if (!can_pause_[c] || n.pos[c] == 0)
                    return false;
            } else {
                all = false;
                if (exhausted)
                    return false;
            }
        }
        return !all;
    }

    std::vector<std::int64_t> frame(const Node& n, const std::vector<bool>& m) const
    {
        std::vector<std::int64_t> f(names_.size(), 0);
        for (std::size_t c = 0; c < traces_.size(); ++c) {
            std::size_t cycle = m[c] ? n.pos[c] - 1 : n.pos[c];
            const auto& vals = traces_[c]->cycles[cycle];
            f[offsets_[c]] = m[c] ? 1 : 0;
            for (std::size_t j = offsets_[c] + 1; j < offsets_[c + 1]; ++j)
                f[j] = source_[j] >= 0 ? vals[static_cast<std::size_t>(source_[j])] : 0;
        }
        return f;
    }

    std::vector<std::int64_t> key(const Node& n) const
    {
        std::vector<std::int64_t> k;
        for (auto p : n.pos)
            k.push_back(static_cast<std::int64_t>(p));
        k.push_back(static_cast<std::int64_t>(n.history.size()));
        k.insert(k.end(), n.history.begin(), n.history.end());
        append_tokens(k, n.tokens);
        return k;
    }

    Schedule chain(const std::vector<Node>& nodes, int idx, const GlobalBinding& g) const
    {
        Schedule s;
        s.binding = g;
        for (int i = idx; i >= 0 && nodes[static_cast<std::size_t>(i)].parent >= 0; i = nodes[static_cast<std::size_t>(i)].parent) {
            const auto& n = nodes[static_cast<std::size_t>(i)];
            s.stutter.push_back(n.move);
            s.rows.push_back(rows_of(a_, nodes[static_cast<std::size_t>(n.parent)].tokens));
        }
        std::reverse(s.stutter.begin(), s.stutter.end());
        std::reverse(s.rows.begin(), s.rows.end());
        return s;
    }

    Verdict search(const GlobalBinding& g)
    {
        r_inconclusive_.reset();
        r_violation_.reset();
        r_uncovered_.reset();
        std::optional<Verdict> weak;
        std::vector<Node> nodes;
        std::set<std::vector<std::int64_t>> seen;
        Node root;
        root.pos.assign(traces_.size(), 0);
        root.tokens = initial_tokens(a_);
        nodes.push_back(root);
        seen.insert(key(root));
        if (a_.initial.accept) {
            Verdict v;
            v.kind = VerdictKind::Conforms;
            v.witness.binding = g;
            v.summary = "the table accepts the empty run";
            return v;
        }
        CellProbe probe(table_, symbols_, slots_);
        std::vector<std::size_t> level{0};
        for (std::size_t step = 0; !level.empty(); ++step) {
            std::vector<std::size_t> next;
            for (std::size_t idx : level) {
                const Node n = nodes[idx];
                auto ms = step < opt_.max_steps ? moves(n, step) : std::vector<std::vector<bool>>{};
                if (ms.empty()) {
                    end_of_input(nodes, idx, step, g, weak);
                    continue;
                }
                bool all_died = true;
                std::vector<Verdict> deaths;
                for (const auto& m : ms) {
                    auto f = frame(n, m);
                    EvalEnv env;
                    env.width = f.size();
                    env.current = f;
                    env.past = n.history;
                    env.globals = g;
                    auto [tokens, ev] = successors(*bound_, n.tokens, env);
                    if (ev.any_accept) {
                        Node acc = n;
                        acc.parent = static_cast<int>(idx);
                        acc.move = m;
                        nodes.push_back(acc);
                        Verdict v;
                        v.kind = VerdictKind::Conforms;
                        v.step = step + 1;
                        v.witness = chain(nodes, static_cast<int>(nodes.size() - 1), g);
                        v.summary = "table completed after " + std::to_string(step + 1) + " super-steps";
                        return v;
                    }
                    if (tokens.empty()) {
                        Verdict d;
                        d.step = step;
                        Node dead = n;
                        dead.parent = static_cast<int>(idx);
                        dead.move = m;
                        nodes.push_back(dead);
                        d.witness = chain(nodes, static_cast<int>(nodes.size() - 1), g);
                        nodes.pop_back();
                        if (ev.any_violation) {
                            d.kind = VerdictKind::Violation;
                            for (const auto& [s, fate] : ev.fates) {
                                if (fate != Fate::Violated)
                                    continue;
                                int row = a_.states[static_cast<std::size_t>(s)].row;
                                if (std::find(d.failed_rows.begin(), d.failed_rows.end(), row) != d.failed_rows.end())
                                    continue;
                                d.failed_rows.push_back(row);
                                for (auto& c : probe.failing(row, env))
                                    d.failed_cells.push_back("row " + std::to_string(row) + ": " + c);
                            }
                            std::sort(d.failed_rows.begin(), d.failed_rows.end());
                            d.summary = "output constraint violated at super-step " + std::to_string(step);
                        } else {
                            d.kind = VerdictKind::NotCovered;
                            d.summary = "no row covers the inputs at super-step " + std::to_string(step);
                        }
                        deaths.push_back(std::move(d));
                        continue;
                    }
                    all_died = false;
                    Node child;
                    child.pos = n.pos;
                    for (std::size_t c = 0; c < m.size(); ++c)
                        if (!m[c])
                            child.pos[c] += 1;
                    child.history = n.history;
                    push_history(child.history, f, depth_);
                    child.tokens = std::move(tokens);
                    child.parent = static_cast<int>(idx);
                    child.move = m;
                    if (seen.insert(key(child)).second) {
                        if (nodes.size() >= opt_.max_nodes) {
                            Verdict v;
                            v.kind = VerdictKind::Inconclusive;
                            v.step = step;
                            v.summary = "monitor search bound reached";
                            r_inconclusive_ = v;
                            return v;
                        }
                        nodes.push_back(std::move(child));
                        next.push_back(nodes.size() - 1);
                    }
                }
                bool exhausted = false;
                for (std::size_t c = 0; c < traces_.size(); ++c)
                    exhausted |= n.pos[c] >= traces_[c]->length();
                // an explicit schedule vouches for its stutters, so deaths count
                bool scheduled = opt_.schedule && step < opt_.schedule->size();
                if (all_died && exhausted && !scheduled) {
                    end_of_input(nodes, idx, step, g, weak);
                    continue;
                }
                for (auto& d : deaths) {
                    auto& slot = d.kind == VerdictKind::Violation ? r_violation_ : r_uncovered_;
                    bool earliest = d.kind == VerdictKind::Violation;
                    if (!slot || (earliest ? d.step < slot->step : d.step > slot->step))
                        slot = std::move(d);
                }
            }
            level = std::move(next);
        }
        if (weak)
            return *weak;
        Verdict v;
        v.kind = r_inconclusive_ ? VerdictKind::Inconclusive : r_violation_ ? VerdictKind::Violation : VerdictKind::NotCovered;
        return v;
    }

    void end_of_input(const std::vector<Node>& nodes, std::size_t idx, std::size_t step, const GlobalBinding& g,
                      std::optional<Verdict>& weak)
    {
        const Node& n = nodes[idx];
        if (n.tokens.has_omega(a_)) {
            if (!weak) {
                Verdict v;
                v.kind = VerdictKind::ConformsWeak;
                v.step = step;
                v.witness = chain(nodes, static_cast<int>(idx), g);
                v.summary = "input exhausted inside an omega repetition after " + std::to_string(step) + " super-steps";
                weak = v;
            }
            return;
        }
        if (!r_inconclusive_ || step > r_inconclusive_->step) {
            Verdict v;
            v.kind = VerdictKind::Inconclusive;
            v.step = step;
            v.witness = chain(nodes, static_cast<int>(idx), g);
            v.summary = "input exhausted after " + std::to_string(step) + " super-steps without completing the table";
            r_inconclusive_ = v;
        }
    }

    const RelationalTable& table_;
    const RowAutomaton& a_;
    const MonitorOptions& opt_;
    std::vector<const Trace*> traces_;
    std::vector<std::string> names_;
    std::vector<Type> types_;
    std::vector<int> source_;
    std::vector<std::size_t> offsets_;
    std::vector<bool> can_pause_;
    Symbols symbols_;
    SlotMap slots_;
    std::optional<BoundAutomaton> bound_;
    std::size_t depth_ = 0;
    std::optional<Verdict> r_inconclusive_, r_violation_, r_uncovered_;
};

} // namespace

Verdict monitor(const std::vector<Trace>& traces, const RelationalTable& table, const RowAutomaton& automaton,
                const MonitorOptions& options)
{
    return Monitor(traces, table, automaton, options).run();
}

Verdict monitor(const std::vector<Trace>& traces, const RelationalTable& table, const MonitorOptions& options)
{
    auto a = compile(table);
    return monitor(traces, table, a, options);
}

// ---------------------------------------------------------------------------
// Checker

std::string_view to_string(Mode m)
{
    return m == Mode::Weak ? "weak" : "strict";
}

std::string_view to_string(Outcome o)
{
    switch (o) {
    case Outcome::Holds: return "holds";
    case Outcome::Fails: return "fails";
    case Outcome::Unknown: return "unknown";
    }
    return "?";
}

CheckLayout check_layout(const ProductSystem& sys)
{
    CheckLayout l;
    for (std::size_t c = 0; c < sys.size(); ++c) {
        const auto& t = sys.traces()[c];
        l.names.push_back(t + "::stutt");
        l.types.push_back(Type::boolean());
        for (const auto& v : sys.component(c).base().vars) {
            l.names.push_back(t + "::" + v.name);
            l.types.push_back(v.type);
        }
    }
    return l;
}

void check_compatible(const ProductSystem& sys, const RelationalTable& table)
{
    std::set<std::string> tt(table.traces.begin(), table.traces.end());
    std::set<std::string> st(sys.traces().begin(), sys.traces().end());
    if (tt != st)
        throw Error("the table's traces do not match the systems' traces");
    for (const auto& col : table.columns) {
        int c = sys.trace_index(col.trace);
        if (col.kind == ColumnKind::Pause)
            continue;
        const VarDecl* d = sys.component(static_cast<std::size_t>(c)).base().find(col.variable);
        if (!d)
            throw Error("column " + col.name() + " has no variable in system '"
                        + sys.component(static_cast<std::size_t>(c)).base().name + "'");
        if ((col.kind == ColumnKind::Input) != (d->kind == VarKind::Input))
            throw Error("column " + col.name() + " is an " + std::string(col.kind == ColumnKind::Input ? "input" : "output")
                        + " column but the system declares it as " + std::string(to_string(d->kind)));
        if (!col.type.compatible(d->type))
            throw Error("column " + col.name() + " : " + to_string(col.type) + " does not match the system type "
                        + to_string(d->type));
    }
}

namespace {

class Checker {
public:
    Checker(const ProductSystem& sys, const RelationalTable& table, const CheckOptions& opt)
        : sys_(sys), table_(table), opt_(opt), a_(compile(table)), layout_(check_layout(sys))
    {
        check_compatible(sys, table);
        symbols_.enums = &table.enums;
        for (const auto& g : table.globals)
            symbols_.globals[g.name] = g.type;
        for (std::size_t i = 0; i < layout_.names.size(); ++i) {
            symbols_.vars[layout_.names[i]] = layout_.types[i];
            slots_.vars[layout_.names[i]] = static_cast<int>(i);
        }
        for (std::size_t i = 0; i < table.globals.size(); ++i)
            slots_.globals[table.globals[i].name] = static_cast<int>(i);
        try {
            bound_.emplace(a_, symbols_, slots_);
        } catch (const TypeError& e) {
            throw Error(std::string("table does not match the systems: ") + e.what());
        }
        depth_ = static_cast<std::size_t>(table.history_bound());

        std::size_t io = 0, fo = 0;
        for (std::size_t c = 0; c < sys.size(); ++c) {
            const auto& base = sys.component(c).base();
            input_off_.push_back(io);
            frame_off_.push_back(fo);
            io += base.inputs().size() + 1;
            fo += base.vars.size() + 1;
            can_pause_.push_back(table.has_pause_column(sys.traces()[c]));
            std::vector<Type> t;
            for (int i : base.inputs())
                t.push_back(base.vars[static_cast<std::size_t>(i)].type);
            input_types_.push_back(std::move(t));
            // var index -> (is input, index into inputs or memory)
            std::vector<std::pair<bool, std::size_t>> src(base.vars.size());
            for (std::size_t k = 0; k < base.inputs().size(); ++k)
                src[static_cast<std::size_t>(base.inputs()[k])] = {true, k};
            for (std::size_t k = 0; k < base.memory().size(); ++k)
                src[static_cast<std::size_t>(base.memory()[k])] = {false, k};
            sources_.push_back(std::move(src));
        }
        input_off_.push_back(io);
        frame_off_.push_back(fo);
        std::size_t so = 0;
        for (std::size_t c = 0; c < sys.size(); ++c) {
            state_off_.push_back(so);
            so += sys.component(c).base().memory().size();
        }
    }

    CheckResult weak()
    {
        CheckResult r;
        r.mode = Mode::Weak;
        auto t0 = std::chrono::steady_clock::now();
        explore(true, r);
        r.stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return r;
    }

    CheckResult strict()
    {
        auto t0 = std::chrono::steady_clock::now();
        CheckResult r = weak();
        r.mode = Mode::Strict;
        if (r.outcome != Outcome::Holds) {
            r.stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            return r;
        }
        CheckResult s;
        s.mode = Mode::Strict;
        explore(false, s);
        s.stats.states += r.stats.states;
        s.stats.transitions += r.stats.transitions;
        if (s.outcome != Outcome::Unknown)
            find_lasso(s);
        s.stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return s;
    }

private:
    struct Config {
        ProductState state;
        std::vector<std::int64_t> last_inputs;
        std::vector<char> started;
        std::vector<std::int64_t> history;
        TokenSet tokens;
        std::size_t binding = 0;
    };
    struct Meta {
        int parent = -1;
        std::vector<std::int64_t> move;
    };
    enum class Kind { Continue, Win, Loss };
    struct Transition {
        Kind kind = Kind::Continue;
        Config next;
        std::vector<std::int64_t> frame;
        StepEvents events;
    };

    std::vector<std::int64_t> key(const Config& c) const
    {
        std::vector<std::int64_t> k;
        k.push_back(static_cast<std::int64_t>(c.binding));
        k.insert(k.end(), c.state.begin(), c.state.end());
        k.insert(k.end(), c.last_inputs.begin(), c.last_inputs.end());
        for (char s : c.started)
            k.push_back(s);
        k.push_back(static_cast<std::int64_t>(c.history.size()));
        k.insert(k.end(), c.history.begin(), c.history.end());
        append_tokens(k, c.tokens);
        return k;
    }

    /// Challenger moves in canonical order: stutter pattern (FALSE first,
    /// first trace most significant), then inputs of the moving traces.
    std::vector<std::vector<std::int64_t>> moves(const Config& c) const
    {
        std::vector<std::vector<std::int64_t>> out;
        std::size_t k = sys_.size();
        for (std::size_t mask = 0; mask < (std::size_t{1} << k); ++mask) {
            std::vector<bool> st(k);
            bool ok = true, all = true;
            for (std::size_t i = 0; i < k; ++i) {
                st[i] = (mask >> (k - 1 - i)) & 1;
                if (st[i] && (!can_pause_[i] || !c.started[i]))
                    ok = false;
                all = all && st[i];
            }
            if (!ok || all)
                continue;
            std::vector<Type> types;
            for (std::size_t i = 0; i < k; ++i)
                if (!st[i])
                    types.insert(types.end(), input_types_[i].begin(), input_types_[i].end());
            auto v = first_valuation(types);
            do {
                std::vector<std::int64_t> in(input_off_.back());
                std::size_t pos = 0;
                for (std::size_t i = 0; i < k; ++i) {
                    in[input_off_[i]] = st[i] ? 1 : 0;
                    for (std::size_t j = input_off_[i] + 1; j < input_off_[i + 1]; ++j)
                        in[j] = st[i] ? c.last_inputs[j] : v[pos++];
                }
                out.push_back(std::move(in));
            } while (next_valuation(v, types));
        }
        return out;
    }

    Transition step(const Config& c, const std::vector<std::int64_t>& in, const BoundAutomaton& bound,
                    const GlobalBinding& g, bool accept_terminal) const
    {
        Transition t;
        auto ps = sys_.step(c.state, in);
        t.frame.assign(frame_off_.back(), 0);
        for (std::size_t i = 0; i < sys_.size(); ++i) {
            t.frame[frame_off_[i]] = in[input_off_[i]];
            const auto& src = sources_[i];
            for (std::size_t v = 0; v < src.size(); ++v) {
                auto [is_in, k] = src[v];
                t.frame[frame_off_[i] + 1 + v] =
                    is_in ? in[input_off_[i] + 1 + k] : ps.next[state_off_[i] + k];
            }
        }
        EvalEnv env;
        env.width = t.frame.size();
        env.current = t.frame;
        env.past = c.history;
        env.globals = g;
        auto [tokens, ev] = successors(bound, c.tokens, env);
        t.events = ev;
        if (ev.all_uncovered) {
            t.kind = Kind::Win;
            return t;
        }
        if (tokens.empty()) {
            t.kind = ev.any_violation && !ev.any_accept ? Kind::Loss : Kind::Win;
            return t;
        }
        if (ev.any_accept && accept_terminal) {
            t.kind = Kind::Win;
            return t;
        }
        t.next.state = std::move(ps.next);
        t.next.last_inputs = in;
        t.next.started = c.started;
        for (std::size_t i = 0; i < sys_.size(); ++i)
            if (!in[input_off_[i]])
                t.next.started[i] = 1;
        t.next.history = c.history;
        push_history(t.next.history, t.frame, depth_);
        t.next.tokens = std::move(tokens);
        t.next.binding = c.binding;
        return t;
    }

    void explore(bool weak_mode, CheckResult& r)
    {
        configs_.clear();
        meta_.clear();
        edges_.clear();
        bindings_ = table_.global_bindings();
        std::unordered_map<std::vector<std::int64_t>, int, VecHash> index;
        if (weak_mode && a_.initial.accept) {
            r.outcome = Outcome::Holds;
            r.message = "the table accepts the empty play";
            return;
        }
        for (std::size_t b = 0; b < bindings_.size(); ++b) {
            Config root;
            root.state = sys_.initial_state();
            root.last_inputs.assign(input_off_.back(), 0);
            for (std::size_t i = 0; i < sys_.size(); ++i)
                for (std::size_t j = 0; j < input_types_[i].size(); ++j)
                    root.last_inputs[input_off_[i] + 1 + j] = input_types_[i][j].min_raw();
            root.started.assign(sys_.size(), 0);
            root.tokens = initial_tokens(a_);
            root.binding = b;
            index.emplace(key(root), static_cast<int>(configs_.size()));
            configs_.push_back(std::move(root));
            meta_.push_back({});
            edges_.emplace_back();
        }
        for (std::size_t i = 0; i < configs_.size(); ++i) {
            auto ms = moves(configs_[i]);
            for (auto& m : ms) {
                const Config& c = configs_[i];
                auto t = step(c, m, *bound_, bindings_[c.binding], weak_mode);
                ++r.stats.transitions;
                if (t.kind == Kind::Win)
                    continue;
                if (t.kind == Kind::Loss) {
                    if (!weak_mode)
                        continue;
                    r.outcome = Outcome::Fails;
                    r.stats.states = configs_.size();
                    r.counterexample = build_cex(static_cast<int>(i), &m, &t);
                    r.message = "weak conformance fails after " + std::to_string(r.counterexample->steps.size())
                                + " super-steps";
                    return;
                }
                auto k = key(t.next);
                auto it = index.find(k);
                int id;
                if (it == index.end()) {
                    if (configs_.size() >= opt_.max_states) {
                        r.outcome = Outcome::Unknown;
                        r.stats.states = configs_.size();
                        r.message = "state bound of " + std::to_string(opt_.max_states) + " configurations exceeded";
                        return;
                    }
                    id = static_cast<int>(configs_.size());
                    index.emplace(std::move(k), id);
                    configs_.push_back(std::move(t.next));
                    meta_.push_back({static_cast<int>(i), m});
                    edges_.emplace_back();
                } else {
                    id = it->second;
                }
                if (!weak_mode)
                    edges_[i].push_back({id, m});
            }
        }
        r.outcome = Outcome::Holds;
        r.stats.states = configs_.size();
        r.message = weak_mode ? "no reachable configuration loses" : "";
    }

    void find_lasso(CheckResult& r)
    {
        // Tarjan over configurations without omega tokens.
        std::size_t n = configs_.size();
        std::vector<char> live(n);
        for (std::size_t i = 0; i < n; ++i)
            live[i] = !configs_[i].tokens.has_omega(a_);
        std::vector<int> idx(n, -1), low(n, 0), comp(n, -1);
        std::vector<char> on(n, 0);
        std::vector<int> stack;
        int counter = 0, ncomp = 0;
        std::vector<std::size_t> comp_size;
        for (std::size_t s = 0; s < n; ++s) {
            if (!live[s] || idx[s] >= 0)
                continue;
            std::vector<std::pair<int, std::size_t>> work{{static_cast<int>(s), 0}};
            idx[s] = low[s] = counter++;
            stack.push_back(static_cast<int>(s));
            on[s] = 1;
            while (!work.empty()) {
                auto& [v, ei] = work.back();
                if (ei < edges_[static_cast<std::size_t>(v)].size()) {
                    int w = edges_[static_cast<std::size_t>(v)][ei++].first;
                    if (!live[static_cast<std::size_t>(w)])
                        continue;
                    if (idx[static_cast<std::size_t>(w)] < 0) {
                        idx[static_cast<std::size_t>(w)] = low[static_cast<std::size_t>(w)] = counter++;
                        stack.push_back(w);
                        on[static_cast<std::size_t>(w)] = 1;
                        work.push_back({w, 0});
                    } else if (on[static_cast<std::size_t>(w)]) {
                        low[static_cast<std::size_t>(v)] = std::min(low[static_cast<std::size_t>(v)], idx[static_cast<std::size_t>(w)]);
                    }
                    continue;
                }
                int vv = v;
                work.pop_back();
                if (!work.empty()) {
                    int u = work.back().first;
                    low[static_cast<std::size_t>(u)] = std::min(low[static_cast<std::size_t>(u)], low[static_cast<std::size_t>(vv)]);
                }
                if (low[static_cast<std::size_t>(vv)] == idx[static_cast<std::size_t>(vv)]) {
                    std::size_t size = 0;
                    int w;
                    do {
                        w = stack.back();
                        stack.pop_back();
                        on[static_cast<std::size_t>(w)] = 0;
                        comp[static_cast<std::size_t>(w)] = ncomp;
                        ++size;
                    } while (w != vv);
                    comp_size.push_back(size);
                    ++ncomp;
                }
            }
        }
        auto cyclic = [&](std::size_t v) {
            if (!live[v])
                return false;
            if (comp_size[static_cast<std::size_t>(comp[v])] > 1)
                return true;
            for (const auto& e : edges_[v])
                if (static_cast<std::size_t>(e.first) == v)
                    return true;
            return false;
        };
        for (std::size_t v = 0; v < n; ++v) {
            if (!cyclic(v))
                continue;
            // Shortest cycle through v inside its component.
            std::vector<int> prev(n, -2);
            std::vector<const std::vector<std::int64_t>*> via(n, nullptr);
            std::vector<int> queue{static_cast<int>(v)};
            bool found = false;
            int last = -1;
            const std::vector<std::int64_t>* last_move = nullptr;
            for (std::size_t q = 0; q < queue.size() && !found; ++q) {
                int u = queue[q];
                for (const auto& [w, m] : edges_[static_cast<std::size_t>(u)]) {
                    if (comp[static_cast<std::size_t>(w)] != comp[v] || !live[static_cast<std::size_t>(w)])
                        continue;
                    if (static_cast<std::size_t>(w) == v) {
                        found = true;
                        last = u;
                        last_move = &m;
                        break;
                    }
                    if (prev[static_cast<std::size_t>(w)] == -2) {
                        prev[static_cast<std::size_t>(w)] = u;
                        via[static_cast<std::size_t>(w)] = &m;
                        queue.push_back(w);
                    }
                }
            }
            if (!found)
                continue;
            std::vector<std::vector<std::int64_t>> cycle_moves{*last_move};
            for (int u = last; static_cast<std::size_t>(u) != v; u = prev[static_cast<std::size_t>(u)])
                cycle_moves.push_back(*via[static_cast<std::size_t>(u)]);
            std::reverse(cycle_moves.begin(), cycle_moves.end());
            auto cex = build_cex(static_cast<int>(v), nullptr, nullptr);
            cex.loop_start = cex.steps.size();
            extend(cex, configs_[v], cycle_moves);
            cex.diagnostics.push_back("the play can cycle forever without completing the table or reaching an omega row");
            r.outcome = Outcome::Fails;
            r.counterexample = std::move(cex);
            r.message = "strict conformance fails: non-accepting cycle of length " + std::to_string(cycle_moves.size());
            return;
        }
        r.message = "every infinite play reaches an omega row";
    }

    void extend(Counterexample& cex, Config c, const std::vector<std::vector<std::int64_t>>& moves) const
    {
        const auto& g = bindings_[c.binding];
        for (const auto& m : moves) {
            auto t = step(c, m, *bound_, g, false);
            cex.steps.push_back({m, t.frame, rows_of(a_, c.tokens)});
            if (t.kind != Kind::Continue)
                break;
            c = std::move(t.next);
        }
    }

    Counterexample build_cex(int last, const std::vector<std::int64_t>* final_move, const Transition* final_t) const
    {
        std::vector<int> path;
        for (int i = last; i >= 0; i = meta_[static_cast<std::size_t>(i)].parent)
            path.push_back(i);
        std::reverse(path.begin(), path.end());
        Counterexample cex;
        const Config& root = configs_[static_cast<std::size_t>(path.front())];
        cex.binding = bindings_[root.binding];
        std::vector<std::vector<std::int64_t>> moves;
        for (std::size_t k = 1; k < path.size(); ++k)
            moves.push_back(meta_[static_cast<std::size_t>(path[k])].move);
        extend(cex, root, moves);
        if (final_move) {
            const Config& c = configs_[static_cast<std::size_t>(last)];
            cex.steps.push_back({*final_move, final_t->frame, rows_of(a_, c.tokens)});
            std::set<int> rows;
            EvalEnv env;
            env.width = final_t->frame.size();
            env.current = final_t->frame;
            env.past = c.history;
            env.globals = cex.binding;
            CellProbe probe(table_, symbols_, slots_);
            for (const auto& [s, fate] : final_t->events.fates) {
                if (fate != Fate::Violated)
                    continue;
                int row = a_.states[static_cast<std::size_t>(s)].row;
                if (!rows.insert(row).second)
                    continue;
                std::string cells;
                for (const auto& n : probe.failing(row, env))
                    cells += (cells.empty() ? "" : ", ") + n;
                cex.diagnostics.push_back("super-step " + std::to_string(cex.steps.size() - 1) + ": row "
                                          + std::to_string(row) + " violated" + (cells.empty() ? "" : " (" + cells + ")"));
            }
        }
        return cex;
    }

    const ProductSystem& sys_;
    const RelationalTable& table_;
    const CheckOptions& opt_;
    RowAutomaton a_;
    CheckLayout layout_;
    Symbols symbols_;
    SlotMap slots_;
    std::optional<BoundAutomaton> bound_;
    std::size_t depth_ = 0;
    std::vector<std::size_t> input_off_, frame_off_, state_off_;
    std::vector<bool> can_pause_;
    std::vector<std::vector<Type>> input_types_;
    std::vector<std::vector<std::pair<bool, std::size_t>>> sources_;
    std::vector<GlobalBinding> bindings_;
    std::vector<Config> configs_;
    std::vector<Meta> meta_;
    std::vector<std::vector<std::pair<int, std::vector<std::int64_t>>>> edges_;
};

} // namespace

CheckResult check_weak(const ProductSystem& sys, const RelationalTable& table, const CheckOptions& options)
{
    return Checker(sys, table, options).weak();
}

CheckResult check_strict(const ProductSystem& sys, const RelationalTable& table, const CheckOptions& options)
{
    return Checker(sys, table, options).strict();
}

CheckResult check(const ProductSystem& sys, const RelationalTable& table, Mode mode, const CheckOptions& options)
{
    return mode == Mode::Weak ? check_weak(sys, table, options) : check_strict(sys, table, options);
}

std::vector<std::vector<bool>> Counterexample::schedule(const ProductSystem& sys) const
{
    std::vector<std::vector<bool>> out;
    for (const auto& s : steps) {
        std::vector<bool> row;
        std::size_t off = 0;
        for (std::size_t c = 0; c < sys.size(); ++c) {
            row.push_back(s.inputs[off] != 0);
            off += sys.component(c).base().inputs().size() + 1;
        }
        out.push_back(std::move(row));
    }
    return out;
}

std::vector<Trace> Counterexample::traces(const ProductSystem& sys) const
{
    std::vector<Trace> out;
    std::size_t off = 0;
    for (std::size_t c = 0; c < sys.size(); ++c) {
        const auto& base = sys.component(c).base();
        Trace t;
        t.name = sys.traces()[c];
        for (const auto& v : base.vars)
            t.variables.push_back(v.name);
        for (const auto& s : steps) {
            if (s.visible[off] != 0)
                continue;
            t.cycles.emplace_back(s.visible.begin() + static_cast<std::ptrdiff_t>(off + 1),
                                  s.visible.begin() + static_cast<std::ptrdiff_t>(off + 1 + base.vars.size()));
        }
        off += base.vars.size() + 1;
        out.push_back(std::move(t));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

std::string rows_text(const std::vector<int>& rows)
{
    std::string s;
    for (int r : rows)
        s += (s.empty() ? "" : " ") + std::to_string(r);
    return s.empty() ? "-" : s;
}

std::string binding_text(const RelationalTable& t, const GlobalBinding& g)
{
    auto s = t.format_binding(g);
    return s.empty() ? "(no globals)" : s;
}

nlohmann::json binding_json(const RelationalTable& t, const GlobalBinding& g)
{
    nlohmann::json j = nlohmann::json::object();
    for (std::size_t i = 0; i < t.globals.size() && i < g.size(); ++i)
        j[t.globals[i].name] = format_value(t.globals[i].type, g[i]);
    return j;
}

} // namespace

std::string format_verdict(const Verdict& v, const RelationalTable& table)
{
    std::ostringstream os;
    os << "verdict: " << to_string(v.kind) << "\n";
    if (!v.summary.empty())
        os << "summary: " << v.summary << "\n";
    os << "binding: " << binding_text(table, v.witness.binding) << "\n";
    for (std::size_t k = 0; k < v.witness.stutter.size(); ++k) {
        os << k << " | stutter";
        for (std::size_t c = 0; c < v.witness.stutter[k].size(); ++c)
            os << ' ' << table.traces[c] << "=" << (v.witness.stutter[k][c] ? "TRUE" : "FALSE");
        os << " | rows " << rows_text(v.witness.rows[k]) << "\n";
    }
    for (const auto& c : v.failed_cells)
        os << "failed: " << c << "\n";
    return os.str();
}

std::string format_verdict_json(const Verdict& v, const RelationalTable& table)
{
    nlohmann::json j;
    j["verdict"] = std::string(to_string(v.kind));
    j["step"] = v.step;
    j["summary"] = v.summary;
    j["binding"] = binding_json(table, v.witness.binding);
    auto steps = nlohmann::json::array();
    for (std::size_t k = 0; k < v.witness.stutter.size(); ++k) {
        nlohmann::json s;
        s["k"] = k;
        nlohmann::json st = nlohmann::json::object();
        for (std::size_t c = 0; c < v.witness.stutter[k].size(); ++c)
            st[table.traces[c]] = static_cast<bool>(v.witness.stutter[k][c]);
        s["stutter"] = st;
        s["rows"] = v.witness.rows[k];
        steps.push_back(s);
    }
    j["schedule"] = steps;
    j["failed_rows"] = v.failed_rows;
    j["failed_cells"] = v.failed_cells;
    return j.dump(2) + "\n";
}

std::string format_counterexample(const Counterexample& cex, const ProductSystem& sys, const RelationalTable& table)
{
    auto layout = check_layout(sys);
    std::ostringstream os;
    os << "# binding: " << binding_text(table, cex.binding) << "\n";
    for (std::size_t k = 0; k < cex.steps.size(); ++k) {
        if (cex.loop_start && *cex.loop_start == k)
            os << "# loop starts here\n";
        const auto& s = cex.steps[k];
        os << k << " |";
        for (std::size_t i = 0; i < layout.names.size(); ++i)
            os << ' ' << layout.names[i] << "=" << format_value(layout.types[i], s.visible[i]);
        os << " | rows " << rows_text(s.rows) << "\n";
    }
    if (cex.loop_start)
        os << "# loop back to step " << *cex.loop_start << "\n";
    for (const auto& d : cex.diagnostics)
        os << "# " << d << "\n";
    return os.str();
}

std::string format_result(const CheckResult& r, const ProductSystem& sys, const RelationalTable& table)
{
    std::ostringstream os;
    os << "mode: " << to_string(r.mode) << "\n";
    os << "result: " << to_string(r.outcome) << "\n";
    if (!r.message.empty())
        os << "message: " << r.message << "\n";
    os << "configurations: " << r.stats.states << "\n";
    os << "transitions: " << r.stats.transitions << "\n";
    os << "time: " << r.stats.seconds << " s\n";
    if (r.counterexample)
        os << format_counterexample(*r.counterexample, sys, table);
    return os.str();
}

std::string format_result_json(const CheckResult& r, const ProductSystem& sys, const RelationalTable& table)
{
    nlohmann::json j;
    j["mode"] = std::string(to_string(r.mode));
    j["result"] = std::string(to_string(r.outcome));
    j["message"] = r.message;
    j["configurations"] = r.stats.states;
    j["transitions"] = r.stats.transitions;
    j["seconds"] = r.stats.seconds;
    if (r.counterexample) {
        auto layout = check_layout(sys);
        const auto& cex = *r.counterexample;
        nlohmann::json c;
        c["binding"] = binding_json(table, cex.binding);
        c["loop_start"] = cex.loop_start ? nlohmann::json(*cex.loop_start) : nlohmann::json(nullptr);
        auto steps = nlohmann::json::array();
        for (std::size_t k = 0; k < cex.steps.size(); ++k) {
            nlohmann::json s;
            s["k"] = k;
            nlohmann::json vals = nlohmann::json::object();
            for (std::size_t i = 0; i < layout.names.size(); ++i)
                vals[layout.names[i]] = format_value(layout.types[i], cex.steps[k].visible[i]);
            s["values"] = vals;
            s["rows"] = cex.steps[k].rows;
            steps.push_back(s);
        }
        c["steps"] = steps;
        c["diagnostics"] = cex.diagnostics;
        j["counterexample"] = c;
    } else {
        j["counterexample"] = nullptr;
    }
    return j.dump(2) + "\n";
}

} // namespace rtt
