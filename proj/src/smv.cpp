#include "rtt/smv.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <set>
#include <sstream>

namespace rtt {

int SmvModel::state_bits() const
{
    int n = 0;
    for (const auto& e : manifest)
        n += e.bits;
    return n;
}

namespace {

int bits_for(std::int64_t lo, std::int64_t hi)
{
    int b = 0;
    for (std::uint64_t span = static_cast<std::uint64_t>(hi - lo); span > 0; span >>= 1)
        ++b;
    return b;
}

std::string ident(const std::string& trace, const std::string& var)
{
    return trace + "__" + var;
}

std::string smv_type(const Type& t)
{
    if (t.kind == TypeKind::Bool)
        return "boolean";
    return std::to_string(t.min_raw()) + ".." + std::to_string(t.max_raw());
}

std::string literal(const Type& t, std::int64_t raw)
{
    if (t.kind == TypeKind::Bool)
        return raw ? "TRUE" : "FALSE";
    return std::to_string(raw);
}

std::string join(const std::vector<std::string>& parts, const std::string& sep, const std::string& empty)
{
    if (parts.empty())
        return empty;
    if (parts.size() == 1)
        return parts[0];
    std::string s;
    for (std::size_t i = 0; i < parts.size(); ++i)
        s += (i ? sep : "") + parts[i];
    return "(" + s + ")";
}

/// Expression printer. `name` maps a variable reference to SMV text;
/// `atoms` turns on the missing-history / division-by-zero guards used for
/// table cells.
class ExprWriter {
public:
    using Namer = std::function<std::string(const VarRef&)>;

    ExprWriter(const Symbols& sym, const EnumRegistry* enums, Namer namer, std::string hist_len)
        : sym_(sym), enums_(enums), namer_(std::move(namer)), hist_len_(std::move(hist_len))
    {
    }

    std::string write(const Expr& e) { return node(e); }

private:
    bool is_bool(const Expr& e) const { return typecheck(e, sym_).kind == TypeKind::Bool; }

    // Validity conditions of the arithmetic below a Boolean atom.
    void conditions(const Expr& e, std::vector<std::string>& out)
    {
        switch (e.kind) {
        case ExprKind::Var:
            if (e.ref.offset < 0)
                out.push_back(hist_len_ + " >= " + std::to_string(-e.ref.offset));
            return;
        case ExprKind::Unary:
            if (!is_bool(*e.lhs))
                conditions(*e.lhs, out);
            return;
        case ExprKind::Binary:
            if (!is_bool(*e.lhs))
                conditions(*e.lhs, out);
            if (!is_bool(*e.rhs))
                conditions(*e.rhs, out);
            if (e.op == Op::Div || e.op == Op::Mod)
                out.push_back(node(*e.rhs) + " != 0");
            return;
        default: return;
        }
    }

    std::string node(const Expr& e)
    {
        switch (e.kind) {
        case ExprKind::Int: return e.value < 0 ? "(" + std::to_string(e.value) + ")" : std::to_string(e.value);
        case ExprKind::Bool: return e.value ? "TRUE" : "FALSE";
        case ExprKind::EnumConst: return std::to_string(resolve_enum_constant(e, enums_).second);
        case ExprKind::Global: return "g__" + e.name;
        case ExprKind::Var: {
            auto n = namer_(e.ref);
            if (e.ref.offset < 0 && !hist_len_.empty() && is_bool(e))
                return "(" + hist_len_ + " >= " + std::to_string(-e.ref.offset) + " & " + n + ")";
            return n;
        }
        case ExprKind::Unary:
            if (e.op == Op::Not)
                return "!" + node(*e.lhs);
            return "(-" + node(*e.lhs) + ")";
        case ExprKind::Binary: {
            auto a = node(*e.lhs);
            auto b = node(*e.rhs);
            if (e.op == Op::Div || e.op == Op::Mod)
                b = "(case " + b + " = 0 : 1; TRUE : " + b + "; esac)";
            std::string s = "(" + a + " " + std::string(op_symbol(e.op)) + " " + b + ")";
            if (e.op == Op::And)
                s = "(" + a + " & " + b + ")";
            else if (e.op == Op::Or)
                s = "(" + a + " | " + b + ")";
            else if (e.op == Op::Ne)
                s = "(" + a + " != " + b + ")";
            if (!hist_len_.empty() && !is_logical(e.op) && is_bool(e)) {
                std::vector<std::string> c;
                conditions(e, c);
                if (!c.empty()) {
                    c.push_back(s);
                    return join(c, " & ", "TRUE");
                }
            }
            return s;
        }
        }
        return "FALSE";
    }

    const Symbols& sym_;
    const EnumRegistry* enums_;
    Namer namer_;
    std::string hist_len_;
};

class Emitter {
public:
    Emitter(const ProductSystem& p, const RelationalTable& t, Mode m)
        : p_(p), t_(t), mode_(m), a_(compile(t)), depth_(t.history_bound())
    {
    }

    SmvModel run()
    {
        layout_ = check_layout(p_);
        for (std::size_t i = 0; i < layout_.names.size(); ++i)
            sym_.vars[layout_.names[i]] = layout_.types[i];
        for (const auto& g : t_.globals)
            sym_.globals[g.name] = g.type;
        sym_.enums = &t_.enums;
        collect_history();

        header();
        system_vars();
        table_vars();
        defines();
        assigns();
        constraints();
        specs();

        SmvModel m;
        m.text = out_.str();
        m.manifest = std::move(manifest_);
        m.specs = std::move(specs_);
        return m;
    }

private:
    void line(const std::string& s) { out_ << s << "\n"; }

    void var(const std::string& name, const Type& type, const std::string& origin, const std::string& source)
    {
        line("  " + name + " : " + smv_type(type) + ";");
        int bits = type.kind == TypeKind::Bool ? 1 : bits_for(type.min_raw(), type.max_raw());
        manifest_.push_back({name, smv_type(type), origin, source, bits});
    }

    bool pausable(std::size_t c) const { return t_.has_pause_column(p_.traces()[c]); }

    const VarDecl& decl(std::size_t c, int i) const
    {
        return p_.component(c).base().vars[static_cast<std::size_t>(i)];
    }

    void collect_history()
    {
        for (const auto& s : a_.states) {
            for (const auto& g : {s.input_guard, s.output_guard}) {
                for_each_var(*g, [&](const VarRef& r) {
                    if (r.offset < 0) {
                        auto& d = hist_[r.qualified_name()];
                        d = std::max(d, -r.offset);
                    }
                });
            }
        }
    }

    void header()
    {
        line("-- table " + t_.name + ", " + std::string(to_string(mode_)) + " conformance");
        line("-- traces: " + [&] {
            std::string s;
            for (const auto& tr : p_.traces())
                s += (s.empty() ? "" : " ") + tr;
            return s;
        }());
        line("MODULE main");
    }

    void system_vars()
    {
        line("VAR");
        for (std::size_t c = 0; c < p_.size(); ++c) {
            const auto& tr = p_.traces()[c];
            const auto& base = p_.component(c).base();
            if (pausable(c))
                var(ident(tr, "stutt"), Type::boolean(), "plumbing", tr + "::stutt");
            for (const auto& v : base.vars)
                var(ident(tr, v.name), v.type, "system", tr + "::" + v.name);
        }
    }

    void table_vars()
    {
        for (std::size_t c = 0; c < p_.size(); ++c) {
            const auto& tr = p_.traces()[c];
            const auto& base = p_.component(c).base();
            if (!pausable(c))
                continue;
            var("started__" + tr, Type::boolean(), "plumbing", "");
            for (int i : base.inputs())
                var("last__" + ident(tr, decl(c, i).name), decl(c, i).type, "plumbing", "");
        }
        for (const auto& [name, d] : hist_) {
            auto type = sym_.vars.at(name);
            auto sep = name.find("::");
            for (int k = 1; k <= d; ++k)
                var("h" + std::to_string(k) + "__" + ident(name.substr(0, sep), name.substr(sep + 2)), type,
                    "plumbing", name + "[-" + std::to_string(k) + "]");
        }
        if (depth_ > 0)
            var("hist_len", Type::integer(0, depth_), "plumbing", "");
        for (const auto& s : a_.states)
            var("act_" + std::to_string(s.id), Type::boolean(), "table", "row " + std::to_string(s.row) + " copy "
                                                                            + std::to_string(s.copy));
        for (const auto& [t, p] : stay_pairs()) {
            (void)p;
            if (!pure_declared_.insert(t).second)
                continue;
            var("pure_" + std::to_string(t), Type::boolean(), "table", "");
        }
        for (const auto& [t, p] : stay_pairs())
            var("src_" + std::to_string(t) + "_" + std::to_string(p), Type::boolean(), "table", "");
        for (const auto& s : a_.states)
            if (s.progress)
                var("pp_" + std::to_string(s.id), Type::boolean(), "table", "");
        var("wdone", Type::boolean(), "plumbing", "");
        if (mode_ == Mode::Strict)
            var("sdone", Type::boolean(), "plumbing", "");
        if (!t_.globals.empty()) {
            line("FROZENVAR");
            for (const auto& g : t_.globals)
                var("g__" + g.name, g.type, "table", g.name);
        }
    }

    // (target, progress parent) pairs where the target is reached by a stay.
    std::vector<std::pair<int, int>> stay_pairs() const
    {
        std::vector<std::pair<int, int>> out;
        for (const auto& s : a_.states) {
            if (!s.progress)
                continue;
            for (int t : a_.next[static_cast<std::size_t>(s.id)].states)
                if (a_.is_stay(s.id, t))
                    out.emplace_back(t, s.id);
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    std::string frame_name(const VarRef& r) const
    {
        std::size_t c = static_cast<std::size_t>(p_.trace_index(r.trace));
        if (r.offset < 0)
            return "h" + std::to_string(-r.offset) + "__" + ident(r.trace, r.variable);
        if (r.variable == kStutterVar)
            return pausable(c) ? ident(r.trace, "stutt") : "FALSE";
        const VarDecl* d = p_.component(c).base().find(r.variable);
        if (d && d->kind != VarKind::Input)
            return ident(r.trace, r.variable) + "__post";
        return ident(r.trace, r.variable);
    }

    // Straight-line encoding of one step body.
    using Env = std::map<std::string, std::string>;

    void body(std::size_t c, const std::vector<Stmt>& stmts, Env& env, int& counter)
    {
        const auto& base = p_.component(c).base();
        const auto& tr = p_.traces()[c];
        Symbols sym;
        for (const auto& v : base.vars)
            sym.vars[v.name] = v.type;
        sym.enums = &base.enums;
        auto write = [&](const Expr& e, const Env& en) {
            ExprWriter w(sym, &base.enums, [&](const VarRef& r) { return en.at(r.variable); }, "");
            return w.write(e);
        };
        for (const auto& s : stmts) {
            if (s.kind == Stmt::Kind::Assign) {
                auto name = ident(tr, s.target) + "__" + std::to_string(counter++);
                line("  " + name + " := " + write(*s.value, env) + ";");
                env[s.target] = name;
                continue;
            }
            std::vector<std::string> conds;
            std::vector<Env> envs;
            for (const auto& [cond, stmts2] : s.branches) {
                conds.push_back(write(*cond, env));
                Env e = env;
                body(c, stmts2, e, counter);
                envs.push_back(std::move(e));
            }
            Env other = env;
            body(c, s.otherwise, other, counter);
            for (auto& [name, value] : env) {
                bool differs = other.at(name) != value;
                for (const auto& e : envs)
                    differs |= e.at(name) != value;
                if (!differs)
                    continue;
                auto merged = ident(tr, name) + "__" + std::to_string(counter++);
                std::string s2 = "case";
                for (std::size_t i = 0; i < conds.size(); ++i)
                    s2 += " " + conds[i] + " : " + envs[i].at(name) + ";";
                s2 += " TRUE : " + other.at(name) + "; esac";
                line("  " + merged + " := " + s2 + ";");
                value = merged;
            }
        }
    }

    void defines()
    {
        line("DEFINE");
        for (std::size_t c = 0; c < p_.size(); ++c) {
            const auto& tr = p_.traces()[c];
            const auto& base = p_.component(c).base();
            if (!pausable(c))
                line("  " + ident(tr, "stutt") + " := FALSE;");
            Env env;
            for (const auto& v : base.vars)
                env[v.name] = ident(tr, v.name);
            int counter = 0;
            body(c, base.body, env, counter);
            for (int i : base.memory()) {
                const auto& v = decl(c, i);
                auto cur = ident(tr, v.name);
                auto fin = env.at(v.name);
                if (pausable(c))
                    line("  " + cur + "__post := case " + ident(tr, "stutt") + " : " + cur + "; TRUE : " + fin + "; esac;");
                else
                    line("  " + cur + "__post := " + fin + ";");
            }
        }

        std::string hl = depth_ > 0 ? "hist_len" : "0";
        ExprWriter w(sym_, &t_.enums, [&](const VarRef& r) { return frame_name(r); }, hl);
        for (const auto& s : a_.states) {
            auto id = std::to_string(s.id);
            line("  in_" + id + " := " + w.write(*s.input_guard) + ";");
            line("  out_" + id + " := " + w.write(*s.output_guard) + ";");
            line("  ok_" + id + " := act_" + id + " & in_" + id + " & out_" + id + ";");
        }
        auto pairs = stay_pairs();
        for (const auto& s : a_.states) {
            if (!s.progress)
                continue;
            std::vector<std::string> fwd;
            for (int t : a_.next[static_cast<std::size_t>(s.id)].states)
                if (!a_.is_stay(s.id, t))
                    fwd.push_back("ok_" + std::to_string(t));
            line("  taken_" + std::to_string(s.id) + " := pp_" + std::to_string(s.id) + " & " + join(fwd, " | ", "FALSE")
                 + ";");
        }
        for (const auto& s : a_.states) {
            auto id = std::to_string(s.id);
            std::vector<std::string> all;
            for (const auto& [t, p] : pairs)
                if (t == s.id)
                    all.push_back("(src_" + id + "_" + std::to_string(p) + " -> taken_" + std::to_string(p) + ")");
            if (all.empty())
                line("  surv_" + id + " := ok_" + id + ";");
            else
                line("  surv_" + id + " := ok_" + id + " & !(pure_" + id + " & " + join(all, " & ", "TRUE") + ");");
        }
        std::vector<std::string> acts, surv, unc, viol, acc, omega;
        for (const auto& s : a_.states) {
            auto id = std::to_string(s.id);
            acts.push_back("act_" + id);
            surv.push_back("surv_" + id);
            unc.push_back("(act_" + id + " -> !in_" + id + ")");
            viol.push_back("(act_" + id + " & in_" + id + " & !out_" + id + ")");
            if (a_.next[static_cast<std::size_t>(s.id)].accept)
                acc.push_back("surv_" + id);
            if (s.omega)
                omega.push_back("act_" + id);
        }
        line("  any_token := " + join(acts, " | ", "FALSE") + ";");
        line("  all_uncovered := any_token & " + join(unc, " & ", "TRUE") + ";");
        line("  any_survivor := " + join(surv, " | ", "FALSE") + ";");
        line("  any_violation := " + join(viol, " | ", "FALSE") + ";");
        line("  accept_now := " + join(acc, " | ", "FALSE") + ";");
        line("  omega_active := " + join(omega, " | ", "FALSE") + ";");
        line("  loss := !wdone & !all_uncovered & !any_survivor & any_violation;");
    }

    std::string next_act(int t) const
    {
        std::vector<std::string> from;
        for (const auto& s : a_.states) {
            const auto& n = a_.next[static_cast<std::size_t>(s.id)].states;
            if (std::binary_search(n.begin(), n.end(), t))
                from.push_back("surv_" + std::to_string(s.id));
        }
        return join(from, " | ", "FALSE");
    }

    void assigns()
    {
        line("ASSIGN");
        for (std::size_t c = 0; c < p_.size(); ++c) {
            const auto& tr = p_.traces()[c];
            const auto& base = p_.component(c).base();
            for (int i : base.memory()) {
                const auto& v = decl(c, i);
                line("  init(" + ident(tr, v.name) + ") := " + literal(v.type, v.init) + ";");
                line("  next(" + ident(tr, v.name) + ") := " + ident(tr, v.name) + "__post;");
            }
            if (!pausable(c))
                continue;
            line("  init(started__" + tr + ") := FALSE;");
            line("  next(started__" + tr + ") := started__" + tr + " | !" + ident(tr, "stutt") + ";");
            for (int i : base.inputs()) {
                const auto& v = decl(c, i);
                auto last = "last__" + ident(tr, v.name);
                line("  init(" + last + ") := " + literal(v.type, v.type.min_raw()) + ";");
                line("  next(" + last + ") := " + ident(tr, v.name) + ";");
            }
        }
        for (const auto& [name, d] : hist_) {
            auto sep = name.find("::");
            auto base = ident(name.substr(0, sep), name.substr(sep + 2));
            VarRef r;
            r.trace = name.substr(0, sep);
            r.variable = name.substr(sep + 2);
            auto type = sym_.vars.at(name);
            for (int k = 1; k <= d; ++k) {
                auto h = "h" + std::to_string(k) + "__" + base;
                line("  init(" + h + ") := " + literal(type, type.min_raw()) + ";");
                line("  next(" + h + ") := " + (k == 1 ? frame_name(r) : "h" + std::to_string(k - 1) + "__" + base) + ";");
            }
        }
        if (depth_ > 0) {
            line("  init(hist_len) := 0;");
            line("  next(hist_len) := case hist_len < " + std::to_string(depth_) + " : hist_len + 1; TRUE : hist_len; esac;");
        }
        std::set<int> initial(a_.initial.states.begin(), a_.initial.states.end());
        for (const auto& s : a_.states) {
            auto id = std::to_string(s.id);
            line("  init(act_" + id + ") := " + (initial.count(s.id) ? "TRUE" : "FALSE") + ";");
            line("  next(act_" + id + ") := " + next_act(s.id) + ";");
        }
        auto pairs = stay_pairs();
        for (int t : pure_declared_) {
            // every contributing survivor reaches t by a stay
            std::vector<std::string> all;
            for (const auto& s : a_.states) {
                const auto& n = a_.next[static_cast<std::size_t>(s.id)].states;
                if (!std::binary_search(n.begin(), n.end(), t))
                    continue;
                if (s.progress && a_.is_stay(s.id, t))
                    continue;
                all.push_back("!surv_" + std::to_string(s.id));
            }
            auto id = std::to_string(t);
            line("  init(pure_" + id + ") := FALSE;");
            line("  next(pure_" + id + ") := " + next_act(t) + (all.empty() ? "" : " & " + join(all, " & ", "TRUE")) + ";");
        }
        for (const auto& [t, p] : pairs) {
            auto name = "src_" + std::to_string(t) + "_" + std::to_string(p);
            line("  init(" + name + ") := FALSE;");
            line("  next(" + name + ") := surv_" + std::to_string(p) + ";");
        }
        for (const auto& s : a_.states) {
            if (!s.progress)
                continue;
            auto id = std::to_string(s.id);
            line("  init(pp_" + id + ") := FALSE;");
            line("  next(pp_" + id + ") := surv_" + id + ";");
        }
        line("  init(wdone) := " + std::string(a_.initial.accept ? "TRUE" : "FALSE") + ";");
        line("  next(wdone) := wdone | all_uncovered | !any_survivor | accept_now;");
        if (mode_ == Mode::Strict) {
            line("  init(sdone) := FALSE;");
            line("  next(sdone) := sdone | all_uncovered | !any_survivor;");
        }
    }

    void constraints()
    {
        std::vector<std::string> stutters;
        for (std::size_t c = 0; c < p_.size(); ++c) {
            if (!pausable(c))
                continue;
            const auto& tr = p_.traces()[c];
            const auto& base = p_.component(c).base();
            auto st = ident(tr, "stutt");
            stutters.push_back(st);
            line("INVAR " + st + " -> started__" + tr + ";");
            for (int i : base.inputs()) {
                auto v = ident(tr, decl(c, i).name);
                line("INVAR " + st + " -> " + v + " = last__" + v + ";");
            }
        }
        if (stutters.size() == p_.size() && !stutters.empty())
            line("INVAR !" + join(stutters, " & ", "TRUE") + ";");
    }

    void specs()
    {
        specs_.push_back("INVARSPEC !loss;");
        if (mode_ == Mode::Strict)
            specs_.push_back("LTLSPEC G F (sdone | omega_active);");
        for (const auto& s : specs_)
            line(s);
    }

    const ProductSystem& p_;
    const RelationalTable& t_;
    Mode mode_;
    RowAutomaton a_;
    int depth_;
    CheckLayout layout_;
    Symbols sym_;
    std::map<std::string, int> hist_;
    std::set<int> pure_declared_;
    std::ostringstream out_;
    std::vector<SmvManifestEntry> manifest_;
    std::vector<std::string> specs_;
};

} // namespace

SmvModel emit_smv(const ProductSystem& product, const RelationalTable& table, Mode mode)
{
    check_compatible(product, table);
    return Emitter(product, table, mode).run();
}

std::string format_manifest(const SmvModel& model)
{
    std::ostringstream os;
    os << "# name type origin source bits\n";
    for (const auto& e : model.manifest)
        os << e.name << ' ' << e.type << ' ' << e.origin << ' ' << (e.source.empty() ? "-" : e.source) << ' ' << e.bits
           << "\n";
    os << "# state bits: " << model.state_bits() << "\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// Reader

namespace {

struct SmvToken {
    enum class Kind { Ident, Int, Sym, End };
    Kind kind = Kind::End;
    std::string text;
    SourcePos pos;
};

std::vector<SmvToken> smv_lex(std::string_view s)
{
    std::vector<SmvToken> out;
    int line = 1, col = 1;
    std::size_t i = 0;
    auto adv = [&](std::size_t n) {
        for (std::size_t k = 0; k < n; ++k) {
            if (s[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
            ++i;
        }
    };
    static const char* syms[] = {"<->", "->", ":=", "..", "!=", "<=", ">=", "(", ")", ";", ":", "=", "<", ">",
                                 "+",   "-",  "*",  "/",  "!",  "&",  "|",  ",", "[", "]", "?"};
    while (i < s.size()) {
        char c = s[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            adv(1);
            continue;
        }
        if (c == '-' && i + 1 < s.size() && s[i + 1] == '-') {
            while (i < s.size() && s[i] != '\n')
                adv(1);
            continue;
        }
        SmvToken t;
        t.pos = {line, col};
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i;
            while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_' || s[j] == '$' || s[j] == '#'))
                ++j;
            t.kind = SmvToken::Kind::Ident;
            t.text = std::string(s.substr(i, j - i));
            adv(j - i);
            out.push_back(t);
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t j = i;
            while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j])))
                ++j;
            t.kind = SmvToken::Kind::Int;
            t.text = std::string(s.substr(i, j - i));
            adv(j - i);
            out.push_back(t);
            continue;
        }
        bool matched = false;
        for (const char* sym : syms) {
            std::string_view sv(sym);
            if (s.substr(i, sv.size()) == sv) {
                t.kind = SmvToken::Kind::Sym;
                t.text = std::string(sv);
                adv(sv.size());
                out.push_back(t);
                matched = true;
                break;
            }
        }
        if (!matched)
            throw ParseError({line, col}, std::string("unexpected character '") + c + "'");
    }
    SmvToken end;
    end.pos = {line, col};
    out.push_back(end);
    return out;
}

const std::set<std::string, std::less<>> kSections = {"MODULE", "VAR", "IVAR", "FROZENVAR", "DEFINE", "ASSIGN",
                                                      "INIT", "INVAR", "TRANS", "INVARSPEC", "LTLSPEC", "SPEC",
                                                      "CTLSPEC", "FAIRNESS", "JUSTICE", "COMPASSION"};

class SmvParser {
public:
    explicit SmvParser(std::string_view text) : toks_(smv_lex(text)) {}

    SmvProgram run()
    {
        SmvProgram p;
        expect("MODULE");
        auto name = ident();
        if (name != "main")
            fail("only MODULE main is supported");
        while (!at_end()) {
            auto sec = peek();
            if (sec.kind != SmvToken::Kind::Ident || !kSections.count(sec.text))
                fail("expected a section keyword, found '" + sec.text + "'");
            ++i_;
            if (sec.text == "VAR" || sec.text == "FROZENVAR" || sec.text == "IVAR") {
                if (sec.text == "IVAR")
                    fail("IVAR sections are not supported");
                while (is_decl_start()) {
                    SmvVarDecl d;
                    d.pos = peek().pos;
                    d.name = ident();
                    d.frozen = sec.text == "FROZENVAR";
                    expect(":");
                    if (peek().text == "boolean") {
                        ++i_;
                    } else {
                        d.boolean = false;
                        d.lo = signed_int();
                        expect("..");
                        d.hi = signed_int();
                        if (d.lo > d.hi)
                            throw ParseError(d.pos, "empty range for '" + d.name + "'");
                    }
                    expect(";");
                    p.vars.push_back(d);
                }
            } else if (sec.text == "DEFINE") {
                while (is_decl_start()) {
                    auto n = ident();
                    expect(":=");
                    auto e = expr(false);
                    expect(";");
                    p.defines.emplace_back(n, e);
                }
            } else if (sec.text == "ASSIGN") {
                while (peek().text == "init" || peek().text == "next") {
                    bool init = peek().text == "init";
                    auto pos = peek().pos;
                    ++i_;
                    expect("(");
                    auto n = ident();
                    expect(")");
                    expect(":=");
                    auto e = expr(false);
                    expect(";");
                    auto& m = init ? p.init : p.next;
                    if (m.count(n))
                        throw ParseError(pos, "'" + n + "' assigned twice");
                    m[n] = e;
                }
            } else if (sec.text == "INVAR") {
                p.invars.push_back(expr(false));
                optional(";");
            } else if (sec.text == "INVARSPEC") {
                p.invarspecs.push_back(expr(false));
                optional(";");
            } else if (sec.text == "LTLSPEC") {
                p.ltlspecs.push_back(expr(true));
                optional(";");
            } else {
                fail("section " + sec.text + " is not supported");
            }
        }
        return p;
    }

private:
    const SmvToken& peek() const { return toks_[i_]; }
    bool at_end() const { return peek().kind == SmvToken::Kind::End; }
    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(peek().pos, msg); }

    bool is_decl_start() const
    {
        return peek().kind == SmvToken::Kind::Ident && !kSections.count(peek().text);
    }

    void expect(std::string_view s)
    {
        if (peek().text != s || peek().kind == SmvToken::Kind::End)
            fail("expected '" + std::string(s) + "', found '" + (at_end() ? std::string("end of file") : peek().text) + "'");
        ++i_;
    }

    void optional(std::string_view s)
    {
        if (peek().text == s)
            ++i_;
    }

    std::string ident()
    {
        if (peek().kind != SmvToken::Kind::Ident)
            fail("expected an identifier");
        return toks_[i_++].text;
    }

    std::int64_t signed_int()
    {
        bool neg = false;
        if (peek().text == "-") {
            neg = true;
            ++i_;
        }
        if (peek().kind != SmvToken::Kind::Int)
            fail("expected an integer");
        auto v = std::stoll(toks_[i_++].text);
        return neg ? -v : v;
    }

    SmvExprPtr make(SmvExpr e) { return std::make_shared<const SmvExpr>(std::move(e)); }

    SmvExprPtr binary(std::string op, SmvExprPtr a, SmvExprPtr b, SourcePos pos)
    {
        SmvExpr e;
        e.kind = SmvExpr::Kind::Binary;
        e.op = std::move(op);
        e.a = std::move(a);
        e.b = std::move(b);
        e.pos = pos;
        return make(std::move(e));
    }

    // -> (right assoc) < <-> < | xor < & < comparisons < + - < * / mod < unary
    SmvExprPtr expr(bool temporal)
    {
        temporal_ = temporal;
        return implies();
    }

    SmvExprPtr implies()
    {
        auto a = iff();
        if (peek().text == "->") {
            auto pos = peek().pos;
            ++i_;
            return binary("->", a, implies(), pos);
        }
        return a;
    }

    SmvExprPtr iff()
    {
        auto a = disj();
        while (peek().text == "<->") {
            auto pos = peek().pos;
            ++i_;
            a = binary("<->", a, disj(), pos);
        }
        return a;
    }

    SmvExprPtr disj()
    {
        auto a = conj();
        while (peek().text == "|" || peek().text == "xor") {
            auto op = peek().text;
            auto pos = peek().pos;
            ++i_;
            a = binary(op, a, conj(), pos);
        }
        return a;
    }

    SmvExprPtr conj()
    {
        auto a = cmp();
        while (peek().text == "&") {
            auto pos = peek().pos;
            ++i_;
            a = binary("&", a, cmp(), pos);
        }
        return a;
    }

    SmvExprPtr cmp()
    {
        auto a = sum();
        static const std::set<std::string> ops = {"=", "!=", "<", "<=", ">", ">="};
        while (peek().kind == SmvToken::Kind::Sym && ops.count(peek().text)) {
            auto op = peek().text;
            auto pos = peek().pos;
            ++i_;
            a = binary(op, a, sum(), pos);
        }
        return a;
    }

    SmvExprPtr sum()
    {
        auto a = product();
        while (peek().text == "+" || peek().text == "-") {
            auto op = peek().text;
            auto pos = peek().pos;
            ++i_;
            a = binary(op, a, product(), pos);
        }
        return a;
    }

    SmvExprPtr product()
    {
        auto a = unary();
        while (peek().text == "*" || peek().text == "/" || peek().text == "mod") {
            auto op = peek().text;
            auto pos = peek().pos;
            ++i_;
            a = binary(op, a, unary(), pos);
        }
        return a;
    }

    SmvExprPtr unary()
    {
        auto t = peek();
        bool temporal_op = t.kind == SmvToken::Kind::Ident && (t.text == "G" || t.text == "F" || t.text == "X");
        if (t.text == "!" || t.text == "-" || temporal_op) {
            if (temporal_op && !temporal_)
                fail("temporal operator " + t.text + " outside LTLSPEC");
            ++i_;
            SmvExpr e;
            e.kind = SmvExpr::Kind::Unary;
            e.op = t.text;
            e.a = unary();
            e.pos = t.pos;
            return make(std::move(e));
        }
        return primary();
    }

    SmvExprPtr primary()
    {
        auto t = peek();
        SmvExpr e;
        e.pos = t.pos;
        if (t.kind == SmvToken::Kind::Int) {
            ++i_;
            e.kind = SmvExpr::Kind::Int;
            e.value = std::stoll(t.text);
            return make(std::move(e));
        }
        if (t.text == "(") {
            ++i_;
            auto inner = implies();
            expect(")");
            return inner;
        }
        if (t.kind != SmvToken::Kind::Ident)
            fail("expected an expression, found '" + (at_end() ? std::string("end of file") : t.text) + "'");
        if (kSections.count(t.text))
            fail("unexpected section keyword '" + t.text + "'");
        ++i_;
        if (t.text == "TRUE" || t.text == "FALSE") {
            e.kind = SmvExpr::Kind::Bool;
            e.value = t.text == "TRUE";
            return make(std::move(e));
        }
        if (t.text == "case") {
            e.kind = SmvExpr::Kind::Case;
            while (peek().text != "esac") {
                if (at_end())
                    fail("unterminated case");
                auto c = implies();
                expect(":");
                auto v = implies();
                expect(";");
                e.arms.emplace_back(c, v);
            }
            ++i_;
            if (e.arms.empty())
                throw ParseError(t.pos, "empty case");
            return make(std::move(e));
        }
        if (t.text == "next") {
            expect("(");
            e.kind = SmvExpr::Kind::Next;
            e.name = ident();
            expect(")");
            return make(std::move(e));
        }
        if (t.text == "esac" || t.text == "mod" || t.text == "xor")
            throw ParseError(t.pos, "unexpected '" + t.text + "'");
        e.kind = SmvExpr::Kind::Ident;
        e.name = t.text;
        return make(std::move(e));
    }

    std::vector<SmvToken> toks_;
    std::size_t i_ = 0;
    bool temporal_ = false;
};

void collect_idents(const SmvExpr& e, std::vector<const SmvExpr*>& out)
{
    if (e.kind == SmvExpr::Kind::Ident || e.kind == SmvExpr::Kind::Next)
        out.push_back(&e);
    if (e.a)
        collect_idents(*e.a, out);
    if (e.b)
        collect_idents(*e.b, out);
    for (const auto& [c, v] : e.arms) {
        collect_idents(*c, out);
        collect_idents(*v, out);
    }
}

} // namespace

SmvProgram parse_smv(std::string_view text)
{
    return SmvParser(text).run();
}

std::vector<Diagnostic> check_smv(std::string_view text)
{
    std::vector<Diagnostic> out;
    SmvProgram p;
    try {
        p = parse_smv(text);
    } catch (const ParseError& e) {
        out.push_back({e.pos(), e.message()});
        return out;
    }
    std::map<std::string, const SmvVarDecl*> vars;
    std::map<std::string, SmvExprPtr> defs;
    for (const auto& v : p.vars)
        if (!vars.emplace(v.name, &v).second)
            out.push_back({v.pos, "duplicate declaration of '" + v.name + "'"});
    for (const auto& [n, e] : p.defines) {
        if (vars.count(n) || !defs.emplace(n, e).second)
            out.push_back({e->pos, "duplicate declaration of '" + n + "'"});
    }
    auto check_expr = [&](const SmvExpr& e, bool allow_next) {
        std::vector<const SmvExpr*> ids;
        collect_idents(e, ids);
        for (const auto* id : ids) {
            if (id->kind == SmvExpr::Kind::Next && !allow_next)
                out.push_back({id->pos, "next() outside a transition"});
            if (!vars.count(id->name) && !defs.count(id->name))
                out.push_back({id->pos, "undeclared identifier '" + id->name + "'"});
        }
    };
    for (const auto& [n, e] : p.defines)
        check_expr(*e, false);
    for (const auto* m : {&p.init, &p.next}) {
        for (const auto& [n, e] : *m) {
            auto it = vars.find(n);
            if (it == vars.end())
                out.push_back({e->pos, "assignment to undeclared variable '" + n + "'"});
            else if (it->second->frozen && m == &p.next)
                out.push_back({e->pos, "next() assignment to frozen variable '" + n + "'"});
            check_expr(*e, false);
        }
    }
    for (const auto* list : {&p.invars, &p.invarspecs, &p.ltlspecs})
        for (const auto& e : *list)
            check_expr(*e, false);

    // Cycles among defines.
    std::map<std::string, int> mark;
    std::function<bool(const std::string&)> visit = [&](const std::string& n) {
        auto it = defs.find(n);
        if (it == defs.end())
            return false;
        int& m = mark[n];
        if (m == 1)
            return true;
        if (m == 2)
            return false;
        m = 1;
        std::vector<const SmvExpr*> ids;
        collect_idents(*it->second, ids);
        for (const auto* id : ids) {
            if (visit(id->name)) {
                out.push_back({it->second->pos, "cyclic definition involving '" + n + "'"});
                m = 2;
                return false;
            }
        }
        m = 2;
        return false;
    };
    for (const auto& [n, e] : p.defines)
        visit(n);
    return out;
}

} // namespace rtt
