#include "rtt/system.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>

namespace rtt {

std::string_view to_string(VarKind k)
{
    switch (k) {
    case VarKind::Input: return "input";
    case VarKind::Output: return "output";
    case VarKind::State: return "state";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Compiled program

struct ReactiveSystem::Program {
    struct CStmt {
        Stmt::Kind kind = Stmt::Kind::Assign;
        int slot = -1;
        CompiledExpr value;
        std::vector<std::pair<CompiledExpr, std::vector<CStmt>>> branches;
        std::vector<CStmt> otherwise;
        int line = 0;
    };
    std::vector<CStmt> body;
};

namespace {

using CStmt = ReactiveSystem::Program::CStmt;

class Checker {
public:
    Checker(const ReactiveSystem& sys) : sys_(sys)
    {
        symbols_.enums = &sys.enums;
        for (std::size_t i = 0; i < sys.vars.size(); ++i) {
            symbols_.vars[sys.vars[i].name] = sys.vars[i].type;
            slots_.vars[sys.vars[i].name] = static_cast<int>(i);
        }
    }

    std::vector<CStmt> block(const std::vector<Stmt>& stmts, std::set<std::string>& assigned)
    {
        std::vector<CStmt> out;
        for (const auto& s : stmts)
            out.push_back(stmt(s, assigned));
        return out;
    }

private:
    [[noreturn]] static void fail(const Stmt& s, const std::string& msg)
    {
        throw TypeError("line " + std::to_string(s.pos.line) + ": " + msg);
    }

    CStmt stmt(const Stmt& s, std::set<std::string>& assigned)
    {
        CStmt c;
        c.kind = s.kind;
        c.line = s.pos.line;
        if (s.kind == Stmt::Kind::Assign) {
            const VarDecl* d = sys_.find(s.target);
            if (!d)
                fail(s, "assignment to undeclared variable '" + s.target + "'");
            if (d->kind == VarKind::Input)
                fail(s, "cannot assign input '" + s.target + "'");
            if (!assigned.insert(s.target).second)
                fail(s, "'" + s.target + "' assigned twice on one path");
            Type t;
            try {
                t = typecheck(*s.value, symbols_);
            } catch (const TypeError& e) {
                fail(s, e.what());
            }
            if (!t.compatible(d->type))
                fail(s, "cannot assign " + to_string(t) + " to '" + s.target + "' : " + to_string(d->type));
            if (s.value->kind == ExprKind::Int && !d->type.contains(s.value->value))
                fail(s, "literal " + std::to_string(s.value->value) + " out of range for '" + s.target
                            + "' : " + to_string(d->type));
            c.slot = slots_.vars.at(s.target);
            c.value = compile(*s.value, symbols_, slots_);
            return c;
        }
        std::set<std::string> merged = assigned;
        for (const auto& [cond, body] : s.branches) {
            Type t;
            try {
                t = typecheck(*cond, symbols_);
            } catch (const TypeError& e) {
                fail(s, e.what());
            }
            if (t.kind != TypeKind::Bool)
                fail(s, "condition is not Boolean");
            auto local = assigned;
            auto compiled = block(body, local);
            merged.insert(local.begin(), local.end());
            c.branches.emplace_back(compile(*cond, symbols_, slots_), std::move(compiled));
        }
        auto local = assigned;
        c.otherwise = block(s.otherwise, local);
        merged.insert(local.begin(), local.end());
        assigned = std::move(merged);
        return c;
    }

    const ReactiveSystem& sys_;
    Symbols symbols_;
    SlotMap slots_;
};

class Runner {
public:
    Runner(const ReactiveSystem& sys, std::vector<std::int64_t>& frame) : sys_(sys), frame_(frame)
    {
        env_.width = frame.size();
    }

    void run(const std::vector<CStmt>& body)
    {
        for (const auto& s : body) {
            if (s.kind == Stmt::Kind::Assign) {
                auto v = eval(s.value, s.line);
                const auto& d = sys_.vars[static_cast<std::size_t>(s.slot)];
                if (!d.type.contains(v))
                    throw RuntimeError(sys_.name + ", line " + std::to_string(s.line) + ": value " + std::to_string(v)
                                       + " out of range for '" + d.name + "' : " + to_string(d.type));
                frame_[static_cast<std::size_t>(s.slot)] = v;
                continue;
            }
            bool taken = false;
            for (const auto& [cond, branch] : s.branches) {
                if (eval(cond, s.line)) {
                    run(branch);
                    taken = true;
                    break;
                }
            }
            if (!taken)
                run(s.otherwise);
        }
    }

private:
    std::int64_t eval(const CompiledExpr& e, int line)
    {
        env_.current = frame_;
        auto r = e.evaluate(env_);
        if (r.division_by_zero)
            throw RuntimeError(sys_.name + ", line " + std::to_string(line) + ": division by zero");
        return r.value;
    }

    const ReactiveSystem& sys_;
    std::vector<std::int64_t>& frame_;
    EvalEnv env_;
};

} // namespace

const VarDecl* ReactiveSystem::find(std::string_view n) const
{
    for (const auto& v : vars)
        if (v.name == n)
            return &v;
    return nullptr;
}

std::vector<Type> ReactiveSystem::input_types() const
{
    std::vector<Type> t;
    for (int i : inputs_)
        t.push_back(vars[static_cast<std::size_t>(i)].type);
    return t;
}

void ReactiveSystem::finalize()
{
    inputs_.clear();
    outputs_.clear();
    memory_.clear();
    std::set<std::string> names;
    for (std::size_t i = 0; i < vars.size(); ++i) {
        const auto& v = vars[i];
        if (!names.insert(v.name).second)
            throw TypeError("duplicate variable '" + v.name + "'");
        if (v.kind == VarKind::Input) {
            inputs_.push_back(static_cast<int>(i));
        } else {
            if (!v.type.contains(v.init))
                throw TypeError("initial value of '" + v.name + "' outside " + to_string(v.type));
            memory_.push_back(static_cast<int>(i));
            if (v.kind == VarKind::Output)
                outputs_.push_back(static_cast<int>(i));
        }
    }
    Checker c(*this);
    std::set<std::string> assigned;
    auto p = std::make_shared<Program>();
    p->body = c.block(body, assigned);
    program_ = std::move(p);
}

SystemState ReactiveSystem::initial_state() const
{
    SystemState s;
    for (int i : memory_)
        s.values.push_back(vars[static_cast<std::size_t>(i)].init);
    return s;
}

std::vector<std::int64_t> ReactiveSystem::outputs_of(const SystemState& state) const
{
    std::vector<std::int64_t> out;
    for (std::size_t k = 0; k < memory_.size(); ++k)
        if (vars[static_cast<std::size_t>(memory_[k])].kind == VarKind::Output)
            out.push_back(state.values[k]);
    return out;
}

StepResult ReactiveSystem::step(const SystemState& state, std::span<const std::int64_t> inputs) const
{
    if (!program_)
        throw Error("system '" + name + "' is not finalized");
    if (inputs.size() != inputs_.size())
        throw RuntimeError(name + ": expected " + std::to_string(inputs_.size()) + " inputs");
    if (state.values.size() != memory_.size())
        throw RuntimeError(name + ": malformed state");
    std::vector<std::int64_t> frame(vars.size(), 0);
    for (std::size_t k = 0; k < inputs_.size(); ++k) {
        const auto& d = vars[static_cast<std::size_t>(inputs_[k])];
        if (!d.type.contains(inputs[k]))
            throw RuntimeError(name + ": input '" + d.name + "' = " + std::to_string(inputs[k]) + " outside "
                               + to_string(d.type));
        frame[static_cast<std::size_t>(inputs_[k])] = inputs[k];
    }
    for (std::size_t k = 0; k < memory_.size(); ++k)
        frame[static_cast<std::size_t>(memory_[k])] = state.values[k];
    Runner(*this, frame).run(program_->body);
    StepResult r;
    for (int i : memory_)
        r.next.values.push_back(frame[static_cast<std::size_t>(i)]);
    for (int i : outputs_)
        r.outputs.push_back(frame[static_cast<std::size_t>(i)]);
    return r;
}

// ---------------------------------------------------------------------------
// Parser

namespace {

class RslParser {
public:
    explicit RslParser(std::string_view text) : ts_(tokenize(text)) {}

    ReactiveSystem run()
    {
        ts_.expect_ident("system");
        sys_.name = ts_.expect_name();
        bool have_step = false;
        while (!ts_.at_end()) {
            const Token& k = ts_.peek();
            if (ts_.accept_ident("enum")) {
                auto name = ts_.expect_name();
                auto cs = constants();
                try {
                    sys_.enums.add(name, cs);
                } catch (const Error& e) {
                    TokenStream::fail_at(k, e.what());
                }
                ts_.accept(";");
            } else if (k.is_ident("input") || k.is_ident("output") || k.is_ident("state")) {
                if (have_step)
                    ts_.fail("declarations must precede the step block");
                declaration();
            } else if (ts_.accept_ident("step")) {
                if (have_step)
                    TokenStream::fail_at(k, "duplicate step block");
                have_step = true;
                sys_.body = block();
            } else {
                ts_.fail("unexpected " + describe(k));
            }
        }
        sys_.finalize();
        return std::move(sys_);
    }

private:
    std::vector<std::string> constants()
    {
        ts_.expect("{");
        std::vector<std::string> cs;
        do {
            cs.push_back(ts_.expect_name());
        } while (ts_.accept(","));
        ts_.expect("}");
        return cs;
    }

    static bool reserved(std::string_view n)
    {
        static const std::set<std::string, std::less<>> kw = {
            "system", "input", "output", "state", "step", "if", "elif", "else", "enum", "int", "bool",
            "TRUE", "FALSE", "true", "false", "and", "or", "not", "mod"};
        return kw.count(n) > 0;
    }

    Type type(const std::string& var)
    {
        auto at = ts_.peek();
        auto name = ts_.expect_name();
        if (name == "bool")
            return Type::boolean();
        if (name == "int") {
            ts_.expect("[");
            auto lo = ts_.expect_int();
            ts_.expect(",");
            auto hi = ts_.expect_int();
            ts_.expect("]");
            if (hi < lo)
                TokenStream::fail_at(at, "empty integer range");
            return Type::integer(lo, hi);
        }
        if (name == "enum") {
            auto cs = constants();
            try {
                return Type::enumeration(sys_.enums.add(var + "_t", cs));
            } catch (const Error& e) {
                TokenStream::fail_at(at, e.what());
            }
        }
        if (auto e = sys_.enums.find(name))
            return Type::enumeration(e);
        TokenStream::fail_at(at, "unknown type '" + name + "'");
    }

    NameScope scope() const
    {
        NameScope s;
        s.enums = &sys_.enums;
        s.allow_relational = false;
        s.allow_backrefs = false;
        return s;
    }

    void declaration()
    {
        VarDecl d;
        auto kw = ts_.next();
        d.kind = kw.text == "input" ? VarKind::Input : kw.text == "output" ? VarKind::Output : VarKind::State;
        d.pos = ts_.peek().pos;
        d.name = ts_.expect_name();
        if (reserved(d.name))
            TokenStream::fail_at(kw, "reserved word '" + d.name + "' used as variable name");
        if (sys_.find(d.name))
            TokenStream::fail_at(kw, "duplicate variable '" + d.name + "'");
        ts_.expect(":");
        d.type = type(d.name);
        if (ts_.accept("=")) {
            auto at = ts_.peek();
            auto e = parse_expression(ts_, scope());
            d.init = constant(*e, d.type, at);
        } else if (d.kind != VarKind::Input) {
            ts_.fail(std::string(to_string(d.kind)) + " '" + d.name + "' needs an initial value");
        }
        ts_.expect(";");
        sys_.vars.push_back(std::move(d));
    }

    std::int64_t constant(const Expr& e, const Type& type, const Token& at)
    {
        Symbols sym;
        sym.enums = &sys_.enums;
        try {
            auto t = typecheck(e, sym);
            if (!t.compatible(type))
                TokenStream::fail_at(at, "initial value has type " + to_string(t) + ", expected " + to_string(type));
            auto c = compile(e, sym, SlotMap{});
            auto r = c.evaluate(EvalEnv{});
            if (r.division_by_zero)
                TokenStream::fail_at(at, "division by zero in initial value");
            if (!type.contains(r.value))
                TokenStream::fail_at(at, "initial value " + std::to_string(r.value) + " outside " + to_string(type));
            return r.value;
        } catch (const TypeError& ex) {
            TokenStream::fail_at(at, ex.what());
        }
    }

    std::vector<Stmt> block()
    {
        ts_.expect("{");
        std::vector<Stmt> out;
        while (!ts_.accept("}")) {
            if (ts_.at_end())
                ts_.fail("unterminated block");
            out.push_back(statement());
        }
        return out;
    }

    Stmt statement()
    {
        Stmt s;
        s.pos = ts_.peek().pos;
        if (ts_.accept_ident("if")) {
            s.kind = Stmt::Kind::If;
            auto c = parse_expression(ts_, scope());
            s.branches.emplace_back(c, block());
            while (ts_.accept_ident("elif")) {
                auto e = parse_expression(ts_, scope());
                s.branches.emplace_back(e, block());
            }
            if (ts_.accept_ident("else"))
                s.otherwise = block();
            return s;
        }
        s.kind = Stmt::Kind::Assign;
        s.target = ts_.expect_name();
        ts_.expect(":=");
        s.value = parse_expression(ts_, scope());
        ts_.expect(";");
        return s;
    }

    TokenStream ts_;
    ReactiveSystem sys_;
};

} // namespace

ReactiveSystem parse_rsl(std::string_view text)
{
    return RslParser(text).run();
}

// ---------------------------------------------------------------------------
// Augmentation and product

AugmentedSystem::AugmentedSystem(ReactiveSystem base) : base_(std::move(base))
{
    if (base_.find("stutt"))
        throw Error("system '" + base_.name + "' already declares a variable named 'stutt'");
}

StepResult AugmentedSystem::step(const SystemState& state, bool stutt, std::span<const std::int64_t> inputs) const
{
    if (stutt)
        return {state, base_.outputs_of(state)};
    return base_.step(state, inputs);
}

AugmentedSystem augment(ReactiveSystem sys)
{
    return AugmentedSystem(std::move(sys));
}

ProductSystem::ProductSystem(std::vector<AugmentedSystem> systems, std::vector<std::string> traces)
    : systems_(std::move(systems)), traces_(std::move(traces))
{
    if (systems_.empty() || systems_.size() != traces_.size())
        throw Error("product needs one system per trace");
    std::set<std::string> seen;
    for (const auto& t : traces_)
        if (!seen.insert(t).second)
            throw Error("duplicate trace '" + t + "'");
    std::size_t so = 0, io = 0, oo = 0;
    for (std::size_t c = 0; c < systems_.size(); ++c) {
        const auto& sys = systems_[c].base();
        state_offset_.push_back(so);
        input_offset_.push_back(io);
        output_offset_.push_back(oo);
        so += sys.memory().size();
        io += sys.inputs().size() + 1;
        oo += sys.outputs().size();
        inputs_.push_back({traces_[c], "stutt", VarKind::Input, Type::boolean(), static_cast<int>(c), -1});
        for (int i : sys.inputs()) {
            const auto& d = sys.vars[static_cast<std::size_t>(i)];
            inputs_.push_back({traces_[c], d.name, VarKind::Input, d.type, static_cast<int>(c), i});
        }
        for (std::size_t i = 0; i < sys.vars.size(); ++i) {
            const auto& d = sys.vars[i];
            variables_.push_back({traces_[c], d.name, d.kind, d.type, static_cast<int>(c), static_cast<int>(i)});
        }
    }
    state_offset_.push_back(so);
    input_offset_.push_back(io);
    output_offset_.push_back(oo);
}

int ProductSystem::trace_index(std::string_view trace) const
{
    for (std::size_t i = 0; i < traces_.size(); ++i)
        if (traces_[i] == trace)
            return static_cast<int>(i);
    return -1;
}

ProductState ProductSystem::initial_state() const
{
    ProductState s;
    for (const auto& c : systems_) {
        auto part = c.base().initial_state();
        s.insert(s.end(), part.values.begin(), part.values.end());
    }
    return s;
}

SystemState ProductSystem::component_state(const ProductState& s, std::size_t i) const
{
    SystemState out;
    out.values.assign(s.begin() + static_cast<std::ptrdiff_t>(state_offset_[i]),
                      s.begin() + static_cast<std::ptrdiff_t>(state_offset_[i + 1]));
    return out;
}

ProductStep ProductSystem::step(const ProductState& state, std::span<const std::int64_t> inputs) const
{
    if (inputs.size() != inputs_.size())
        throw RuntimeError("product: expected " + std::to_string(inputs_.size()) + " inputs");
    ProductStep r;
    r.next.reserve(state.size());
    for (std::size_t c = 0; c < systems_.size(); ++c) {
        auto slice = inputs.subspan(input_offset_[c], input_offset_[c + 1] - input_offset_[c]);
        if (slice[0] != 0 && slice[0] != 1)
            throw RuntimeError("product: stutt flag must be Boolean");
        auto res = systems_[c].step(component_state(state, c), slice[0] != 0, slice.subspan(1));
        r.next.insert(r.next.end(), res.next.values.begin(), res.next.values.end());
        r.outputs.insert(r.outputs.end(), res.outputs.begin(), res.outputs.end());
    }
    return r;
}

ProductSystem product(std::vector<AugmentedSystem> systems, std::vector<std::string> traces)
{
    return ProductSystem(std::move(systems), std::move(traces));
}

ReachResult reachable_states(const ProductSystem& sys, std::optional<std::size_t> bound, bool enumerate)
{
    std::vector<Type> types;
    for (const auto& v : sys.inputs())
        types.push_back(v.type);
    std::set<ProductState> seen;
    std::deque<ProductState> frontier;
    std::vector<ProductState> order;
    auto add = [&](ProductState s) {
        if (!seen.insert(s).second)
            return;
        if (bound && seen.size() > *bound)
            throw Error("state bound exceeded (" + std::to_string(*bound) + ")");
        if (enumerate)
            order.push_back(s);
        frontier.push_back(std::move(s));
    };
    add(sys.initial_state());
    while (!frontier.empty()) {
        auto s = std::move(frontier.front());
        frontier.pop_front();
        auto in = first_valuation(types);
        do {
            add(sys.step(s, in).next);
        } while (next_valuation(in, types));
    }
    return {seen.size(), std::move(order)};
}

} // namespace rtt
