#include "smv_eval.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <map>
#include <unordered_map>

namespace rtt::testing {

namespace {

struct VecHash {
    std::size_t operator()(const std::vector<std::int64_t>& v) const
    {
        std::size_t h = v.size();
        for (auto x : v)
            h ^= std::hash<std::int64_t>{}(x) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        return h;
    }
};

class Eval {
public:
    explicit Eval(const SmvProgram& p) : p_(p)
    {
        for (std::size_t i = 0; i < p.vars.size(); ++i)
            var_[p.vars[i].name] = i;
        for (std::size_t i = 0; i < p.defines.size(); ++i)
            def_[p.defines[i].first] = i;
    }

    void bind(const std::vector<std::int64_t>* s)
    {
        s_ = s;
        cache_.assign(p_.defines.size(), std::nullopt);
    }

    std::int64_t operator()(const SmvExpr& e)
    {
        using K = SmvExpr::Kind;
        switch (e.kind) {
        case K::Int:
        case K::Bool: return e.value;
        case K::Ident: {
            if (auto it = var_.find(e.name); it != var_.end())
                return (*s_)[it->second];
            auto d = def_.at(e.name);
            if (!cache_[d])
                cache_[d] = (*this)(*p_.defines[d].second);
            return *cache_[d];
        }
        case K::Next: throw Error("smv_eval: next() outside ASSIGN");
        case K::Unary: {
            auto a = (*this)(*e.a);
            if (e.op == "!")
                return !a;
            if (e.op == "-")
                return -a;
            throw Error("smv_eval: temporal operator in a state formula");
        }
        case K::Binary: {
            const auto& o = e.op;
            if (o == "&")
                return (*this)(*e.a) && (*this)(*e.b);
            if (o == "|")
                return (*this)(*e.a) || (*this)(*e.b);
            if (o == "->")
                return !(*this)(*e.a) || (*this)(*e.b);
            auto a = (*this)(*e.a), b = (*this)(*e.b);
            if (o == "<->" || o == "=")
                return a == b;
            if (o == "xor" || o == "!=")
                return a != b;
            if (o == "<") return a < b;
            if (o == "<=") return a <= b;
            if (o == ">") return a > b;
            if (o == ">=") return a >= b;
            if (o == "+") return a + b;
            if (o == "-") return a - b;
            if (o == "*") return a * b;
            if (b == 0)
                throw Error("smv_eval: division by zero");
            if (o == "/") return a / b;
            if (o == "mod") return a % b;
            throw Error("smv_eval: operator " + o);
        }
        case K::Case:
            for (const auto& [c, v] : e.arms)
                if ((*this)(*c))
                    return (*this)(*v);
            throw Error("smv_eval: no case arm applies");
        }
        return 0;
    }

private:
    const SmvProgram& p_;
    std::map<std::string, std::size_t> var_, def_;
    const std::vector<std::int64_t>* s_ = nullptr;
    std::vector<std::optional<std::int64_t>> cache_;
};

bool odometer(std::vector<std::int64_t>& s, const std::vector<std::size_t>& idx, const SmvProgram& p)
{
    for (std::size_t k = idx.size(); k-- > 0;) {
        auto i = idx[k];
        if (s[i] < p.vars[i].hi) {
            ++s[i];
            return true;
        }
        s[i] = p.vars[i].lo;
    }
    return false;
}

} // namespace

SmvEvalResult evaluate_smv(const SmvProgram& p, std::size_t max_states)
{
    SmvEvalResult r;
    Eval ev(p);
    std::vector<std::size_t> free_init, free_next;
    for (std::size_t i = 0; i < p.vars.size(); ++i) {
        const auto& v = p.vars[i];
        if (!p.init.count(v.name))
            free_init.push_back(i);
        if (!v.frozen && !p.next.count(v.name))
            free_next.push_back(i);
    }
    auto admissible = [&](const std::vector<std::int64_t>& s) {
        ev.bind(&s);
        for (const auto& inv : p.invars)
            if (!ev(*inv))
                return false;
        return true;
    };

    std::unordered_map<std::vector<std::int64_t>, std::size_t, VecHash> index;
    std::vector<std::vector<std::int64_t>> states;
    std::vector<std::vector<std::size_t>> succ;
    std::vector<std::size_t> level;
    std::deque<std::size_t> queue;
    auto add = [&](std::vector<std::int64_t> s, std::size_t depth) -> std::optional<std::size_t> {
        auto it = index.find(s);
        if (it != index.end())
            return it->second;
        if (states.size() >= max_states) {
            r.truncated = true;
            return std::nullopt;
        }
        auto id = states.size();
        index.emplace(s, id);
        states.push_back(std::move(s));
        succ.emplace_back();
        level.push_back(depth);
        queue.push_back(id);
        return id;
    };

    {
        std::vector<std::int64_t> s(p.vars.size());
        for (std::size_t i = 0; i < p.vars.size(); ++i)
            s[i] = p.vars[i].lo;
        ev.bind(&s);
        for (const auto& [name, e] : p.init) {
            auto it = std::find_if(p.vars.begin(), p.vars.end(), [&](const SmvVarDecl& v) { return v.name == name; });
            s[static_cast<std::size_t>(it - p.vars.begin())] = ev(*e);
        }
        do {
            if (admissible(s))
                add(s, 0);
        } while (odometer(s, free_init, p));
    }

    std::vector<std::pair<std::size_t, std::int64_t>> assigned;
    while (!queue.empty()) {
        auto id = queue.front();
        queue.pop_front();
        auto cur = states[id];
        ev.bind(&cur);
        for (const auto& inv : p.invarspecs)
            if (r.invarspecs_hold && !ev(*inv)) {
                r.invarspecs_hold = false;
                r.depth = level[id];
            }
        std::vector<std::int64_t> nxt = cur;
        for (std::size_t i = 0; i < p.vars.size(); ++i) {
            auto it = p.next.find(p.vars[i].name);
            if (it != p.next.end())
                nxt[i] = ev(*it->second);
        }
        for (auto i : free_next)
            nxt[i] = p.vars[i].lo;
        do {
            if (admissible(nxt))
                if (auto to = add(nxt, level[id] + 1))
                    succ[id].push_back(*to);
        } while (odometer(nxt, free_next, p));
    }
    r.states = states.size();

    // G F q fails iff some reachable cycle stays inside !q.
    for (const auto& spec : p.ltlspecs) {
        if (spec->kind != SmvExpr::Kind::Unary || spec->op != "G" || spec->a->kind != SmvExpr::Kind::Unary ||
            spec->a->op != "F")
            throw Error("smv_eval: only G F p is supported");
        std::vector<char> bad(states.size());
        for (std::size_t i = 0; i < states.size(); ++i) {
            ev.bind(&states[i]);
            bad[i] = !ev(*spec->a->a);
        }
        // peel states without a bad successor until fixpoint
        std::vector<std::size_t> out(states.size());
        std::vector<std::vector<std::size_t>> pred(states.size());
        for (std::size_t i = 0; i < states.size(); ++i)
            if (bad[i])
                for (auto j : succ[i])
                    if (bad[j]) {
                        ++out[i];
                        pred[j].push_back(i);
                    }
        std::vector<std::size_t> work;
        for (std::size_t i = 0; i < states.size(); ++i)
            if (bad[i] && out[i] == 0)
                work.push_back(i);
        std::vector<char> gone(states.size());
        while (!work.empty()) {
            auto i = work.back();
            work.pop_back();
            gone[i] = 1;
            for (auto k : pred[i])
                if (--out[k] == 0)
                    work.push_back(k);
        }
        for (std::size_t i = 0; i < states.size(); ++i)
            if (bad[i] && !gone[i])
                r.ltlspecs_hold = false;
    }
    return r;
}

} // namespace rtt::testing
