#include "rtt/automaton.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace rtt {

namespace {

// Compile-time graph: real states plus epsilon junctions. Junction j is
// stored as node ~j so that both fit in one int.
class Builder {
public:
    explicit Builder(const RelationalTable& t) : table_(t) {}

    RowAutomaton run()
    {
        int entry = junction();
        final_ = junction();
        build(table_.body, entry, final_, false);
        RowAutomaton a;
        a.states = std::move(states_);
        a.initial = closure({~entry});
        for (std::size_t s = 0; s < a.states.size(); ++s)
            a.next.push_back(closure(after_[s]));
        return a;
    }

private:
    int junction()
    {
        eps_.emplace_back();
        return static_cast<int>(eps_.size()) - 1;
    }

    int state(const Block& row, int copy, int instance, bool omega)
    {
        AutomatonState s;
        s.id = static_cast<int>(states_.size());
        s.row = row.row_id;
        s.copy = copy;
        s.instance = instance;
        auto g = table_.guards(row);
        s.input_guard = g.input;
        s.output_guard = g.output;
        s.omega = omega;
        s.progress = row.duration.progress;
        states_.push_back(std::move(s));
        after_.emplace_back();
        return states_.back().id;
    }

    void build(const Block& b, int entry, int exit, bool in_omega)
    {
        const Duration& d = b.duration;
        bool omega = in_omega || d.omega;
        if (!d.omega && d.lower == 0)
            eps_[entry].push_back(~exit);
        if (!d.omega && d.upper && *d.upper == 0)
            return;
        if (b.is_row()) {
            int inst = next_instance_++;
            std::int64_t n = d.omega ? 1 : d.upper ? *d.upper : std::max<std::int64_t>(d.lower, 1);
            if (n > kMaxCopies)
                throw Error("row " + std::to_string(b.row_id) + ": duration too large to unroll");
            int prev = -1;
            for (std::int64_t i = 1; i <= n; ++i) {
                int s = state(b, static_cast<int>(i), inst, omega);
                if (prev < 0)
                    eps_[entry].push_back(s);
                else
                    after_[prev].push_back(s);
                if (!d.omega && i >= d.lower)
                    after_[s].push_back(~exit);
                prev = s;
            }
            if (d.omega || !d.upper)
                after_[prev].push_back(prev);
            return;
        }
        std::int64_t n = d.omega ? 1 : d.upper ? *d.upper : std::max<std::int64_t>(d.lower, 1);
        if (n > kMaxCopies)
            throw Error("group duration too large to unroll");
        int prev_exit = -1;
        for (std::int64_t i = 1; i <= n; ++i) {
            int e = junction();
            int x = junction();
            if (prev_exit < 0)
                eps_[entry].push_back(~e);
            else
                eps_[prev_exit].push_back(~e);
            int j = e;
            for (const auto& child : b.children) {
                int k = junction();
                build(child, j, k, omega);
                j = k;
            }
            eps_[j].push_back(~x);
            if (!d.omega && i >= d.lower)
                eps_[x].push_back(~exit);
            if (i == n && (d.omega || !d.upper))
                eps_[x].push_back(~e);
            prev_exit = x;
        }
    }

    Successors closure(const std::vector<int>& start) const
    {
        Successors out;
        std::vector<char> seen(eps_.size(), 0);
        std::vector<int> stack(start.begin(), start.end());
        while (!stack.empty()) {
            int n = stack.back();
            stack.pop_back();
            if (n >= 0) {
                out.states.push_back(n);
                continue;
            }
            int j = ~n;
            if (seen[j])
                continue;
            seen[j] = 1;
            if (j == final_)
                out.accept = true;
            for (int m : eps_[j])
                stack.push_back(m);
        }
        std::sort(out.states.begin(), out.states.end());
        out.states.erase(std::unique(out.states.begin(), out.states.end()), out.states.end());
        return out;
    }

    static constexpr std::int64_t kMaxCopies = 4096;

    const RelationalTable& table_;
    std::vector<AutomatonState> states_;
    std::vector<std::vector<int>> after_;
    std::vector<std::vector<int>> eps_;
    int final_ = -1;
    int next_instance_ = 0;
};

} // namespace

RowAutomaton compile(const RelationalTable& table)
{
    return Builder(table).run();
}

std::size_t RowAutomaton::edge_count() const
{
    std::size_t n = 0;
    for (const auto& s : next)
        n += s.states.size() + (s.accept ? 1 : 0);
    return n;
}

std::string RowAutomaton::to_graph() const
{
    std::ostringstream os;
    for (const auto& s : states) {
        os << "state " << s.id << " row=" << s.row << " copy=" << s.copy << " instance=" << s.instance;
        if (s.omega)
            os << " omega";
        if (s.progress)
            os << " progress";
        os << " | in: " << to_string(*s.input_guard) << " | out: " << to_string(*s.output_guard) << "\n";
    }
    for (int s : initial.states)
        os << "initial " << s << "\n";
    if (initial.accept)
        os << "initial accept\n";
    for (std::size_t s = 0; s < next.size(); ++s) {
        for (int t : next[s].states)
            os << "edge " << s << " -> " << t << (is_stay(static_cast<int>(s), t) ? " stay" : " fwd") << "\n";
        if (next[s].accept)
            os << "edge " << s << " -> accept\n";
    }
    return os.str();
}

RowAutomaton renumber(const RowAutomaton& a, const std::vector<int>& perm)
{
    if (perm.size() != a.states.size())
        throw Error("permutation size mismatch");
    auto map_succ = [&](const Successors& s) {
        Successors o;
        o.accept = s.accept;
        for (int x : s.states)
            o.states.push_back(perm[static_cast<std::size_t>(x)]);
        std::sort(o.states.begin(), o.states.end());
        return o;
    };
    RowAutomaton r;
    r.states.resize(a.states.size());
    r.next.resize(a.states.size());
    for (std::size_t i = 0; i < a.states.size(); ++i) {
        auto p = static_cast<std::size_t>(perm[i]);
        r.states[p] = a.states[i];
        r.states[p].id = perm[i];
        r.next[p] = map_succ(a.next[i]);
    }
    r.initial = map_succ(a.initial);
    return r;
}

BoundAutomaton::BoundAutomaton(const RowAutomaton& automaton, const Symbols& symbols, const SlotMap& slots)
    : a_(&automaton)
{
    for (const auto& s : automaton.states) {
        in_.push_back(compile(*s.input_guard, symbols, slots));
        out_.push_back(compile(*s.output_guard, symbols, slots));
    }
}

bool TokenSet::has_omega(const RowAutomaton& a) const
{
    return std::any_of(tokens.begin(), tokens.end(), [&](const RunToken& t) { return a.states[t.state].omega; });
}

std::string_view to_string(Fate f)
{
    switch (f) {
    case Fate::Uncovered: return "uncovered";
    case Fate::Violated: return "violated";
    case Fate::Survived: return "survived";
    case Fate::Pruned: return "pruned";
    }
    return "?";
}

bool StepEvents::any_survivor() const
{
    return std::any_of(fates.begin(), fates.end(), [](const auto& f) { return f.second == Fate::Survived; });
}

TokenSet initial_tokens(const RowAutomaton& a)
{
    TokenSet t;
    for (int s : a.initial.states)
        t.tokens.push_back({s, {}});
    return t;
}

std::pair<TokenSet, StepEvents> successors(const BoundAutomaton& bound, const TokenSet& tokens, const EvalEnv& env)
{
    const RowAutomaton& a = bound.automaton();
    StepEvents ev;
    ev.fates.reserve(tokens.tokens.size());
    bool all_uncovered = !tokens.tokens.empty();
    for (const auto& tok : tokens.tokens) {
        auto in = bound.input(tok.state, env);
        ev.division_by_zero |= in.division_by_zero;
        if (!in.value) {
            ev.fates.emplace_back(tok.state, Fate::Uncovered);
            continue;
        }
        all_uncovered = false;
        auto out = bound.output(tok.state, env);
        ev.division_by_zero |= out.division_by_zero;
        if (!out.value) {
            ev.any_violation = true;
            ev.fates.emplace_back(tok.state, Fate::Violated);
        } else {
            ev.fates.emplace_back(tok.state, Fate::Survived);
        }
    }
    ev.all_uncovered = all_uncovered;

    // Progress parents whose forward move was taken by a surviving token.
    std::vector<int> taken;
    for (int p : tokens.progress_parents) {
        for (std::size_t i = 0; i < tokens.tokens.size(); ++i) {
            int t = tokens.tokens[i].state;
            if (ev.fates[i].second == Fate::Survived && !a.is_stay(p, t)
                && std::binary_search(a.next[p].states.begin(), a.next[p].states.end(), t)) {
                taken.push_back(p);
                break;
            }
        }
    }
    if (!taken.empty()) {
        for (std::size_t i = 0; i < tokens.tokens.size(); ++i) {
            const auto& src = tokens.tokens[i].stay_sources;
            if (ev.fates[i].second != Fate::Survived || src.empty())
                continue;
            bool all = std::all_of(src.begin(), src.end(),
                                   [&](int s) { return std::find(taken.begin(), taken.end(), s) != taken.end(); });
            if (all)
                ev.fates[i].second = Fate::Pruned;
        }
    }

    std::map<int, RunToken> moved;
    TokenSet out;
    for (std::size_t i = 0; i < tokens.tokens.size(); ++i) {
        if (ev.fates[i].second != Fate::Survived)
            continue;
        int s = tokens.tokens[i].state;
        const auto& st = a.states[static_cast<std::size_t>(s)];
        if (st.progress)
            out.progress_parents.push_back(s);
        const auto& nx = a.next[static_cast<std::size_t>(s)];
        if (nx.accept)
            ev.any_accept = true;
        for (int t : nx.states) {
            bool via_stay = st.progress && a.is_stay(s, t);
            auto it = moved.find(t);
            if (it == moved.end()) {
                RunToken tok{t, {}};
                if (via_stay)
                    tok.stay_sources.push_back(s);
                moved.emplace(t, std::move(tok));
            } else if (!it->second.stay_sources.empty()) {
                if (via_stay) {
                    auto& v = it->second.stay_sources;
                    if (std::find(v.begin(), v.end(), s) == v.end())
                        v.push_back(s);
                } else {
                    it->second.stay_sources.clear();
                }
            }
        }
    }
    for (auto& [t, tok] : moved) {
        std::sort(tok.stay_sources.begin(), tok.stay_sources.end());
        out.tokens.push_back(std::move(tok));
    }
    std::sort(out.progress_parents.begin(), out.progress_parents.end());
    return {std::move(out), std::move(ev)};
}

} // namespace rtt
