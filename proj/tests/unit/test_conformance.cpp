#include "doctest.h"

#include "family.hpp"
#include "oracle.hpp"
#include "rtt/conformance.hpp"

#include "json.hpp"

#include <random>

using namespace rtt;
using rtt::testing::read_data;

namespace {

RelationalTable load(const std::string& name)
{
    auto t = parse_table(read_data(name));
    REQUIRE(validate(t).empty());
    return t;
}

ProductSystem pair(const std::vector<std::string>& files, const std::vector<std::string>& traces)
{
    std::vector<AugmentedSystem> v;
    for (const auto& f : files)
        v.push_back(augment(parse_rsl(read_data(f))));
    return product(std::move(v), traces);
}

Trace trace(const RelationalTable& t, const std::string& name, const std::string& file)
{
    return parse_trace(read_data(file), t, name);
}

// The 10-cycle example duplicated into two traces, compared with `::` on every output.
const char* kTwin = R"(table twin
traces a b
column in a::A : int[0,20]
column in b::A : int[0,20]
column out a::X : int[0,20]
column out b::X : int[0,20]
group omega {
  row 1 { b::A = "::"; b::X = "::"; a::A = "-"; a::X = "-"; }
}
)";

const char* kFinite = R"(table finite
traces t
column in t::A : bool
column out t::X : bool
row 1 { A = "TRUE"; X = "-"; }
row [1,2] { A = "-"; X = "X[-1]"; }
)";

// Direct single-trace monitor over the row structure, no stutter search.
VerdictKind direct_monitor(const Trace& tr, const RelationalTable& t)
{
    Symbols sym = t.symbols();
    SlotMap slots;
    std::vector<std::string> order{t.traces[0] + "::stutt"};
    for (const auto& v : tr.variables)
        order.push_back(t.traces[0] + "::" + v);
    for (std::size_t i = 0; i < order.size(); ++i)
        slots.vars[order[i]] = static_cast<int>(i);
    std::map<int, std::pair<CompiledExpr, CompiledExpr>> g;
    for (const auto* r : t.rows()) {
        auto gu = t.guards(*r);
        g[r->row_id] = {compile(*gu.input, sym, slots), compile(*gu.output, sym, slots)};
    }
    Unwinder u(t.body);
    auto s = u.start();
    if (s.accept)
        return VerdictKind::Conforms;
    std::set<Unwinder::Position> pos(s.positions.begin(), s.positions.end());
    std::vector<std::int64_t> hist;
    for (const auto& cyc : tr.cycles) {
        std::vector<std::int64_t> frame{0};
        frame.insert(frame.end(), cyc.begin(), cyc.end());
        EvalEnv env;
        env.current = frame;
        env.past = hist;
        env.width = frame.size();
        bool covered = false, violated = false, accept = false;
        std::set<Unwinder::Position> next;
        for (const auto& p : pos) {
            const auto& [in, out] = g.at(u.row_at(p).row_id);
            if (!in.holds(env))
                continue;
            covered = true;
            if (!out.holds(env)) {
                violated = true;
                continue;
            }
            auto n = u.after(p);
            accept |= n.accept;
            next.insert(n.positions.begin(), n.positions.end());
        }
        if (accept)
            return VerdictKind::Conforms;
        if (next.empty())
            return violated ? VerdictKind::Violation : VerdictKind::NotCovered;
        (void)covered;
        pos = std::move(next);
        hist.insert(hist.end(), frame.begin(), frame.end());
    }
    return VerdictKind::Inconclusive;
}

Trace random_trace(const RelationalTable& t, const std::string& name, std::mt19937& rng, int len)
{
    Trace tr;
    tr.name = name;
    for (const auto& c : t.columns)
        if (c.trace == name && c.kind != ColumnKind::Pause)
            tr.variables.push_back(c.variable);
    for (int k = 0; k < len; ++k) {
        std::vector<std::int64_t> cyc;
        for (const auto& v : tr.variables) {
            auto ty = t.find_column(name + "::" + v)->type;
            cyc.push_back(ty.min_raw() + static_cast<std::int64_t>(rng() % static_cast<unsigned>(ty.domain_size())));
        }
        tr.cycles.push_back(cyc);
    }
    return tr;
}

} // namespace

TEST_SUITE("conformance")
{
    TEST_CASE("trace files")
    {
        auto t = load("stamp.rtt");
        auto tr = trace(t, "new", "new_ok.trace");
        CHECK(tr.length() == 6);
        REQUIRE(tr.variables == std::vector<std::string>{"Err", "Press", "Release", "State", "WP"});
        CHECK(tr.cycles[3][3] == 2);  // Error
        auto again = parse_trace(format_trace(tr, t), t, "new");
        CHECK(again.cycles == tr.cycles);
        CHECK(parse_trace("WP=TRUE Press=FALSE State=Free\n", t, "old").cycles[0] == std::vector<std::int64_t>{0, 0, 1});
        CHECK_THROWS_AS(trace(t, "new", "bad.trace"), ParseError);
        CHECK_THROWS_AS(parse_trace("old::WP=TRUE\nold::Press=TRUE\n", t, "old"), ParseError);
        CHECK(trace(t, "old", "empty.trace").length() == 0);
    }

    TEST_CASE("monitor: stamp logs conform with old paused during the error")
    {
        auto t = load("stamp.rtt");
        auto v = monitor({trace(t, "old", "old_ok.trace"), trace(t, "new", "new_ok.trace")}, t);
        CHECK(v.kind == VerdictKind::ConformsWeak);  // omega never finishes
        REQUIRE(v.witness.stutter.size() == 6);
        CHECK(v.witness.stutter[3] == std::vector<bool>{true, false});
        CHECK(v.witness.stutter[4] == std::vector<bool>{true, false});
        CHECK(v.witness.stutter[0] == std::vector<bool>{false, false});
    }

    TEST_CASE("monitor: diverging Press is a violation at step 0")
    {
        auto t = load("stamp.rtt");
        auto v = monitor({trace(t, "old", "old_ok.trace"), trace(t, "new", "new_bad.trace")}, t);
        CHECK(v.kind == VerdictKind::Violation);
        CHECK(v.step == 0);
        CHECK(v.failed_rows == std::vector<int>{0});
        CHECK(v.failed_cells == std::vector<std::string>{"row 0: new::Press"});
    }

    TEST_CASE("monitor: other verdicts")
    {
        auto t = load("stamp.rtt");
        CHECK(monitor({trace(t, "old", "old_uncovered.trace"), trace(t, "new", "new_uncovered.trace")}, t).kind
              == VerdictKind::NotCovered);
        auto f = load("two_rows.rtt");
        CHECK(monitor({trace(f, "t", "short.trace")}, f).kind == VerdictKind::Inconclusive);
        CHECK(monitor({trace(f, "t", "empty.trace")}, f).kind == VerdictKind::Inconclusive);
        CHECK_THROWS_AS(monitor({trace(f, "t", "short.trace"), trace(f, "t", "short.trace")}, f), Error);
    }

    TEST_CASE("monitor: twin copies of the concrete run conform")
    {
        auto t = parse_table(kTwin);
        auto c = to_concrete(load("fig1.rtt")).cycles();
        Trace a, b;
        a.name = "a";
        b.name = "b";
        a.variables = b.variables = {"A", "X"};
        for (const auto& cy : c) {
            a.cycles.push_back({cy[0], cy[3]});
            b.cycles.push_back({cy[0], cy[3]});
        }
        auto v = monitor({a, b}, t);
        CHECK(v.kind == VerdictKind::ConformsWeak);
        CHECK(v.step == 10);
        b.cycles[4][1] = 7;
        auto w = monitor({a, b}, t);
        CHECK(w.kind == VerdictKind::Violation);
        CHECK(w.step == 4);
    }

    TEST_CASE("monitor: acceptance is terminal")
    {
        auto t = parse_table(kFinite);
        Trace tr;
        tr.name = "t";
        tr.variables = {"A", "X"};
        tr.cycles = {{1, 1}, {0, 1}};
        auto v = monitor({tr}, t);
        REQUIRE(v.kind == VerdictKind::Conforms);
        std::mt19937 rng(51);
        for (int i = 0; i < 50; ++i) {
            auto ext = tr;
            for (int k = 0; k < 4; ++k)
                ext.cycles.push_back({static_cast<std::int64_t>(rng() % 2), static_cast<std::int64_t>(rng() % 2)});
            CHECK(monitor({ext}, t).kind == VerdictKind::Conforms);
        }
    }

    TEST_CASE("property: single-trace monitor agrees with a direct monitor")
    {
        std::mt19937 rng(52);
        int compared = 0;
        while (compared < 150) {
            auto inst = testing::draw_instance(rng);
            if (!inst || inst->table.traces.size() != 1 || !inst->table.globals.empty())
                continue;
            for (int k = 0; k < 5; ++k) {
                auto tr = random_trace(inst->table, "a", rng, static_cast<int>(rng() % 5));
                auto got = monitor({tr}, inst->table).kind;
                auto want = direct_monitor(tr, inst->table);
                if (got == VerdictKind::ConformsWeak)
                    got = VerdictKind::Inconclusive;  // the direct monitor has no omega notion
                CHECK_MESSAGE(got == want, inst->table_text);
            }
            ++compared;
        }
    }

    TEST_CASE("check: stamp pair holds, mutant fails at step 0")
    {
        auto t = load("stamp.rtt");
        auto ok = check_weak(pair({"stamp_old.rsl", "stamp_new.rsl"}, {"old", "new"}), t);
        CHECK(ok.outcome == Outcome::Holds);
        CHECK(ok.stats.states > 0);
        auto strict = check_strict(pair({"stamp_old.rsl", "stamp_new.rsl"}, {"old", "new"}), t);
        CHECK(strict.outcome == Outcome::Holds);

        auto p = pair({"stamp_old.rsl", "stamp_new_mutant.rsl"}, {"old", "new"});
        auto bad = check_weak(p, t);
        REQUIRE(bad.outcome == Outcome::Fails);
        REQUIRE(bad.counterexample);
        CHECK(bad.counterexample->steps.size() == 1);
        auto text = format_counterexample(*bad.counterexample, p, t);
        CHECK(text.find("\n0 | old::stutt=FALSE") != std::string::npos);
        CHECK(text.find("new::Press=TRUE") != std::string::npos);
        auto j = nlohmann::json::parse(format_result_json(bad, p, t));
        CHECK(j["result"] == "fails");
        CHECK(j["counterexample"]["steps"].size() == 1);
    }

    TEST_CASE("check: the literal stamp table is not enough on its own")
    {
        // Err is a free input there, so the challenger may raise it in row 0
        auto r = check_weak(pair({"stamp_old.rsl", "stamp_new.rsl"}, {"old", "new"}), load("fig5.rtt"));
        CHECK(r.outcome == Outcome::Fails);
    }

    TEST_CASE("check: crane non-interference")
    {
        auto p = pair({"crane.rsl", "crane.rsl"}, {"a", "b"});
        auto bad = check_weak(p, load("crane_ni.rtt"));
        REQUIRE(bad.outcome == Outcome::Fails);
        CHECK(bad.counterexample->steps.size() == 2);
        auto good = check_weak(p, load("crane_ni_range.rtt"));
        CHECK(good.outcome == Outcome::Holds);
    }

    TEST_CASE("check: state cap gives unknown")
    {
        auto p = pair({"crane.rsl", "crane.rsl"}, {"a", "b"});
        CheckOptions o;
        o.max_states = 1;
        auto r = check_weak(p, load("crane_ni_range.rtt"), o);
        CHECK(r.outcome == Outcome::Unknown);
        CHECK_FALSE(r.counterexample);
    }

    TEST_CASE("check: compatibility errors")
    {
        auto t = load("stamp.rtt");
        CHECK_THROWS_AS(check_weak(pair({"stamp_old.rsl", "stamp_new.rsl"}, {"new", "old"}), t), Error);
        CHECK_THROWS_AS(check_weak(pair({"stamp_old.rsl"}, {"old"}), t), Error);
        CHECK_THROWS_AS(check_weak(pair({"stamp_old.rsl", "stamp_old.rsl"}, {"old", "new"}), t), Error);
    }

    TEST_CASE("check: stall table holds weakly, fails strictly with a lasso")
    {
        auto inst = testing::stall_instance();
        auto w = check_weak(*inst.product, inst.table);
        CHECK(w.outcome == Outcome::Holds);
        auto s = check_strict(*inst.product, inst.table);
        REQUIRE(s.outcome == Outcome::Fails);
        REQUIRE(s.counterexample);
        REQUIRE(s.counterexample->loop_start);
        CHECK(*s.counterexample->loop_start < s.counterexample->steps.size());
        auto text = format_counterexample(*s.counterexample, *inst.product, inst.table);
        CHECK(text.find("# loop starts here") != std::string::npos);
    }

    TEST_CASE("check: omega don't-care table holds strictly")
    {
        auto t = parse_table("table w\ntraces a\ncolumn in a::i : bool\ncolumn out a::o : bool\n"
                             "row omega { a::i = \"-\"; a::o = \"-\"; }\n");
        auto inst = testing::stall_instance();
        CHECK(check_strict(*inst.product, t).outcome == Outcome::Holds);
    }

    TEST_CASE("property: weak counterexamples replay as violations")
    {
        std::mt19937 rng(53);
        int replayed = 0;
        for (int i = 0; i < 400 && replayed < 60; ++i) {
            auto inst = testing::draw_instance(rng);
            if (!inst)
                continue;
            auto r = check_weak(*inst->product, inst->table);
            if (r.outcome != Outcome::Fails)
                continue;
            const auto& cex = *r.counterexample;
            MonitorOptions o;
            o.binding = cex.binding;
            o.schedule = cex.schedule(*inst->product);
            auto v = monitor(cex.traces(*inst->product), inst->table, o);
            CHECK_MESSAGE(v.kind == VerdictKind::Violation, inst->table_text);
            CHECK(v.step + 1 == cex.steps.size());
            ++replayed;
        }
        CHECK(replayed >= 20);
    }

    TEST_CASE("property: strict implies weak, oracle agrees with weak")
    {
        std::mt19937 rng(54);
        int n = 0;
        for (int i = 0; i < 400 && n < 80; ++i) {
            auto inst = testing::draw_instance(rng);
            if (!inst)
                continue;
            auto w = check_weak(*inst->product, inst->table);
            auto s = check_strict(*inst->product, inst->table);
            if (s.holds())
                CHECK_MESSAGE(w.holds(), inst->table_text);
            auto o = testing::oracle_weak(*inst->product, inst->table);
            CHECK_MESSAGE(o.holds == w.holds(), inst->table_text);
            if (!o.holds && w.counterexample)
                CHECK(o.lose_length == w.counterexample->steps.size());
            ++n;
        }
        CHECK(n == 80);
    }

    TEST_CASE("property: strict lassos never lose when replayed")
    {
        std::mt19937 rng(55);
        int seen = 0;
        for (int i = 0; i < 600 && seen < 30; ++i) {
            auto inst = testing::draw_instance(rng);
            if (!inst)
                continue;
            auto s = check_strict(*inst->product, inst->table);
            if (s.outcome != Outcome::Fails || !s.counterexample || !s.counterexample->loop_start)
                continue;
            const auto& cex = *s.counterexample;
            MonitorOptions o;
            o.binding = cex.binding;
            o.schedule = cex.schedule(*inst->product);
            auto v = monitor(cex.traces(*inst->product), inst->table, o);
            CHECK(v.kind != VerdictKind::Violation);
            CHECK(v.kind != VerdictKind::NotCovered);
            ++seen;
        }
        CHECK(seen > 0);
    }

    TEST_CASE("reports are deterministic")
    {
        auto t = load("crane_ni.rtt");
        auto p = pair({"crane.rsl", "crane.rsl"}, {"a", "b"});
        auto a = format_result(check_weak(p, t), p, t);
        auto b = format_result(check_weak(p, t), p, t);
        auto strip = [](std::string s) { return s.substr(0, s.find("time:")); };
        CHECK(strip(a) == strip(b));
        auto ca = format_counterexample(*check_weak(p, t).counterexample, p, t);
        CHECK(ca == format_counterexample(*check_weak(p, t).counterexample, p, t));
    }
}
