#include "doctest.h"

#include "family.hpp"
#include "smv_eval.hpp"
#include "rtt/smv.hpp"

#include <random>
#include <set>

using namespace rtt;
using rtt::testing::read_data;

namespace {

ProductSystem pair(const std::vector<std::string>& files, const std::vector<std::string>& traces)
{
    std::vector<AugmentedSystem> v;
    for (const auto& f : files)
        v.push_back(augment(parse_rsl(read_data(f))));
    return product(std::move(v), traces);
}

bool mentions(const std::vector<Diagnostic>& d, const std::string& needle)
{
    for (const auto& x : d)
        if (x.message.find(needle) != std::string::npos)
            return true;
    return false;
}

} // namespace

TEST_SUITE("smv")
{
    TEST_CASE("stamp model is well-formed and deterministic")
    {
        auto t = parse_table(read_data("stamp.rtt"));
        auto p = pair({"stamp_old.rsl", "stamp_new.rsl"}, {"old", "new"});
        auto m = emit_smv(p, t, Mode::Weak);
        CHECK(m.text == emit_smv(p, t, Mode::Weak).text);
        auto d = check_smv(m.text);
        CHECK_MESSAGE(d.empty(), (d.empty() ? "" : to_string(d.front())));
        CHECK(m.text.find("MODULE main") != std::string::npos);
        CHECK(m.specs == std::vector<std::string>{"INVARSPEC !loss;"});
        CHECK(m.text.find("LTLSPEC") == std::string::npos);
        auto s = emit_smv(p, t, Mode::Strict);
        CHECK(check_smv(s.text).empty());
        CHECK(s.specs.size() == 2);
        CHECK(s.text.find("LTLSPEC G F (sdone | omega_active);") != std::string::npos);
    }

    TEST_CASE("manifest lists every system and table variable once")
    {
        auto t = parse_table(read_data("stamp.rtt"));
        auto p = pair({"stamp_old.rsl", "stamp_new.rsl"}, {"old", "new"});
        auto m = emit_smv(p, t, Mode::Weak);
        std::multiset<std::string> names;
        for (const auto& e : m.manifest)
            names.insert(e.name);
        for (const auto& v : p.variables())
            CHECK(names.count(v.trace + "__" + v.variable) == 1);
        for (const auto& tr : p.traces())
            CHECK(names.count(tr + "__stutt") == 1);
        auto prog = parse_smv(m.text);
        CHECK(prog.vars.size() == m.manifest.size());
        int bits = 0;
        for (const auto& e : m.manifest)
            bits += e.bits;
        CHECK(m.state_bits() == bits);
        auto text = format_manifest(m);
        CHECK(text.find("old__State 0..2 system old::State 2") != std::string::npos);
    }

    TEST_CASE("globals are frozen")
    {
        std::mt19937 rng(61);
        for (int i = 0; i < 300; ++i) {
            auto inst = testing::draw_instance(rng);
            if (!inst || inst->table.globals.empty())
                continue;
            auto m = emit_smv(*inst->product, inst->table, Mode::Weak);
            auto prog = parse_smv(m.text);
            bool found = false;
            for (const auto& v : prog.vars)
                if (v.name == "g__g") {
                    found = true;
                    CHECK(v.frozen);
                }
            CHECK(found);
            return;
        }
        FAIL("no instance with a global drawn");
    }

    TEST_CASE("parser and checker reject broken models")
    {
        CHECK_THROWS_AS(parse_smv("MODULE main\nVAR\n  x : boolean\n"), ParseError);
        CHECK(mentions(check_smv("MODULE main\nVAR\n  x : boolean;\nASSIGN\n  next(y) := x;\n"), "y"));
        CHECK(mentions(check_smv("MODULE main\nVAR\n  x : boolean;\n  x : boolean;\n"), "x"));
        CHECK(mentions(check_smv("MODULE main\nVAR\n  x : boolean;\nDEFINE\n  a := b;\n  b := a;\n"), "cycl"));
        CHECK(mentions(check_smv("MODULE main\nFROZENVAR\n  g : 0..2;\nASSIGN\n  next(g) := 1;\n"), "g"));
        CHECK(mentions(check_smv("MODULE main\nVAR\n  x : boolean;\nINVAR G x;\n"), ""));
        CHECK_FALSE(check_smv("MODULE main\nVAR\n  x : boolean;\nINVAR G x;\n").empty());
        CHECK(check_smv("MODULE main\nVAR\n  x : boolean;\n  n : 0..3;\nDEFINE\n  a := !x & n mod 2 = 1;\n"
                        "ASSIGN\n  init(n) := 0;\n  next(n) := case n < 3 : n + 1; TRUE : 0; esac;\nINVARSPEC n <= 3;\n"
                        "LTLSPEC G F a;\n")
                  .empty());
    }

    TEST_CASE("evaluator reproduces the scenario verdicts")
    {
        auto t = parse_table(read_data("stamp.rtt"));
        auto good = testing::evaluate_smv(
            parse_smv(emit_smv(pair({"stamp_old.rsl", "stamp_new.rsl"}, {"old", "new"}), t, Mode::Strict).text));
        CHECK(good.invarspecs_hold);
        CHECK(good.ltlspecs_hold);
        auto bad = testing::evaluate_smv(
            parse_smv(emit_smv(pair({"stamp_old.rsl", "stamp_new_mutant.rsl"}, {"old", "new"}), t, Mode::Weak).text));
        CHECK_FALSE(bad.invarspecs_hold);
        CHECK(bad.depth == 0);  // inputs live in the state, so the loss shows in the first one
        auto stall = testing::stall_instance();
        auto st = testing::evaluate_smv(parse_smv(emit_smv(*stall.product, stall.table, Mode::Strict).text));
        CHECK(st.invarspecs_hold);
        CHECK_FALSE(st.ltlspecs_hold);
    }

    TEST_CASE("property: emitted models agree with the explicit checker")
    {
        std::mt19937 rng(62);
        int n = 0;
        for (int i = 0; i < 500 && n < 60; ++i) {
            auto inst = testing::draw_instance(rng, 60);
            if (!inst)
                continue;
            for (auto mode : {Mode::Weak, Mode::Strict}) {
                auto m = emit_smv(*inst->product, inst->table, mode);
                CHECK(m.text == emit_smv(*inst->product, inst->table, mode).text);
                auto d = check_smv(m.text);
                REQUIRE_MESSAGE(d.empty(), inst->table_text);
                auto ev = testing::evaluate_smv(parse_smv(m.text), 300'000);
                if (ev.truncated)
                    continue;
                auto r = check(*inst->product, inst->table, mode);
                bool smv_holds = ev.invarspecs_hold && ev.ltlspecs_hold;
                CHECK_MESSAGE(smv_holds == r.holds(), to_string(mode), "\n", inst->table_text);
            }
            ++n;
        }
        CHECK(n >= 40);
    }
}
