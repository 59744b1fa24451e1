#include "doctest.h"

#include "rtt/expr.hpp"

#include <random>

using namespace rtt;

namespace {

struct Fixture {
    EnumRegistry enums;
    CellContext ctx;

    Fixture()
    {
        enums.add("Mode", {"Free", "Stamping", "Error"});
        ctx.trace = "old";
        ctx.variable = "X";
        ctx.kind = ColumnKind::Output;
        ctx.type = Type::integer(0, 20);
        ctx.traces = {"old", "new"};
        ctx.globals = {"p"};
        ctx.enums = &enums;
    }

    std::string expand(const std::string& cell, const CellContext& c) const
    {
        return to_string(*constraint_of(desugar(parse_cell(cell, c), c)));
    }
    std::string expand(const std::string& cell) const { return expand(cell, ctx); }

    CellContext with(Type t, std::string var) const
    {
        auto c = ctx;
        c.type = t;
        c.variable = std::move(var);
        return c;
    }
};

// old::X, old::Y, old::Z, new::X, new::Y over int[0,20]; p global
struct World {
    Symbols sym;
    SlotMap slots;
    std::vector<std::string> names{"old::X", "old::Y", "old::Z", "new::X", "new::Y"};

    World()
    {
        for (std::size_t i = 0; i < names.size(); ++i) {
            sym.vars[names[i]] = Type::integer(0, 20);
            slots.vars[names[i]] = static_cast<int>(i);
        }
        sym.globals["p"] = Type::integer(0, 20);
        slots.globals["p"] = 0;
    }

    bool eval(const Expr& e, const std::vector<std::int64_t>& cur, const std::vector<std::int64_t>& past,
              std::int64_t p) const
    {
        auto c = compile(e, sym, slots);
        std::vector<std::int64_t> g{p};
        EvalEnv env;
        env.current = cur;
        env.past = past;
        env.width = names.size();
        env.globals = g;
        return c.holds(env);
    }
};

} // namespace

TEST_SUITE("expr")
{
    TEST_CASE("abbreviation: literal is equality with the column")
    {
        Fixture f;
        CHECK(f.expand("4") == "old::X = 4");
        CHECK(f.expand("2*p") == "old::X = 2 * p");
        CHECK(f.expand("p") == "old::X = p");
    }

    TEST_CASE("abbreviation: comparison prefixes")
    {
        Fixture f;
        CHECK(f.expand("<3") == "old::X < 3");
        CHECK(f.expand("<=3") == "old::X <= 3");
        CHECK(f.expand(">3") == "old::X > 3");
        CHECK(f.expand(">=3") == "old::X >= 3");
        CHECK(f.expand("!=3") == "old::X != 3");
        CHECK(f.expand("=3") == "old::X = 3");
    }

    TEST_CASE("abbreviation: interval")
    {
        Fixture f;
        CHECK(f.expand("[0,p]") == "old::X >= 0 && old::X <= p");
        CHECK(f.expand("[ 1 , Y+1 ]") == "old::X >= 1 && old::X <= old::Y + 1");
    }

    TEST_CASE("abbreviation: comma list is a conjunction")
    {
        Fixture f;
        CHECK(f.expand("[1,2], !=Z/2") == "old::X >= 1 && old::X <= 2 && old::X != old::Z / 2");
        CHECK(f.expand("::, =3") == "old::X = new::X && old::X = 3");
    }

    TEST_CASE("abbreviation: don't care")
    {
        Fixture f;
        CHECK(f.expand("-") == "TRUE");
        CHECK(parse_cell("-", f.ctx).is_dont_care());
        CHECK(parse_cell(" - ", f.ctx).is_dont_care());
    }

    TEST_CASE("constraints pass through, qualified")
    {
        Fixture f;
        CHECK(f.expand("Y > 2") == "old::Y > 2");
        CHECK(f.expand("TRUE") == "TRUE");
        CHECK(f.expand("X[-1]") == "old::X = old::X[-1]");
    }

    TEST_CASE("relational references")
    {
        Fixture f;
        CHECK(f.expand("::") == "old::X = new::X");
        CHECK(f.expand("::Y") == "old::X = new::Y");
        CHECK(f.expand("new::") == "old::X = new::X");
        CHECK(f.expand("new::Y") == "old::X = new::Y");
        CHECK(f.expand("::[-2]") == "old::X = new::X[-2]");

        auto inputs = f.ctx;
        inputs.trace = "new";
        inputs.variable = "WP";
        inputs.type = Type::boolean();
        inputs.kind = ColumnKind::Input;
        CHECK(f.expand("::", inputs) == "new::WP = old::WP");
    }

    TEST_CASE("boolean and enum columns")
    {
        Fixture f;
        auto b = f.with(Type::boolean(), "B");
        CHECK(f.expand("TRUE", b) == "old::B = TRUE");
        CHECK(f.expand("!Y", b) == "old::B = !old::Y");
        auto e = f.with(Type::enumeration(f.enums.find("Mode")), "State");
        CHECK(f.expand("Free", e) == "old::State = Free");
        CHECK(f.expand("!=Error", e) == "old::State != Error");
        CHECK(f.expand("::, =Free", e) == "old::State = new::State && old::State = Free");
    }

    TEST_CASE("shorthand needs two traces")
    {
        Fixture f;
        auto one = f.ctx;
        one.traces = {"old"};
        CHECK_THROWS_AS(parse_cell("::", one), ParseError);
        CHECK_THROWS_AS(parse_cell("::Y", one), ParseError);
        CHECK_NOTHROW(parse_cell("old::Y", one));
    }

    TEST_CASE("malformed cells")
    {
        Fixture f;
        CHECK_THROWS_AS(parse_cell("p[-1]", f.ctx), ParseError);
        CHECK_THROWS_AS(parse_cell("[1,", f.ctx), ParseError);
        CHECK_THROWS_AS(parse_cell("1 +", f.ctx), ParseError);
        CHECK_THROWS_AS(parse_cell("X[1]", f.ctx), ParseError);
        CHECK(parse_cell("", f.ctx).is_dont_care());  // blank cell reads as unlisted
    }

    TEST_CASE("cell printing round-trips")
    {
        Fixture f;
        for (const char* s : {"4", "<3", "[0, p]", "-", "::", "::Y", "new::Y", "X[-1]", "[1, 2], !=Z / 2"}) {
            auto c = parse_cell(s, f.ctx);
            CHECK(parse_cell(to_string(c), f.ctx) == c);
        }
    }

    TEST_CASE("typecheck")
    {
        World w;
        Fixture f;
        auto typed = [&](const std::string& cell) {
            return typecheck(*constraint_of(desugar(parse_cell(cell, f.ctx), f.ctx)), w.sym);
        };
        CHECK(typed("[0,p]").kind == TypeKind::Bool);
        CHECK(typed("::Y").kind == TypeKind::Bool);
        CHECK_THROWS_AS(typed("Q"), TypeError);
        CHECK_THROWS_AS(typed("TRUE + 1"), TypeError);
    }

    TEST_CASE("missing history makes the atom false")
    {
        World w;
        Fixture f;
        auto e = constraint_of(desugar(parse_cell("X[-1]", f.ctx), f.ctx));
        std::vector<std::int64_t> cur{3, 0, 0, 0, 0};
        CHECK_FALSE(w.eval(*e, cur, {}, 0));
        std::vector<std::int64_t> past{3, 0, 0, 0, 0};
        CHECK(w.eval(*e, cur, past, 0));
        auto neg = constraint_of(desugar(parse_cell("!=X[-1]", f.ctx), f.ctx));
        CHECK_FALSE(w.eval(*neg, cur, {}, 0));
        CHECK(max_backref(*e) == 1);
    }

    TEST_CASE("division by zero makes the atom false")
    {
        World w;
        Fixture f;
        auto e = constraint_of(desugar(parse_cell("X / Y = 1", f.ctx), f.ctx));
        CHECK(w.eval(*e, {4, 4, 0, 0, 0}, {}, 0));
        CHECK_FALSE(w.eval(*e, {4, 0, 0, 0, 0}, {}, 0));
        auto n = constraint_of(desugar(parse_cell("!(X / Y = 1)", f.ctx), f.ctx));
        CHECK(w.eval(*n, {4, 0, 0, 0, 0}, {}, 0));
    }

    TEST_CASE("property: desugar is idempotent")
    {
        Fixture f;
        std::mt19937 rng(11);
        const char* atoms[] = {"4", "<3", ">=p", "[0,p]", "::", "::Y", "new::Y", "X[-1]", "-", "Y + 1", "!=Z/2", "Y > 2"};
        for (int i = 0; i < 300; ++i) {
            std::string cell;
            int n = 1 + static_cast<int>(rng() % 3);
            for (int k = 0; k < n; ++k)
                cell += (k ? ", " : "") + std::string(atoms[rng() % std::size(atoms)]);
            auto once = desugar(parse_cell(cell, f.ctx), f.ctx);
            CHECK_MESSAGE(desugar(once, f.ctx) == once, cell);
        }
    }

    TEST_CASE("property: comma order does not matter")
    {
        Fixture f;
        World w;
        std::mt19937 rng(12);
        const char* atoms[] = {"4", "<3", ">=p", "[0,p]", "::", "::Y", "new::Y", "!=Z/2", "Y > 2", "[2,9]", "-"};
        for (int i = 0; i < 200; ++i) {
            std::vector<std::string> parts;
            int n = 2 + static_cast<int>(rng() % 2);
            for (int k = 0; k < n; ++k)
                parts.push_back(atoms[rng() % std::size(atoms)]);
            auto join = [](const std::vector<std::string>& v) {
                std::string s;
                for (const auto& x : v)
                    s += (s.empty() ? "" : ", ") + x;
                return s;
            };
            auto a = constraint_of(desugar(parse_cell(join(parts), f.ctx), f.ctx));
            std::shuffle(parts.begin(), parts.end(), rng);
            auto b = constraint_of(desugar(parse_cell(join(parts), f.ctx), f.ctx));
            for (int k = 0; k < 30; ++k) {
                std::vector<std::int64_t> cur(5);
                for (auto& x : cur)
                    x = static_cast<std::int64_t>(rng() % 8);
                auto p = static_cast<std::int64_t>(rng() % 8);
                CHECK(w.eval(*a, cur, {}, p) == w.eval(*b, cur, {}, p));
            }
        }
    }

    TEST_CASE("property: don't care holds everywhere")
    {
        Fixture f;
        World w;
        std::mt19937 rng(13);
        auto e = constraint_of(desugar(parse_cell("-", f.ctx), f.ctx));
        for (int k = 0; k < 200; ++k) {
            std::vector<std::int64_t> cur(5);
            for (auto& x : cur)
                x = static_cast<std::int64_t>(rng() % 21);
            CHECK(w.eval(*e, cur, {}, 0));
        }
    }
}
