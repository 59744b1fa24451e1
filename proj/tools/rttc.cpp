#include "rtt/automaton.hpp"
#include "rtt/conformance.hpp"
#include "rtt/smv.hpp"
#include "rtt/system.hpp"
#include "rtt/table.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

enum Exit { kPass = 0, kFail = 1, kUsage = 2, kNotCovered = 3, kUnknown = 4 };

struct Global {
    std::size_t max_states = 1'000'000;
    std::size_t max_steps = 0;  // 0: unlimited
    std::string format = "text";
};

struct Usage : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Usage("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text) || !out.flush())
        throw Usage("cannot write '" + path + "'");
}

rtt::RelationalTable load_table(const std::string& path)
{
    auto text = slurp(path);
    try {
        auto t = rtt::parse_table(text);
        auto diags = rtt::validate(t);
        if (!diags.empty()) {
            std::string msg;
            for (const auto& d : diags)
                msg += path + ":" + rtt::to_string(d) + "\n";
            msg.pop_back();
            throw Usage(msg);
        }
        return t;
    } catch (const rtt::ParseError& e) {
        throw Usage(path + ":" + rtt::to_string(e.pos()) + ": " + e.message());
    }
}

/// Pairs files with table traces: positional in declaration order, or by
/// `--bind trace=path`.
std::vector<std::pair<std::string, std::string>> bind_files(const rtt::RelationalTable& t,
                                                      const std::vector<std::string>& files,
                                                      const std::vector<std::string>& binds)
{
    std::map<std::string, std::string> by;
    for (const auto& b : binds) {
        auto eq = b.find('=');
        if (eq == std::string::npos)
            throw Usage("--bind expects trace=path, got '" + b + "'");
        auto tr = b.substr(0, eq);
        if (std::find(t.traces.begin(), t.traces.end(), tr) == t.traces.end())
            throw Usage("--bind names unknown trace '" + tr + "'");
        if (!by.emplace(tr, b.substr(eq + 1)).second)
            throw Usage("trace '" + tr + "' bound twice");
    }
    std::size_t next = 0;
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& tr : t.traces) {
        auto it = by.find(tr);
        if (it != by.end()) {
            out.emplace_back(tr, it->second);
        } else if (next < files.size()) {
            out.emplace_back(tr, files[next++]);
        } else {
            throw Usage("no file given for trace '" + tr + "'");
        }
    }
    if (next < files.size())
        throw Usage("more files than traces");
    return out;
}

rtt::ProductSystem load_product(const rtt::RelationalTable& t, const std::vector<std::string>& files,
                                const std::vector<std::string>& binds)
{
    std::vector<rtt::AugmentedSystem> systems;
    std::vector<std::string> traces;
    for (const auto& [tr, path] : bind_files(t, files, binds)) {
        auto text = slurp(path);
        try {
            systems.push_back(rtt::augment(rtt::parse_rsl(text)));
        } catch (const rtt::ParseError& e) {
            throw Usage(path + ":" + rtt::to_string(e.pos()) + ": " + e.message());
        } catch (const rtt::Error& e) {
            throw Usage(path + ": " + e.what());
        }
        traces.push_back(tr);
    }
    try {
        auto p = rtt::product(std::move(systems), std::move(traces));
        rtt::check_compatible(p, t);
        return p;
    } catch (const rtt::Error& e) {
        throw Usage(e.what());
    }
}

rtt::Mode parse_mode(const std::string& m)
{
    return m == "strict" ? rtt::Mode::Strict : rtt::Mode::Weak;
}

int cmd_validate(const std::string& path, const Global& g)
{
    auto t = load_table(path);
    auto a = rtt::compile(t);
    if (g.format == "machine") {
        nlohmann::json j;
        j["table"] = t.name;
        j["valid"] = true;
        j["rows"] = t.rows().size();
        j["automaton_states"] = a.states.size();
        j["automaton_edges"] = a.edge_count();
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << path << ": ok, table " << t.name << ", " << t.rows().size() << " rows, " << a.states.size()
                  << " automaton states, " << a.edge_count() << " edges\n";
    }
    return kPass;
}

int cmd_monitor(const std::string& table_path, const std::vector<std::string>& files,
                const std::vector<std::string>& binds, const Global& g)
{
    auto t = load_table(table_path);
    std::vector<rtt::Trace> traces;
    for (const auto& [tr, path] : bind_files(t, files, binds)) {
        auto text = slurp(path);
        try {
            traces.push_back(rtt::parse_trace(text, t, tr));
        } catch (const rtt::ParseError& e) {
            throw Usage(path + ":" + rtt::to_string(e.pos()) + ": " + e.message());
        }
    }
    rtt::MonitorOptions opt;
    if (g.max_steps)
        opt.max_steps = g.max_steps;
    rtt::Verdict v;
    try {
        v = rtt::monitor(traces, t, opt);
    } catch (const rtt::Error& e) {
        throw Usage(e.what());
    }
    std::cout << (g.format == "machine" ? rtt::format_verdict_json(v, t) : rtt::format_verdict(v, t));
    switch (v.kind) {
    case rtt::VerdictKind::Conforms:
    case rtt::VerdictKind::ConformsWeak: return kPass;
    case rtt::VerdictKind::Violation: return kFail;
    case rtt::VerdictKind::NotCovered: return kNotCovered;
    case rtt::VerdictKind::Inconclusive: return kUnknown;
    }
    return kUnknown;
}

int cmd_verify(const std::string& table_path, const std::vector<std::string>& files, const std::vector<std::string>& binds,
               const std::string& mode, const std::string& cex_path, const Global& g)
{
    auto t = load_table(table_path);
    auto p = load_product(t, files, binds);
    rtt::CheckOptions opt;
    opt.max_states = g.max_states;
    rtt::CheckResult r;
    try {
        r = rtt::check(p, t, parse_mode(mode), opt);
    } catch (const rtt::RuntimeError& e) {
        std::cerr << "error: system raised a runtime error: " << e.what() << "\n";
        return kUnknown;
    }
    std::cout << (g.format == "machine" ? rtt::format_result_json(r, p, t) : rtt::format_result(r, p, t));
    if (r.counterexample && !cex_path.empty())
        write_file(cex_path, rtt::format_counterexample(*r.counterexample, p, t));
    switch (r.outcome) {
    case rtt::Outcome::Holds: return kPass;
    case rtt::Outcome::Fails: return kFail;
    case rtt::Outcome::Unknown: return kUnknown;
    }
    return kUnknown;
}

int cmd_emit_smv(const std::string& table_path, const std::vector<std::string>& files,
                 const std::vector<std::string>& binds, const std::string& mode, const std::string& out)
{
    auto t = load_table(table_path);
    auto p = load_product(t, files, binds);
    auto m = rtt::emit_smv(p, t, parse_mode(mode));
    if (out.empty() || out == "-") {
        std::cout << m.text;
        return kPass;
    }
    write_file(out, m.text);
    write_file(out + ".manifest", rtt::format_manifest(m));
    std::cerr << "wrote " << out << " (" << m.manifest.size() << " state variables, " << m.state_bits() << " bits)\n";
    return kPass;
}

int cmd_instance(const std::string& concrete_path, const std::string& table_path, const Global& g)
{
    auto ct = load_table(concrete_path);
    auto t = load_table(table_path);
    rtt::InstanceResult r;
    try {
        r = rtt::is_instance(rtt::to_concrete(ct), t);
    } catch (const rtt::Error& e) {
        throw Usage(e.what());
    }
    if (g.format == "machine") {
        nlohmann::json j;
        j["instance"] = r.holds;
        nlohmann::json b = nlohmann::json::object();
        for (std::size_t i = 0; i < t.globals.size() && i < r.binding.size(); ++i)
            b[t.globals[i].name] = rtt::format_value(t.globals[i].type, r.binding[i]);
        j["binding"] = b;
        j["rows"] = r.rows;
        j["matched_cycles"] = r.matched_cycles;
        j["explanation"] = r.explanation;
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << (r.holds ? "instance: TRUE" : "instance: FALSE") << "\n";
        auto b = t.format_binding(r.binding);
        if (!b.empty())
            std::cout << "binding: " << b << "\n";
        if (!r.rows.empty()) {
            std::cout << "rows:";
            for (int x : r.rows)
                std::cout << ' ' << x;
            std::cout << "\n";
        }
        if (!r.explanation.empty())
            std::cout << r.explanation << "\n";
    }
    return r.holds ? kPass : kFail;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"rttc: relational test table checker"};
    app.require_subcommand(1);
    app.fallthrough();
    Global g;
    app.add_option("--max-states", g.max_states, "configuration cap for verify")->check(CLI::PositiveNumber);
    app.add_option("--max-steps", g.max_steps, "super-step cap for monitor (0: none)");
    app.add_option("--format", g.format, "report format")->check(CLI::IsMember({"text", "machine"}));

    std::string table, concrete, mode = "weak", out, cex;
    std::vector<std::string> files, binds;

    auto* validate = app.add_subcommand("validate", "check a table for well-formedness");
    validate->add_option("table", table)->required();

    auto* monitor = app.add_subcommand("monitor", "check recorded traces against a table");
    monitor->add_option("table", table)->required();
    monitor->add_option("traces", files, "one trace file per table trace, in declaration order");
    monitor->add_option("--bind", binds, "trace=path");

    auto* verify = app.add_subcommand("verify", "model-check reactive systems against a table");
    verify->add_option("table", table)->required();
    verify->add_option("systems", files, "one .rsl file per table trace, in declaration order");
    verify->add_option("--bind", binds, "trace=path");
    verify->add_option("--mode", mode)->check(CLI::IsMember({"weak", "strict"}));
    verify->add_option("--cex", cex, "write the counterexample here");

    auto* emit = app.add_subcommand("emit-smv", "write an SMV model");
    emit->add_option("table", table)->required();
    emit->add_option("systems", files);
    emit->add_option("--bind", binds, "trace=path");
    emit->add_option("--mode", mode)->check(CLI::IsMember({"weak", "strict"}));
    emit->add_option("-o,--output", out, "output file (manifest goes to <file>.manifest)");

    auto* instance = app.add_subcommand("instance", "is a concrete table an instance of a table");
    instance->add_option("concrete", concrete)->required();
    instance->add_option("table", table)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (*validate)
            return cmd_validate(table, g);
        if (*monitor)
            return cmd_monitor(table, files, binds, g);
        if (*verify)
            return cmd_verify(table, files, binds, mode, cex, g);
        if (*emit)
            return cmd_emit_smv(table, files, binds, mode, out);
        if (*instance)
            return cmd_instance(concrete, table, g);
    } catch (const Usage& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const rtt::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
    return kUsage;
}
