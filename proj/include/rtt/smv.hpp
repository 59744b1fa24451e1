#pragma once

#include "rtt/conformance.hpp"
#include "rtt/error.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace rtt {

// ---------------------------------------------------------------------------
// Emission

struct SmvManifestEntry {
    std::string name;    // SMV identifier
    std::string type;    // `boolean` or `lo..hi`
    std::string origin;  // system | table | plumbing
    std::string source;  // `trace::var`, global name, automaton state, or empty
    int bits = 0;
};

struct SmvModel {
    std::string text;
    std::vector<SmvManifestEntry> manifest;
    std::vector<std::string> specs;

    int state_bits() const;
};

/// One `MODULE main` holding the product, the one-hot table automaton and
/// the conformance property. Enums are encoded by ordinal, `trace::var`
/// becomes `trace__var`. Deterministic.
SmvModel emit_smv(const ProductSystem& product, const RelationalTable& table, Mode mode);

/// Sidecar text: one `name type origin source bits` line per state variable.
std::string format_manifest(const SmvModel& model);

// ---------------------------------------------------------------------------
// Reading back (the subset emit_smv produces)

struct SmvExpr;
using SmvExprPtr = std::shared_ptr<const SmvExpr>;

struct SmvExpr {
    enum class Kind { Int, Bool, Ident, Next, Unary, Binary, Case };
    Kind kind = Kind::Int;
    std::int64_t value = 0;
    std::string name;  // Ident, Next
    std::string op;    // Unary: ! - G F X ; Binary: & | xor -> <-> = != < <= > >= + - * / mod
    SmvExprPtr a, b;
    std::vector<std::pair<SmvExprPtr, SmvExprPtr>> arms;  // Case
    SourcePos pos;
};

struct SmvVarDecl {
    std::string name;
    bool boolean = true;
    std::int64_t lo = 0, hi = 1;
    bool frozen = false;
    SourcePos pos;
};

struct SmvProgram {
    std::vector<SmvVarDecl> vars;
    std::vector<std::pair<std::string, SmvExprPtr>> defines;
    std::map<std::string, SmvExprPtr> init, next;
    std::vector<SmvExprPtr> invars;
    std::vector<SmvExprPtr> invarspecs, ltlspecs;
};

/// Parses an SMV model. Throws ParseError.
SmvProgram parse_smv(std::string_view text);

/// Syntax and scoping checks: parse errors, duplicate or undeclared names,
/// cyclic defines, bad assignment targets, temporal operators outside specs.
/// Empty iff the model is accepted.
std::vector<Diagnostic> check_smv(std::string_view text);

} // namespace rtt
