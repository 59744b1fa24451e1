#pragma once

#include "rtt/system.hpp"
#include "rtt/table.hpp"

#include <cstddef>

namespace rtt::testing {

struct OracleResult {
    bool holds = true;
    std::size_t depth_bound = 0;   // length of the enumerated input sequences
    std::size_t sequences = 0;     // memoised prefixes visited
    std::size_t lose_length = 0;   // shortest losing play found, when !holds
};

/// Weak conformance by enumerating challenger input sequences over the
/// table's row structure (Unwinder positions, not the compiled automaton).
/// Progress flags are not supported.
OracleResult oracle_weak(const ProductSystem& sys, const RelationalTable& table);

} // namespace rtt::testing
