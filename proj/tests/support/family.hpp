#pragma once

#include "rtt/system.hpp"
#include "rtt/table.hpp"

#include <optional>
#include <random>
#include <string>
#include <vector>

namespace rtt::testing {

/// One generated (table, product) pair of the small exhaustive family:
/// up to three rows, durations 1 / [0,1] / [1,2] / [1,-], at most one group,
/// bool and int[0,2] columns, at most one global with up to three values.
struct Instance {
    std::string table_text;
    std::vector<std::string> rsl;
    RelationalTable table;
    std::optional<ProductSystem> product;
    std::size_t reachable = 0;
};

/// Draws one instance. Returns nullopt when the draw is rejected (invalid
/// table, or a product with more than `max_reachable` states).
std::optional<Instance> draw_instance(std::mt19937& rng, std::size_t max_reachable = 200);

/// Single-row `>=1` table with don't-care cells over a one-state system.
Instance stall_instance();

std::string read_data(const std::string& name);

} // namespace rtt::testing
