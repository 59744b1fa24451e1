#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rtt {

struct EnumType {
    std::string name;
    std::vector<std::string> constants;

    std::optional<int> ordinal(std::string_view constant) const;
};

using EnumTypePtr = std::shared_ptr<const EnumType>;

enum class TypeKind { Int, Bool, Enum };

/// A finite value type. Integers carry a closed range; enums are compared
/// structurally (same constant list), so the same enum may be declared in
/// several files.
struct Type {
    TypeKind kind = TypeKind::Bool;
    std::int64_t lo = 0;
    std::int64_t hi = 1;
    EnumTypePtr enum_type;

    static Type boolean() { return Type{}; }
    static Type integer(std::int64_t lo, std::int64_t hi);
    static Type enumeration(EnumTypePtr e);

    /// Number of values; the raw encoding is lo..hi for ints, 0/1 for bools
    /// and the ordinal for enums.
    std::int64_t domain_size() const;
    std::int64_t min_raw() const;
    std::int64_t max_raw() const;
    bool contains(std::int64_t raw) const { return raw >= min_raw() && raw <= max_raw(); }

    /// Same kind and, for enums, same constant list. Integer ranges are not compared.
    bool compatible(const Type& other) const;
    bool operator==(const Type& other) const;
};

std::string to_string(const Type& t);

/// A runtime value. All values are encoded as 64-bit integers; the kind is
/// kept for printing and for checks at boundaries.
struct Value {
    TypeKind kind = TypeKind::Int;
    std::int64_t raw = 0;

    static Value integer(std::int64_t v) { return {TypeKind::Int, v}; }
    static Value boolean(bool b) { return {TypeKind::Bool, b ? 1 : 0}; }
    static Value enumeration(std::int64_t ordinal) { return {TypeKind::Enum, ordinal}; }

    bool operator==(const Value&) const = default;
};

/// Prints a raw value of type `t`: `7`, `TRUE`, `Stamping`.
std::string format_value(const Type& t, std::int64_t raw);

/// Parses a literal of type `t`. Returns nullopt on mismatch or out-of-range.
std::optional<std::int64_t> parse_value(const Type& t, std::string_view text);

/// Odometer over the product of the domains, last position fastest.
/// `v` must start at all minima; returns false after the last valuation.
bool next_valuation(std::vector<std::int64_t>& v, const std::vector<Type>& types);
std::vector<std::int64_t> first_valuation(const std::vector<Type>& types);

/// The enum declarations visible in one file.
class EnumRegistry {
public:
    /// Adds an enum. Throws Error on a duplicate enum name.
    EnumTypePtr add(std::string name, std::vector<std::string> constants);
    EnumTypePtr find(std::string_view name) const;
    /// All enums declaring `constant`.
    std::vector<EnumTypePtr> declaring(std::string_view constant) const;
    const std::vector<EnumTypePtr>& all() const { return enums_; }

private:
    std::vector<EnumTypePtr> enums_;
};

} // namespace rtt
