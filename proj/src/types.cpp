#include "rtt/types.hpp"

#include "rtt/error.hpp"

#include <charconv>
#include <sstream>

namespace rtt {

std::string to_string(const SourcePos& pos)
{
    if (pos.line == 0)
        return "?";
    return std::to_string(pos.line) + ":" + std::to_string(pos.column);
}

ParseError::ParseError(SourcePos pos, const std::string& message)
    : Error(to_string(pos) + ": " + message), pos_(pos), message_(message)
{
}

std::string to_string(const Diagnostic& d)
{
    if (d.pos.line == 0)
        return d.message;
    return to_string(d.pos) + ": " + d.message;
}

std::optional<int> EnumType::ordinal(std::string_view constant) const
{
    for (std::size_t i = 0; i < constants.size(); ++i)
        if (constants[i] == constant)
            return static_cast<int>(i);
    return std::nullopt;
}

Type Type::integer(std::int64_t lo, std::int64_t hi)
{
    Type t;
    t.kind = TypeKind::Int;
    t.lo = lo;
    t.hi = hi;
    return t;
}

Type Type::enumeration(EnumTypePtr e)
{
    Type t;
    t.kind = TypeKind::Enum;
    t.lo = 0;
    t.hi = static_cast<std::int64_t>(e->constants.size()) - 1;
    t.enum_type = std::move(e);
    return t;
}

std::int64_t Type::domain_size() const { return max_raw() - min_raw() + 1; }

std::int64_t Type::min_raw() const
{
    return kind == TypeKind::Int ? lo : 0;
}

std::int64_t Type::max_raw() const
{
    switch (kind) {
    case TypeKind::Int: return hi;
    case TypeKind::Bool: return 1;
    case TypeKind::Enum: return static_cast<std::int64_t>(enum_type->constants.size()) - 1;
    }
    return 0;
}

bool Type::compatible(const Type& other) const
{
    if (kind != other.kind)
        return false;
    if (kind == TypeKind::Enum)
        return enum_type->constants == other.enum_type->constants;
    return true;
}

bool Type::operator==(const Type& other) const
{
    if (!compatible(other))
        return false;
    return kind != TypeKind::Int || (lo == other.lo && hi == other.hi);
}

std::string to_string(const Type& t)
{
    switch (t.kind) {
    case TypeKind::Int: return "int[" + std::to_string(t.lo) + "," + std::to_string(t.hi) + "]";
    case TypeKind::Bool: return "bool";
    case TypeKind::Enum: return t.enum_type->name;
    }
    return "?";
}

std::string format_value(const Type& t, std::int64_t raw)
{
    switch (t.kind) {
    case TypeKind::Int: return std::to_string(raw);
    case TypeKind::Bool: return raw ? "TRUE" : "FALSE";
    case TypeKind::Enum:
        if (raw >= 0 && raw < static_cast<std::int64_t>(t.enum_type->constants.size()))
            return t.enum_type->constants[static_cast<std::size_t>(raw)];
        return "<bad enum " + std::to_string(raw) + ">";
    }
    return "?";
}

std::optional<std::int64_t> parse_value(const Type& t, std::string_view text)
{
    switch (t.kind) {
    case TypeKind::Int: {
        std::int64_t v = 0;
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec != std::errc{} || ptr != text.data() + text.size() || !t.contains(v))
            return std::nullopt;
        return v;
    }
    case TypeKind::Bool:
        if (text == "TRUE" || text == "true" || text == "1")
            return 1;
        if (text == "FALSE" || text == "false" || text == "0")
            return 0;
        return std::nullopt;
    case TypeKind::Enum: {
        auto dot = text.find('.');
        if (dot != std::string_view::npos) {
            if (text.substr(0, dot) != t.enum_type->name)
                return std::nullopt;
            text = text.substr(dot + 1);
        }
        if (auto o = t.enum_type->ordinal(text))
            return *o;
        return std::nullopt;
    }
    }
    return std::nullopt;
}

EnumTypePtr EnumRegistry::add(std::string name, std::vector<std::string> constants)
{
    if (find(name))
        throw Error("duplicate enum '" + name + "'");
    if (constants.empty())
        throw Error("enum '" + name + "' has no constants");
    auto e = std::make_shared<EnumType>(EnumType{std::move(name), std::move(constants)});
    enums_.push_back(e);
    return e;
}

EnumTypePtr EnumRegistry::find(std::string_view name) const
{
    for (const auto& e : enums_)
        if (e->name == name)
            return e;
    return nullptr;
}

std::vector<EnumTypePtr> EnumRegistry::declaring(std::string_view constant) const
{
    std::vector<EnumTypePtr> out;
    for (const auto& e : enums_)
        if (e->ordinal(constant))
            out.push_back(e);
    return out;
}

bool next_valuation(std::vector<std::int64_t>& v, const std::vector<Type>& types)
{
    for (std::size_t i = types.size(); i-- > 0;) {
        if (v[i] < types[i].max_raw()) {
            ++v[i];
            return true;
        }
        v[i] = types[i].min_raw();
    }
    return false;
}

std::vector<std::int64_t> first_valuation(const std::vector<Type>& types)
{
    std::vector<std::int64_t> v;
    v.reserve(types.size());
    for (const auto& t : types)
        v.push_back(t.min_raw());
    return v;
}

} // namespace rtt
