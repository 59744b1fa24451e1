#pragma once

#include "rtt/expr.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rtt {

enum class VarKind { Input, Output, State };
std::string_view to_string(VarKind k);

struct VarDecl {
    std::string name;
    VarKind kind = VarKind::Input;
    Type type;
    std::int64_t init = 0;  // outputs and states
    SourcePos pos;
};

struct Stmt {
    enum class Kind { Assign, If };
    Kind kind = Kind::Assign;
    std::string target;
    ExprPtr value;
    std::vector<std::pair<ExprPtr, std::vector<Stmt>>> branches;  // if / elif
    std::vector<Stmt> otherwise;
    SourcePos pos;
};

/// Values of the non-input variables (outputs and states), in declaration order.
struct SystemState {
    std::vector<std::int64_t> values;
    bool operator==(const SystemState&) const = default;
    auto operator<=>(const SystemState&) const = default;
};

struct StepResult {
    SystemState next;
    std::vector<std::int64_t> outputs;  // in output declaration order
};

class ReactiveSystem {
public:
    std::string name;
    EnumRegistry enums;
    std::vector<VarDecl> vars;
    std::vector<Stmt> body;

    const VarDecl* find(std::string_view name) const;
    /// Indices into `vars`.
    const std::vector<int>& inputs() const { return inputs_; }
    const std::vector<int>& outputs() const { return outputs_; }
    const std::vector<int>& memory() const { return memory_; }  // outputs and states
    std::vector<Type> input_types() const;

    SystemState initial_state() const;
    /// Output values held in `state`.
    std::vector<std::int64_t> outputs_of(const SystemState& state) const;

    /// One reaction. Throws RuntimeError on inputs outside their domains,
    /// range violations and division by zero.
    StepResult step(const SystemState& state, std::span<const std::int64_t> inputs) const;

    /// Checks and compiles the body. Called by parse_rsl; call again after
    /// editing `vars` or `body` by hand. Throws TypeError / ParseError.
    void finalize();

    struct Program;  // compiled body, internal

private:
    std::shared_ptr<const Program> program_;
    std::vector<int> inputs_, outputs_, memory_;
};

/// Parses the `.rsl` reactive system language.
ReactiveSystem parse_rsl(std::string_view text);

/// A system with the extra `stutt` input: when set, state and outputs stay.
class AugmentedSystem {
public:
    /// Throws Error if the system already has a variable named `stutt`.
    explicit AugmentedSystem(ReactiveSystem base);

    const ReactiveSystem& base() const { return base_; }
    StepResult step(const SystemState& state, bool stutt, std::span<const std::int64_t> inputs) const;

private:
    ReactiveSystem base_;
};

AugmentedSystem augment(ReactiveSystem sys);

/// A variable of the product, named `trace::var`.
struct ProductVar {
    std::string trace;
    std::string variable;
    VarKind kind = VarKind::Input;
    Type type;
    int component = 0;
    int index = -1;  // index into the component's vars; -1 for stutt

    std::string name() const { return trace + "::" + variable; }
};

using ProductState = std::vector<std::int64_t>;

struct ProductStep {
    ProductState next;
    std::vector<std::int64_t> outputs;  // concatenated per component
};

/// Isolated parallel composition; each component reads only its own slice.
class ProductSystem {
public:
    ProductSystem(std::vector<AugmentedSystem> systems, std::vector<std::string> traces);

    const std::vector<std::string>& traces() const { return traces_; }
    std::size_t size() const { return systems_.size(); }
    const AugmentedSystem& component(std::size_t i) const { return systems_[i]; }
    int trace_index(std::string_view trace) const;

    /// Product inputs: per trace, `stutt` followed by the component inputs.
    const std::vector<ProductVar>& inputs() const { return inputs_; }
    /// Inputs, outputs and states of all components (stutt flags excluded).
    const std::vector<ProductVar>& variables() const { return variables_; }

    ProductState initial_state() const;
    /// Slice of component `i` in a product state.
    SystemState component_state(const ProductState& s, std::size_t i) const;

    /// `inputs` follows `inputs()`.
    ProductStep step(const ProductState& state, std::span<const std::int64_t> inputs) const;

private:
    std::vector<AugmentedSystem> systems_;
    std::vector<std::string> traces_;
    std::vector<ProductVar> inputs_, variables_;
    std::vector<std::size_t> state_offset_, input_offset_, output_offset_;
};

ProductSystem product(std::vector<AugmentedSystem> systems, std::vector<std::string> traces);

struct ReachResult {
    std::size_t count = 0;
    std::vector<ProductState> states;  // BFS order, when requested
};

/// BFS over all input valuations. Throws Error("state bound exceeded") when
/// more than `bound` states are found.
ReachResult reachable_states(const ProductSystem& sys, std::optional<std::size_t> bound = std::nullopt,
                             bool enumerate = false);

} // namespace rtt
