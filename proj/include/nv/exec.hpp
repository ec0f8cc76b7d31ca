#pragma once

// Two independent execution engines: a MIR evaluator (reference semantics)
// and a bytecode VM with opcode tracing. Both bound execution with fuel.

#include "nv/bytecode.hpp"
#include "nv/mir.hpp"
#include "nv/semantics.hpp"

#include "json.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nv::exec {

inline constexpr std::uint64_t kDefaultFuel = 1'000'000;

struct Outcome {
    enum class Kind : std::uint8_t { Return, Trap };

    Kind kind = Kind::Trap;
    mir::Value value;
    TrapReason reason = TrapReason::ExplicitTrap;

    static Outcome returned(mir::Value v) { return {Kind::Return, v, TrapReason::ExplicitTrap}; }
    static Outcome trapped(TrapReason r) { return {Kind::Trap, {}, r}; }

    bool is_return() const noexcept { return kind == Kind::Return; }
    bool is_trap() const noexcept { return kind == Kind::Trap; }

    bool operator==(const Outcome &o) const noexcept {
        return kind == o.kind && (is_return() ? value == o.value : reason == o.reason);
    }
};

/// The equivalence relation on outcomes: equal returns, or any two traps.
bool outcomes_agree(const Outcome &a, const Outcome &b) noexcept;

std::string to_string(const Outcome &o);

using TraceProfile = std::map<std::string, std::uint64_t>;

struct Trace {
    std::vector<std::string> ops;

    TraceProfile profile() const;
    std::uint64_t total() const noexcept { return ops.size(); }
};

/// Checks arity and widths of `args` against `params`; throws ArgMismatch.
void check_args(std::span<const mir::Type> params, std::span<const mir::Value> args);

/// A function prepared for repeated evaluation (register names resolved to slots).
class MirEvaluator {
public:
    explicit MirEvaluator(const mir::Function &f);
    MirEvaluator(const MirEvaluator &);
    MirEvaluator(MirEvaluator &&) noexcept;
    MirEvaluator &operator=(const MirEvaluator &);
    MirEvaluator &operator=(MirEvaluator &&) noexcept;
    ~MirEvaluator();

    Outcome run(std::span<const mir::Value> args, std::uint64_t fuel = kDefaultFuel,
                std::uint64_t *steps = nullptr) const;

    /// Unchecked fast path: `args` are bit patterns already masked to the parameter widths.
    Outcome run_bits(std::span<const std::uint64_t> args, std::uint64_t fuel,
                     std::uint64_t *steps = nullptr) const;

    const std::vector<mir::Type> &param_types() const noexcept { return params_; }
    mir::Type return_type() const noexcept { return ret_; }

    struct Inst;
    struct Move;
    struct Block;

private:
    std::vector<mir::Type> params_;
    mir::Type ret_;
    std::vector<std::uint64_t> image_; // initial slot contents (constants)
    std::vector<Inst> insts_;
    std::vector<Move> moves_;
    std::vector<Block> blocks_;
};

Outcome eval_mir(const mir::Function &f, std::span<const mir::Value> args,
                 std::uint64_t fuel = kDefaultFuel);

struct RunResult {
    Outcome outcome;
    std::optional<Trace> trace;
    std::uint64_t steps = 0;
};

/// A verified bytecode unit ready for repeated execution.
class Vm {
public:
    explicit Vm(bc::Unit unit);

    RunResult run(std::span<const mir::Value> args, std::uint64_t fuel = kDefaultFuel,
                  bool trace = false) const;
    RunResult run_bits(std::span<const std::uint64_t> args, std::uint64_t fuel, bool trace) const;

    const bc::Unit &unit() const noexcept { return unit_; }

private:
    bc::Unit unit_;
    std::vector<std::string> names_;
};

RunResult run_bytecode(const bc::Unit &u, std::span<const mir::Value> args,
                       std::uint64_t fuel = kDefaultFuel, bool trace = false);

nlohmann::json outcome_to_json(const Outcome &o);
Outcome outcome_from_json(const nlohmann::json &j, mir::Type ret);

/// {"function", "args", "outcome", "profile", "total"}
nlohmann::json trace_to_json(const std::string &function, std::span<const mir::Value> args,
                             const Outcome &outcome, const Trace &trace);

} // namespace nv::exec
