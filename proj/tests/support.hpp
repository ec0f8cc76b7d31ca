#pragma once

// Shared fixtures and generators for the unit tests.

#include "nv/frontend.hpp"
#include "nv/mir.hpp"
#include "nv/project.hpp"

#include <unistd.h>

#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace nvtest {

namespace fs = std::filesystem;

inline fs::path fixtures() { return NV_FIXTURE_DIR; }

inline const std::vector<std::string> &corpus_names() {
    static const std::vector<std::string> names{"b64char", "clampabs", "ctz8", "divmix", "nz", "parity8", "rotl3", "sign16"};
    return names;
}

inline fs::path corpus_dir(const std::string &name) { return fixtures() / "corpus" / name; }

inline std::string corpus_source(const std::string &name, nv::frontend::Dialect d) {
    return nv::project::read_file(corpus_dir(name) / (name + std::string(nv::frontend::file_extension(d))));
}

inline nv::mir::Function corpus_function(const std::string &name, nv::frontend::Dialect d = nv::frontend::Dialect::Cm) {
    return nv::frontend::compile_source(corpus_source(name, d), d);
}

inline nv::mir::Function mir(std::string_view text) {
    auto f = nv::mir::parse_mir(text);
    nv::mir::require_valid(f);
    return f;
}

/// Every input whose parameters range over -128..127, sign-extended to each parameter's width.
inline std::vector<std::vector<nv::mir::Value>> i8_sweep(const std::vector<nv::mir::Type> &params) {
    std::vector<std::vector<nv::mir::Value>> out{{}};
    for (auto t : params) {
        std::vector<std::vector<nv::mir::Value>> next;
        const int lo = t == nv::mir::Type::I1 ? 0 : -128;
        const int hi = t == nv::mir::Type::I1 ? 1 : 127;
        for (const auto &prefix : out)
            for (int v = lo; v <= hi; ++v) {
                auto row = prefix;
                row.push_back(nv::mir::Value::of_signed(t, v));
                next.push_back(std::move(row));
            }
        out = std::move(next);
    }
    return out;
}

inline std::vector<nv::mir::Type> param_types(const nv::mir::Function &f) {
    std::vector<nv::mir::Type> out;
    for (const auto &p : f.params) out.push_back(p.type);
    return out;
}

/// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string &tag) {
        static int counter = 0;
        path_ = fs::temp_directory_path() / ("nvtest-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir &) = delete;
    TempDir &operator=(const TempDir &) = delete;

    const fs::path &path() const { return path_; }

private:
    fs::path path_;
};

/// Random valid MIR: straight-line arithmetic over the parameters, optionally
/// split by a diamond whose arms pass values to a join block parameter.
class MirGen {
public:
    explicit MirGen(std::uint64_t seed) : rng_(seed) {}

    nv::mir::Function next() {
        using namespace nv::mir;
        static const Type widths[] = {Type::I8, Type::I16, Type::I32};
        t_ = widths[pick(3)];
        Function f;
        f.name = "g" + std::to_string(serial_++);
        f.ret = t_;
        const int arity = 1 + static_cast<int>(pick(2));
        regs_.clear();
        next_reg_ = 0;
        for (int i = 0; i < arity; ++i) {
            f.params.push_back({"p" + std::to_string(i), t_});
            regs_.push_back("p" + std::to_string(i));
        }
        BasicBlock entry{"entry", {}, {}, {}};
        straight(entry, 1 + pick(5));
        if (pick(2) == 0) {
            entry.term = {TermKind::Ret, operand(), {}, {}};
            f.blocks.push_back(std::move(entry));
            return f;
        }
        // diamond: entry -> {left, right} -> join(%j)
        Instruction cmp;
        cmp.dest = fresh();
        cmp.op = Opcode::ICmp;
        cmp.type = Type::I1;
        cmp.pred = static_cast<Pred>(pick(10));
        cmp.operands = {operand(), operand()};
        entry.insts.push_back(cmp);
        entry.term = {TermKind::CondBr, Operand::make_reg(cmp.dest), {"left", {}}, {"right", {}}};
        const auto saved = regs_;
        BasicBlock left{"left", {}, {}, {}};
        straight(left, pick(3));
        left.term = {TermKind::Br, {}, {"join", {operand()}}, {}};
        regs_ = saved;
        BasicBlock right{"right", {}, {}, {}};
        straight(right, pick(3));
        right.term = {TermKind::Br, {}, {"join", {operand()}}, {}};
        regs_ = saved;
        BasicBlock join{"join", {{"j", t_}}, {}, {}};
        regs_.push_back("j");
        straight(join, pick(3));
        join.term = {TermKind::Ret, operand(), {}, {}};
        f.blocks = {std::move(entry), std::move(left), std::move(right), std::move(join)};
        return f;
    }

private:
    std::uint64_t pick(std::uint64_t n) { return rng_() % n; }

    std::string fresh() { return "r" + std::to_string(next_reg_++); }

    nv::mir::Operand operand() {
        using namespace nv::mir;
        if (pick(4) == 0) {
            static const std::int64_t interesting[] = {0, 1, -1, 2, 3, 7, -8, 127};
            return Operand::make_imm(Value::of_signed(t_, interesting[pick(8)]));
        }
        return Operand::make_reg(regs_[pick(regs_.size())]);
    }

    void straight(nv::mir::BasicBlock &b, std::uint64_t count) {
        using namespace nv::mir;
        static const Opcode ops[] = {Opcode::Add, Opcode::Sub, Opcode::Mul, Opcode::And, Opcode::Or,
                                     Opcode::Xor, Opcode::Shl, Opcode::LShr, Opcode::AShr, Opcode::SDiv,
                                     Opcode::UDiv, Opcode::SRem, Opcode::URem, Opcode::Select};
        for (std::uint64_t i = 0; i < count; ++i) {
            Instruction in;
            in.dest = fresh();
            in.type = t_;
            in.op = ops[pick(std::size(ops))];
            if (in.op == Opcode::Select) {
                Instruction c;
                c.dest = fresh();
                c.op = Opcode::ICmp;
                c.type = Type::I1;
                c.pred = static_cast<Pred>(pick(10));
                c.operands = {operand(), operand()};
                b.insts.push_back(c);
                in.operands = {Operand::make_reg(c.dest), operand(), operand()};
            } else {
                in.operands = {operand(), operand()};
            }
            b.insts.push_back(in);
            regs_.push_back(in.dest);
        }
    }

    std::mt19937_64 rng_;
    nv::mir::Type t_ = nv::mir::Type::I8;
    std::vector<std::string> regs_;
    int next_reg_ = 0;
    int serial_ = 0;
};

} // namespace nvtest
