#include "nv/mir.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

namespace nv::mir {

std::string_view type_name(Type t) noexcept {
    switch (t) {
    case Type::I1: return "i1";
    case Type::I8: return "i8";
    case Type::I16: return "i16";
    case Type::I32: return "i32";
    case Type::I64: return "i64";
    }
    return "i?";
}

std::optional<Type> parse_type(std::string_view name) noexcept {
    if (name == "i1") return Type::I1;
    if (name == "i8") return Type::I8;
    if (name == "i16") return Type::I16;
    if (name == "i32") return Type::I32;
    if (name == "i64") return Type::I64;
    return std::nullopt;
}

std::int64_t Value::as_signed() const noexcept {
    const unsigned w = bit_width(type);
    if (w == 64) return static_cast<std::int64_t>(bits);
    const std::uint64_t sign = std::uint64_t{1} << (w - 1);
    return static_cast<std::int64_t>((bits ^ sign) - sign);
}

std::string to_string(const Value &v) {
    if (v.type == Type::I1) return v.bits ? "1" : "0";
    return std::to_string(v.as_signed());
}

std::string_view opcode_name(Opcode op) noexcept {
    switch (op) {
    case Opcode::Const: return "const";
    case Opcode::Add: return "add";
    case Opcode::Sub: return "sub";
    case Opcode::Mul: return "mul";
    case Opcode::SDiv: return "sdiv";
    case Opcode::UDiv: return "udiv";
    case Opcode::SRem: return "srem";
    case Opcode::URem: return "urem";
    case Opcode::And: return "and";
    case Opcode::Or: return "or";
    case Opcode::Xor: return "xor";
    case Opcode::Shl: return "shl";
    case Opcode::LShr: return "lshr";
    case Opcode::AShr: return "ashr";
    case Opcode::ICmp: return "icmp";
    case Opcode::Select: return "select";
    case Opcode::ZExt: return "zext";
    case Opcode::SExt: return "sext";
    case Opcode::Trunc: return "trunc";
    case Opcode::Intrinsic: return "intrinsic";
    }
    return "?";
}

namespace {

constexpr std::array<std::string_view, 10> kPredNames = {"eq",  "ne",  "slt", "sle", "sgt",
                                                         "sge", "ult", "ule", "ugt", "uge"};

const std::map<std::string_view, Opcode> &opcode_table() {
    static const std::map<std::string_view, Opcode> table = [] {
        std::map<std::string_view, Opcode> t;
        for (auto op : {Opcode::Const, Opcode::Add, Opcode::Sub, Opcode::Mul, Opcode::SDiv,
                        Opcode::UDiv, Opcode::SRem, Opcode::URem, Opcode::And, Opcode::Or,
                        Opcode::Xor, Opcode::Shl, Opcode::LShr, Opcode::AShr, Opcode::ICmp,
                        Opcode::Select, Opcode::ZExt, Opcode::SExt, Opcode::Trunc,
                        Opcode::Intrinsic})
            t.emplace(opcode_name(op), op);
        return t;
    }();
    return table;
}

} // namespace

std::string_view pred_name(Pred p) noexcept { return kPredNames[static_cast<std::size_t>(p)]; }

std::optional<Pred> parse_pred(std::string_view name) noexcept {
    for (std::size_t i = 0; i < kPredNames.size(); ++i)
        if (kPredNames[i] == name) return static_cast<Pred>(i);
    return std::nullopt;
}

bool is_binary(Opcode op) noexcept { return op >= Opcode::Add && op <= Opcode::AShr; }

bool is_commutative(Opcode op) noexcept {
    return op == Opcode::Add || op == Opcode::Mul || op == Opcode::And || op == Opcode::Or ||
           op == Opcode::Xor;
}

bool is_division(Opcode op) noexcept { return op >= Opcode::SDiv && op <= Opcode::URem; }

bool is_shift(Opcode op) noexcept { return op >= Opcode::Shl && op <= Opcode::AShr; }

std::string_view dialect_tag_name(DialectTag d) noexcept {
    switch (d) {
    case DialectTag::Raw: return "raw";
    case DialectTag::Cm: return "cm";
    case DialectTag::Gm: return "gm";
    }
    return "raw";
}

const BasicBlock *Function::find_block(std::string_view label) const noexcept {
    for (const auto &b : blocks)
        if (b.label == label) return &b;
    return nullptr;
}

std::size_t Function::instruction_count() const noexcept {
    std::size_t n = 0;
    for (const auto &b : blocks) n += b.insts.size() + 1;
    return n;
}

Signature signature_of(const Function &f) {
    Signature s;
    s.ret = f.ret;
    for (const auto &p : f.params) s.params.push_back(p.type);
    return s;
}

std::string to_string(const Signature &s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.params.size(); ++i) {
        if (i) out += ", ";
        out += type_name(s.params[i]);
    }
    out += ") -> ";
    out += type_name(s.ret);
    return out;
}

const std::vector<IntrinsicInfo> &registered_intrinsics() noexcept {
    // gm.divcheck yields i1 (divisor == 0); the front-end branches to a trap on it.
    static const std::vector<IntrinsicInfo> table = {{"gm.divcheck", 1, false}};
    return table;
}

const IntrinsicInfo *find_intrinsic(std::string_view name) noexcept {
    for (const auto &i : registered_intrinsics())
        if (i.name == name) return &i;
    return nullptr;
}

// ---------------------------------------------------------------------------
// Printer

namespace {

std::string render(const Operand &o) {
    if (o.is_reg()) return "%" + o.reg;
    return "const." + std::string(type_name(o.imm.type)) + " " + to_string(o.imm);
}

std::string render(const BlockTarget &t) {
    std::string out = t.label;
    if (!t.args.empty()) {
        out += "(";
        for (std::size_t i = 0; i < t.args.size(); ++i) {
            if (i) out += ", ";
            out += render(t.args[i]);
        }
        out += ")";
    }
    return out;
}

std::string render_params(const std::vector<TypedName> &params) {
    std::string out;
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (i) out += ", ";
        out += "%" + params[i].name + ": " + std::string(type_name(params[i].type));
    }
    return out;
}

} // namespace

std::string print_mir(const Function &f) {
    std::ostringstream os;
    os << "func @" << f.name << "(" << render_params(f.params) << ") -> " << type_name(f.ret);
    if (f.dialect != DialectTag::Raw) os << " [" << dialect_tag_name(f.dialect) << "]";
    os << " {\n";
    for (const auto &b : f.blocks) {
        os << b.label;
        if (!b.params.empty()) os << "(" << render_params(b.params) << ")";
        os << ":\n";
        for (const auto &i : b.insts) {
            os << "  %" << i.dest << " = " << opcode_name(i.op);
            switch (i.op) {
            case Opcode::ICmp: os << "." << pred_name(i.pred); break;
            case Opcode::ZExt:
            case Opcode::SExt:
            case Opcode::Trunc: os << "." << type_name(i.type); break;
            case Opcode::Intrinsic: os << "." << i.intrinsic; break;
            default: break;
            }
            for (std::size_t k = 0; k < i.operands.size(); ++k)
                os << (k ? ", " : " ") << render(i.operands[k]);
            os << "\n";
        }
        const auto &t = b.term;
        switch (t.kind) {
        case TermKind::Ret: os << "  ret " << render(t.operand) << "\n"; break;
        case TermKind::Trap: os << "  trap\n"; break;
        case TermKind::Br: os << "  br " << render(t.target) << "\n"; break;
        case TermKind::CondBr:
            os << "  condbr " << render(t.operand) << ", " << render(t.target) << ", "
               << render(t.else_target) << "\n";
            break;
        }
    }
    os << "}\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// Lexer / parser

namespace {

enum class Tok { Word, Reg, Global, Int, LParen, RParen, LBrace, RBrace, LBracket, RBracket,
                 Colon, Comma, Equals, Arrow, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;
    std::size_t line = 1;
    std::size_t col = 1;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        for (;;) {
            skip_space();
            Token t;
            t.line = line_;
            t.col = col_;
            if (pos_ >= src_.size()) {
                out.push_back(t);
                return out;
            }
            const char c = src_[pos_];
            if (c == '%' || c == '@') {
                advance();
                const std::size_t start = pos_;
                while (pos_ < src_.size() && (std::isalnum(uc(src_[pos_])) || src_[pos_] == '_'))
                    advance();
                if (start == pos_) fail("expected name after '" + std::string(1, c) + "'", t);
                t.kind = c == '%' ? Tok::Reg : Tok::Global;
                t.text = std::string(src_.substr(start, pos_ - start));
                if (t.kind == Tok::Global && std::isdigit(uc(t.text[0])))
                    fail("function name must not start with a digit", t);
            } else if (std::isalpha(uc(c)) || c == '_') {
                const std::size_t start = pos_;
                while (pos_ < src_.size() &&
                       (std::isalnum(uc(src_[pos_])) || src_[pos_] == '_' || src_[pos_] == '.'))
                    advance();
                t.kind = Tok::Word;
                t.text = std::string(src_.substr(start, pos_ - start));
            } else if (std::isdigit(uc(c)) ||
                       (c == '-' && pos_ + 1 < src_.size() && std::isdigit(uc(src_[pos_ + 1])))) {
                const std::size_t start = pos_;
                advance();
                while (pos_ < src_.size() && std::isdigit(uc(src_[pos_]))) advance();
                t.kind = Tok::Int;
                t.text = std::string(src_.substr(start, pos_ - start));
            } else if (c == '-' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '>') {
                advance();
                advance();
                t.kind = Tok::Arrow;
            } else {
                switch (c) {
                case '(': t.kind = Tok::LParen; break;
                case ')': t.kind = Tok::RParen; break;
                case '{': t.kind = Tok::LBrace; break;
                case '}': t.kind = Tok::RBrace; break;
                case '[': t.kind = Tok::LBracket; break;
                case ']': t.kind = Tok::RBracket; break;
                case ':': t.kind = Tok::Colon; break;
                case ',': t.kind = Tok::Comma; break;
                case '=': t.kind = Tok::Equals; break;
                default: fail(std::string("unexpected character '") + c + "'", t);
                }
                advance();
            }
            out.push_back(std::move(t));
        }
    }

private:
    static unsigned char uc(char c) { return static_cast<unsigned char>(c); }

    [[noreturn]] static void fail(const std::string &msg, const Token &at) {
        throw ParseError(msg, at.line, at.col);
    }

    void advance() {
        if (src_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    void skip_space() {
        while (pos_ < src_.size()) {
            const char c = src_[pos_];
            if (c == ';') {
                while (pos_ < src_.size() && src_[pos_] != '\n') advance();
            } else if (std::isspace(uc(c))) {
                advance();
            } else {
                break;
            }
        }
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::size_t col_ = 1;
};

bool is_terminator_word(std::string_view w) {
    return w == "ret" || w == "br" || w == "condbr" || w == "trap";
}

/// Parses an integer literal into the bit pattern of type `t`; accepts the
/// signed and unsigned ranges of the width.
std::optional<std::uint64_t> literal_bits(std::string_view text, Type t) {
    const unsigned w = bit_width(t);
    if (!text.empty() && text[0] == '-') {
        std::uint64_t mag = 0;
        auto [p, ec] = std::from_chars(text.data() + 1, text.data() + text.size(), mag);
        if (ec != std::errc{} || p != text.data() + text.size()) return std::nullopt;
        const std::uint64_t limit = std::uint64_t{1} << (w - 1); // |min|
        if (mag > limit) return std::nullopt;
        return (~mag + 1) & type_mask(t);
    }
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || p != text.data() + text.size()) return std::nullopt;
    if (v > type_mask(t)) return std::nullopt;
    return v;
}

class Parser {
public:
    explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

    Function parse_function() {
        Function f;
        expect_word("func");
        f.name = expect(Tok::Global, "function name").text;
        expect(Tok::LParen, "'('");
        if (!at(Tok::RParen)) f.params = parse_typed_names();
        expect(Tok::RParen, "')'");
        expect(Tok::Arrow, "'->'");
        f.ret = parse_type_token();
        if (at(Tok::LBracket)) {
            next();
            const Token &d = expect(Tok::Word, "dialect tag");
            if (d.text == "cm") f.dialect = DialectTag::Cm;
            else if (d.text == "gm") f.dialect = DialectTag::Gm;
            else if (d.text == "raw") f.dialect = DialectTag::Raw;
            else fail("unknown dialect tag '" + d.text + "'", d);
            expect(Tok::RBracket, "']'");
        }
        expect(Tok::LBrace, "'{'");
        std::size_t count = 0;
        while (!at(Tok::RBrace)) {
            if (at(Tok::End)) fail("unexpected end of input inside function body", peek());
            f.blocks.push_back(parse_block(count));
        }
        if (f.blocks.empty()) fail("function has no blocks", peek());
        expect(Tok::RBrace, "'}'");
        if (!at(Tok::End)) fail("trailing input after function", peek());
        return f;
    }

private:
    const Token &peek() const { return toks_[pos_]; }
    bool at(Tok k) const { return toks_[pos_].kind == k; }
    const Token &next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }

    [[noreturn]] static void fail(const std::string &msg, const Token &at) {
        throw ParseError(msg, at.line, at.col);
    }

    const Token &expect(Tok k, std::string_view what) {
        if (!at(k)) fail("expected " + std::string(what), peek());
        return next();
    }

    void expect_word(std::string_view w) {
        if (!at(Tok::Word) || peek().text != w) fail("expected '" + std::string(w) + "'", peek());
        next();
    }

    Type parse_type_token() {
        const Token &t = expect(Tok::Word, "type");
        auto ty = parse_type(t.text);
        if (!ty) fail("unknown type '" + t.text + "'", t);
        return *ty;
    }

    std::vector<TypedName> parse_typed_names() {
        std::vector<TypedName> out;
        for (;;) {
            TypedName p;
            p.name = expect(Tok::Reg, "register").text;
            expect(Tok::Colon, "':'");
            p.type = parse_type_token();
            out.push_back(std::move(p));
            if (!at(Tok::Comma)) break;
            next();
        }
        return out;
    }

    Operand parse_operand() {
        if (at(Tok::Reg)) return Operand::make_reg(next().text);
        if (at(Tok::Word) && peek().text.rfind("const.", 0) == 0) {
            const Token &w = next();
            auto ty = parse_type(std::string_view(w.text).substr(6));
            if (!ty) fail("unknown immediate type in '" + w.text + "'", w);
            const Token &lit = expect(Tok::Int, "integer literal");
            auto bits = literal_bits(lit.text, *ty);
            if (!bits) fail("literal " + lit.text + " out of range for " + std::string(type_name(*ty)), lit);
            return Operand::make_imm(Value::of(*ty, *bits));
        }
        fail("expected operand", peek());
    }

    BlockTarget parse_target() {
        BlockTarget t;
        const Token &l = expect(Tok::Word, "block label");
        if (is_terminator_word(l.text)) fail("expected block label", l);
        t.label = l.text;
        if (at(Tok::LParen)) {
            next();
            if (!at(Tok::RParen)) {
                for (;;) {
                    t.args.push_back(parse_operand());
                    if (!at(Tok::Comma)) break;
                    next();
                }
            }
            expect(Tok::RParen, "')'");
        }
        return t;
    }

    BasicBlock parse_block(std::size_t &count) {
        BasicBlock b;
        const Token &l = expect(Tok::Word, "block label");
        if (is_terminator_word(l.text)) fail("expected block label", l);
        b.label = l.text;
        if (at(Tok::LParen)) {
            next();
            if (!at(Tok::RParen)) b.params = parse_typed_names();
            expect(Tok::RParen, "')'");
        }
        expect(Tok::Colon, "':' after block label");
        for (;;) {
            if (++count > kMaxInstructions)
                fail("function exceeds " + std::to_string(kMaxInstructions) + " instructions", peek());
            if (at(Tok::Reg)) {
                b.insts.push_back(parse_instruction());
                continue;
            }
            if (at(Tok::Word) && is_terminator_word(peek().text)) {
                b.term = parse_terminator();
                return b;
            }
            fail("block '" + b.label + "' must end with a terminator", peek());
        }
    }

    Terminator parse_terminator() {
        const Token &w = next();
        Terminator t;
        if (w.text == "ret") {
            t.kind = TermKind::Ret;
            t.operand = parse_operand();
        } else if (w.text == "trap") {
            t.kind = TermKind::Trap;
        } else if (w.text == "br") {
            t.kind = TermKind::Br;
            t.target = parse_target();
        } else {
            t.kind = TermKind::CondBr;
            t.operand = parse_operand();
            expect(Tok::Comma, "','");
            t.target = parse_target();
            expect(Tok::Comma, "','");
            t.else_target = parse_target();
        }
        return t;
    }

    Instruction parse_instruction() {
        Instruction inst;
        inst.dest = next().text;
        expect(Tok::Equals, "'='");
        const Token &opw = expect(Tok::Word, "opcode");
        const std::string_view word = opw.text;
        const auto dot = word.find('.');
        const std::string_view base = word.substr(0, dot);
        const std::string_view suffix = dot == std::string_view::npos ? std::string_view{} : word.substr(dot + 1);
        const auto it = opcode_table().find(base);
        if (it == opcode_table().end()) fail("unknown opcode '" + std::string(word) + "'", opw);
        inst.op = it->second;

        std::size_t arity = 2;
        switch (inst.op) {
        case Opcode::Const:
            arity = 1;
            break;
        case Opcode::ICmp: {
            auto p = parse_pred(suffix);
            if (!p) fail("icmp needs a predicate suffix, got '" + std::string(word) + "'", opw);
            inst.pred = *p;
            inst.type = Type::I1;
            break;
        }
        case Opcode::Select:
            arity = 3;
            break;
        case Opcode::ZExt:
        case Opcode::SExt:
        case Opcode::Trunc: {
            auto ty = parse_type(suffix);
            if (!ty) fail(std::string(base) + " needs a target type suffix", opw);
            inst.type = *ty;
            arity = 1;
            break;
        }
        case Opcode::Intrinsic: {
            if (suffix.empty()) fail("intrinsic needs a name suffix", opw);
            inst.intrinsic = std::string(suffix);
            inst.type = Type::I1;
            const IntrinsicInfo *info = find_intrinsic(suffix);
            arity = info ? info->arity : 0;
            break;
        }
        default:
            break;
        }
        if (inst.op != Opcode::ICmp && inst.op != Opcode::ZExt && inst.op != Opcode::SExt &&
            inst.op != Opcode::Trunc && inst.op != Opcode::Intrinsic && !suffix.empty())
            fail("unexpected suffix on '" + std::string(base) + "'", opw);

        inst.operands.push_back(parse_operand());
        while (at(Tok::Comma)) {
            next();
            inst.operands.push_back(parse_operand());
        }
        if (arity != 0 && inst.operands.size() != arity)
            fail(std::string(base) + " requires " + std::to_string(arity) + " operand" +
                     (arity == 1 ? "" : "s") + ", got " + std::to_string(inst.operands.size()),
                 opw);
        if (inst.op == Opcode::Const) {
            if (!inst.operands[0].is_imm()) fail("const requires an immediate operand", opw);
            inst.type = inst.operands[0].imm.type;
        }
        return inst;
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

/// Fills in result types that depend on operand types (binary ops, select).
void infer_result_types(Function &f) {
    std::unordered_map<std::string, Type> types;
    for (const auto &p : f.params) types.emplace(p.name, p.type);
    for (const auto &b : f.blocks)
        for (const auto &p : b.params) types.emplace(p.name, p.type);
    auto type_of = [&](const Operand &o) -> std::optional<Type> {
        if (o.is_imm()) return o.imm.type;
        auto it = types.find(o.reg);
        if (it == types.end()) return std::nullopt;
        return it->second;
    };
    // Fixed types first, then propagate until stable.
    for (const auto &b : f.blocks)
        for (const auto &i : b.insts)
            if (!is_binary(i.op) && i.op != Opcode::Select) types.emplace(i.dest, i.type);
    for (std::size_t round = 0; round <= f.blocks.size() + 1; ++round) {
        bool changed = false;
        for (auto &b : f.blocks) {
            for (auto &i : b.insts) {
                if (!is_binary(i.op) && i.op != Opcode::Select) continue;
                const Operand &src = i.op == Opcode::Select ? i.operands[1] : i.operands[0];
                auto t = type_of(src);
                if (!t && i.op == Opcode::Select) t = type_of(i.operands[2]);
                if (!t && is_binary(i.op)) t = type_of(i.operands[1]);
                if (!t) continue;
                auto [it, inserted] = types.emplace(i.dest, *t);
                if (inserted || it->second != i.type) changed = true;
                i.type = *t;
                it->second = *t;
            }
        }
        if (!changed) break;
    }
}

} // namespace

Function parse_mir(std::string_view text) {
    Parser parser(Lexer(text).run());
    Function f = parser.parse_function();
    infer_result_types(f);
    require_valid(f);
    return f;
}

// ---------------------------------------------------------------------------
// Validation

std::vector<std::size_t> reverse_post_order(const Function &f) {
    std::unordered_map<std::string_view, std::size_t> index;
    for (std::size_t i = 0; i < f.blocks.size(); ++i) index.emplace(f.blocks[i].label, i);
    std::vector<std::size_t> post;
    if (f.blocks.empty()) return post;
    std::vector<char> seen(f.blocks.size(), 0);
    // Iterative DFS; successors visited in (true, false) order.
    std::vector<std::pair<std::size_t, int>> stack{{0, 0}};
    seen[0] = 1;
    while (!stack.empty()) {
        auto &[b, state] = stack.back();
        const Terminator &t = f.blocks[b].term;
        std::vector<std::string_view> succ;
        if (t.kind == TermKind::Br) succ = {t.target.label};
        if (t.kind == TermKind::CondBr) succ = {t.target.label, t.else_target.label};
        if (state < static_cast<int>(succ.size())) {
            const auto s = succ[static_cast<std::size_t>(state++)];
            auto it = index.find(s);
            if (it != index.end() && !seen[it->second]) {
                seen[it->second] = 1;
                stack.emplace_back(it->second, 0);
            }
        } else {
            post.push_back(b);
            stack.pop_back();
        }
    }
    std::reverse(post.begin(), post.end());
    return post;
}

namespace {

struct DefSite {
    std::size_t block;
    long position; // -1 for block/function params
    Type type;
};

class Validator {
public:
    explicit Validator(const Function &f) : f_(f) {}

    std::vector<Diagnostic> run() {
        if (f_.blocks.empty()) {
            diag("function has no blocks", "");
            return diags_;
        }
        if (f_.instruction_count() > kMaxInstructions)
            diag("function exceeds " + std::to_string(kMaxInstructions) + " instructions", "");
        collect_labels();
        collect_definitions();
        compute_dominators();
        for (std::size_t b = 0; b < f_.blocks.size(); ++b) check_block(b);
        return diags_;
    }

private:
    void diag(std::string msg, const std::string &block) {
        diags_.push_back({std::move(msg), block});
    }

    void collect_labels() {
        for (std::size_t i = 0; i < f_.blocks.size(); ++i) {
            if (!labels_.emplace(f_.blocks[i].label, i).second)
                diag("duplicate label '" + f_.blocks[i].label + "'", f_.blocks[i].label);
        }
        if (!f_.blocks[0].params.empty()) diag("entry block cannot take parameters", f_.blocks[0].label);
    }

    void define(const std::string &name, DefSite site, const std::string &block) {
        if (!defs_.emplace(name, site).second) diag("register %" + name + " assigned more than once", block);
    }

    void collect_definitions() {
        for (const auto &p : f_.params) define(p.name, {0, -2, p.type}, f_.blocks[0].label);
        for (std::size_t b = 0; b < f_.blocks.size(); ++b) {
            const auto &blk = f_.blocks[b];
            for (const auto &p : blk.params) define(p.name, {b, -1, p.type}, blk.label);
            for (std::size_t i = 0; i < blk.insts.size(); ++i) {
                if (blk.insts[i].dest.empty()) {
                    diag("instruction without destination", blk.label);
                    continue;
                }
                define(blk.insts[i].dest, {b, static_cast<long>(i), blk.insts[i].type}, blk.label);
            }
        }
    }

    void compute_dominators() {
        rpo_ = reverse_post_order(f_);
        rpo_index_.assign(f_.blocks.size(), -1);
        for (std::size_t i = 0; i < rpo_.size(); ++i) rpo_index_[rpo_[i]] = static_cast<long>(i);

        std::vector<std::vector<std::size_t>> preds(f_.blocks.size());
        for (std::size_t b : rpo_) {
            for (const auto *t : successors(f_.blocks[b].term)) {
                auto it = labels_.find(t->label);
                if (it != labels_.end()) preds[it->second].push_back(b);
            }
        }
        idom_.assign(f_.blocks.size(), -1);
        idom_[0] = 0;
        auto intersect = [&](long a, long b) {
            while (a != b) {
                while (rpo_index_[static_cast<std::size_t>(a)] > rpo_index_[static_cast<std::size_t>(b)])
                    a = idom_[static_cast<std::size_t>(a)];
                while (rpo_index_[static_cast<std::size_t>(b)] > rpo_index_[static_cast<std::size_t>(a)])
                    b = idom_[static_cast<std::size_t>(b)];
            }
            return a;
        };
        for (bool changed = true; changed;) {
            changed = false;
            for (std::size_t i = 1; i < rpo_.size(); ++i) {
                const std::size_t b = rpo_[i];
                long new_idom = -1;
                for (std::size_t p : preds[b]) {
                    if (idom_[p] < 0) continue;
                    new_idom = new_idom < 0 ? static_cast<long>(p) : intersect(static_cast<long>(p), new_idom);
                }
                if (new_idom >= 0 && idom_[b] != new_idom) {
                    idom_[b] = new_idom;
                    changed = true;
                }
            }
        }
    }

    static std::vector<const BlockTarget *> successors(const Terminator &t) {
        if (t.kind == TermKind::Br) return {&t.target};
        if (t.kind == TermKind::CondBr) return {&t.target, &t.else_target};
        return {};
    }

    bool dominates(std::size_t a, std::size_t b) const {
        if (rpo_index_[b] < 0) return false;
        for (std::size_t cur = b;;) {
            if (cur == a) return true;
            if (cur == 0) return false;
            cur = static_cast<std::size_t>(idom_[cur]);
        }
    }

    /// Returns the operand's type, or nullopt after reporting a diagnostic.
    std::optional<Type> use(const Operand &o, std::size_t block, long position) {
        if (o.is_imm()) return o.imm.type;
        const std::string &label = f_.blocks[block].label;
        auto it = defs_.find(o.reg);
        if (it == defs_.end()) {
            diag("use of undefined register %" + o.reg, label);
            return std::nullopt;
        }
        const DefSite &d = it->second;
        if (rpo_index_[block] >= 0) {
            const bool ok = d.position == -2 || (d.block == block && d.position < position) ||
                            (d.block != block && dominates(d.block, block));
            if (!ok) diag("use before def: %" + o.reg, label);
        }
        return d.type;
    }

    void expect_type(std::optional<Type> got, Type want, const std::string &what, const std::string &label) {
        if (got && *got != want)
            diag(what + ": expected " + std::string(type_name(want)) + ", got " + std::string(type_name(*got)), label);
    }

    void check_block(std::size_t b) {
        const auto &blk = f_.blocks[b];
        const std::string &label = blk.label;
        for (std::size_t i = 0; i < blk.insts.size(); ++i) {
            const auto &inst = blk.insts[i];
            const long pos = static_cast<long>(i);
            const std::string where = "%" + inst.dest + " = " + std::string(opcode_name(inst.op));
            std::vector<std::optional<Type>> ts;
            for (const auto &o : inst.operands) ts.push_back(use(o, b, pos));
            auto need = [&](std::size_t n) {
                if (inst.operands.size() != n) {
                    diag(where + " requires " + std::to_string(n) + " operands", label);
                    return false;
                }
                return true;
            };
            switch (inst.op) {
            case Opcode::Const:
                if (need(1)) {
                    if (!inst.operands[0].is_imm()) diag(where + " requires an immediate", label);
                    expect_type(ts[0], inst.type, where, label);
                }
                break;
            case Opcode::ICmp:
                if (need(2)) {
                    if (ts[0] && ts[1] && *ts[0] != *ts[1]) diag(where + ": operand types differ", label);
                    if (inst.type != Type::I1) diag(where + " must yield i1", label);
                }
                break;
            case Opcode::Select:
                if (need(3)) {
                    expect_type(ts[0], Type::I1, where + " condition", label);
                    expect_type(ts[1], inst.type, where, label);
                    expect_type(ts[2], inst.type, where, label);
                }
                break;
            case Opcode::ZExt:
            case Opcode::SExt:
                if (need(1) && ts[0] && bit_width(*ts[0]) >= bit_width(inst.type))
                    diag(where + " must widen strictly", label);
                break;
            case Opcode::Trunc:
                if (need(1) && ts[0] && bit_width(*ts[0]) <= bit_width(inst.type))
                    diag(where + " must narrow strictly", label);
                break;
            case Opcode::Intrinsic: {
                const IntrinsicInfo *info = find_intrinsic(inst.intrinsic);
                if (!info) {
                    diag("unregistered intrinsic '" + inst.intrinsic + "'", label);
                    break;
                }
                need(info->arity);
                if (inst.type != Type::I1) diag(where + " must yield i1", label);
                break;
            }
            default: // binary
                if (need(2)) {
                    expect_type(ts[0], inst.type, where, label);
                    expect_type(ts[1], inst.type, where, label);
                }
                break;
            }
        }

        const long tpos = static_cast<long>(blk.insts.size());
        const auto &t = blk.term;
        switch (t.kind) {
        case TermKind::Ret:
            expect_type(use(t.operand, b, tpos), f_.ret, "ret", label);
            break;
        case TermKind::Trap:
            break;
        case TermKind::CondBr:
            expect_type(use(t.operand, b, tpos), Type::I1, "condbr condition", label);
            check_target(t.else_target, b, tpos);
            [[fallthrough]];
        case TermKind::Br:
            check_target(t.target, b, tpos);
            break;
        }
    }

    void check_target(const BlockTarget &t, std::size_t b, long tpos) {
        const std::string &label = f_.blocks[b].label;
        std::vector<std::optional<Type>> ts;
        for (const auto &a : t.args) ts.push_back(use(a, b, tpos));
        auto it = labels_.find(t.label);
        if (it == labels_.end()) {
            diag("unknown label '" + t.label + "'", label);
            return;
        }
        if (it->second == 0) {
            diag("branch to entry block '" + t.label + "'", label);
            return;
        }
        const auto &params = f_.blocks[it->second].params;
        if (params.size() != t.args.size()) {
            diag("branch to '" + t.label + "' passes " + std::to_string(t.args.size()) +
                     " arguments, block takes " + std::to_string(params.size()),
                 label);
            return;
        }
        for (std::size_t i = 0; i < params.size(); ++i)
            expect_type(ts[i], params[i].type, "argument " + std::to_string(i) + " to '" + t.label + "'", label);
    }

    const Function &f_;
    std::vector<Diagnostic> diags_;
    std::unordered_map<std::string, std::size_t> labels_;
    std::unordered_map<std::string, DefSite> defs_;
    std::vector<std::size_t> rpo_;
    std::vector<long> rpo_index_;
    std::vector<long> idom_;
};

} // namespace

std::vector<Diagnostic> validate_function(const Function &f) { return Validator(f).run(); }

void require_valid(const Function &f) {
    auto diags = validate_function(f);
    if (!diags.empty()) throw ValidationError(std::move(diags));
}

} // namespace nv::mir
