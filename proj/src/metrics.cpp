#include "nv/metrics.hpp"
#include "nv/compiler.hpp"
#include "nv/harness.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace nv::metrics {

namespace {

std::string ir_text(const mir::Function &f) {
    mir::Function g = harness::normalize_variant(f);
    g.name = "f";
    return mir::print_mir(g);
}

std::string level_hash(const mir::Function &f, int level) {
    return compiler::canonical_hash(compiler::lower_to_bytecode(compiler::optimize(f, level)));
}

/// Marks variant i unique when its key differs from the reference's and from every earlier variant's.
std::vector<bool> classify(const std::string &reference, const std::vector<std::string> &keys) {
    std::vector<bool> out;
    std::set<std::string> seen{reference};
    for (const auto &k : keys) out.push_back(seen.insert(k).second);
    return out;
}

int count(const std::vector<bool> &v) { return static_cast<int>(std::count(v.begin(), v.end(), true)); }

} // namespace

UniquenessRow static_uniqueness(const mir::Function &reference, const std::vector<mir::Function> &variants,
                                const std::vector<int> &levels) {
    UniquenessRow r;
    r.function = reference.name;
    r.total = static_cast<int>(variants.size());
    r.levels = levels;

    std::vector<std::string> texts;
    for (const auto &v : variants) texts.push_back(ir_text(v));
    r.variant_unique_ir = classify(ir_text(reference), texts);
    r.unique_ir = count(r.variant_unique_ir);

    for (int level : levels) r.reference_hashes.push_back(level_hash(reference, level));
    r.variant_hashes.resize(variants.size());
    for (std::size_t i = 0; i < variants.size(); ++i)
        for (int level : levels) r.variant_hashes[i].push_back(level_hash(variants[i], level));

    r.variant_unique_at_level.assign(variants.size(), std::vector<bool>(levels.size(), false));
    for (std::size_t l = 0; l < levels.size(); ++l) {
        std::vector<std::string> keys;
        for (const auto &h : r.variant_hashes) keys.push_back(h[l]);
        const auto u = classify(r.reference_hashes[l], keys);
        for (std::size_t i = 0; i < u.size(); ++i) r.variant_unique_at_level[i][l] = u[i];
        r.unique_at_level.push_back(count(u));
    }
    return r;
}

nlohmann::json uniqueness_to_json(const std::vector<UniquenessRow> &rows) {
    nlohmann::json fs = nlohmann::json::array();
    std::vector<int> levels = rows.empty() ? std::vector<int>{0, 1, 2, 3} : rows.front().levels;
    int total = 0, unique_ir = 0;
    std::vector<int> per_level(levels.size(), 0);
    for (const auto &r : rows) {
        nlohmann::json at = nlohmann::json::object();
        for (std::size_t l = 0; l < r.levels.size(); ++l) at["O" + std::to_string(r.levels[l])] = r.unique_at_level[l];
        nlohmann::json vs = nlohmann::json::array();
        for (std::size_t i = 0; i < r.variant_hashes.size(); ++i) {
            nlohmann::json hashes = nlohmann::json::object();
            nlohmann::json flags = nlohmann::json::object();
            for (std::size_t l = 0; l < r.levels.size(); ++l) {
                hashes["O" + std::to_string(r.levels[l])] = r.variant_hashes[i][l];
                flags["O" + std::to_string(r.levels[l])] = static_cast<bool>(r.variant_unique_at_level[i][l]);
            }
            vs.push_back({{"variant", i + 1}, {"unique_ir", static_cast<bool>(r.variant_unique_ir[i])}, {"unique", flags}, {"hashes", hashes}});
        }
        nlohmann::json ref = nlohmann::json::object();
        for (std::size_t l = 0; l < r.levels.size(); ++l) ref["O" + std::to_string(r.levels[l])] = r.reference_hashes[l];
        fs.push_back({{"function", r.function},
                      {"total", r.total},
                      {"unique_ir", r.unique_ir},
                      {"unique", at},
                      {"reference_hashes", ref},
                      {"variants", vs}});
        total += r.total;
        unique_ir += r.unique_ir;
        for (std::size_t l = 0; l < per_level.size() && l < r.unique_at_level.size(); ++l) per_level[l] += r.unique_at_level[l];
    }
    nlohmann::json tot = nlohmann::json::object();
    for (std::size_t l = 0; l < levels.size(); ++l) tot["O" + std::to_string(levels[l])] = per_level[l];
    return {{"comparison", "a variant is unique when its artifact differs from the reference and from every lower-index variant"},
            {"levels", levels},
            {"functions", fs},
            {"totals", {{"total", total}, {"unique_ir", unique_ir}, {"unique", tot}}}};
}

double jaccard(const std::set<std::string> &a, const std::set<std::string> &b) {
    if (a.empty() && b.empty()) return 1.0;
    std::size_t both = 0;
    for (const auto &x : a) both += b.count(x);
    return static_cast<double>(both) / static_cast<double>(a.size() + b.size() - both);
}

std::set<std::string> FunctionProfile::opcodes() const {
    std::set<std::string> s;
    for (const auto &[op, n] : profile)
        if (n) s.insert(op);
    return s;
}

namespace {

FunctionProfile trace_function(const mir::Function &f, const std::string &label,
                               const std::vector<std::vector<mir::Value>> &inputs, std::uint64_t fuel) {
    const exec::Vm vm(compiler::lower_to_bytecode(f));
    FunctionProfile p;
    p.label = label;
    for (const auto &in : inputs) {
        const auto r = vm.run(in, fuel, true);
        for (const auto &[op, n] : r.trace->profile()) p.profile[op] += n;
        p.total += r.trace->total();
    }
    return p;
}

} // namespace

DynamicReport dynamic_report(const mir::Function &reference, const std::vector<mir::Function> &variants,
                             const std::vector<std::string> &labels, const std::vector<std::vector<mir::Value>> &inputs,
                             std::uint64_t fuel) {
    const auto sig = mir::signature_of(reference);
    for (const auto &v : variants)
        if (mir::signature_of(v) != sig) throw ArgMismatch("variant " + v.name + " does not match " + mir::to_string(sig));
    DynamicReport r;
    r.reference = trace_function(reference, "reference", inputs, fuel);
    const auto ref_ops = r.reference.opcodes();
    for (std::size_t i = 0; i < variants.size(); ++i) {
        const std::string label = i < labels.size() ? labels[i] : "variant " + std::to_string(i + 1);
        auto p = trace_function(variants[i], label, inputs, fuel);
        p.jaccard_vs_reference = jaccard(ref_ops, p.opcodes());
        r.variants.push_back(std::move(p));
    }
    return r;
}

std::vector<DynamicReport::Row> DynamicReport::rows() const {
    std::set<std::string> all = reference.opcodes();
    for (const auto &v : variants)
        for (const auto &op : v.opcodes()) all.insert(op);
    std::vector<Row> out;
    auto emit = [&](const FunctionProfile &p) {
        for (const auto &op : all) {
            const auto it = p.profile.find(op);
            out.push_back({p.label, op, it == p.profile.end() ? 0 : it->second});
        }
    };
    emit(reference);
    for (const auto &v : variants) emit(v);
    return out;
}

std::string dynamic_csv(const DynamicReport &r) {
    std::ostringstream os;
    os << "series,opcode,count\n";
    for (const auto &row : r.rows()) os << row.series << "," << row.opcode << "," << row.count << "\n";
    return os.str();
}

nlohmann::json dynamic_to_json(const DynamicReport &r) {
    auto one = [](const FunctionProfile &p) {
        nlohmann::json prof = nlohmann::json::object();
        for (const auto &[op, n] : p.profile) prof[op] = n;
        return nlohmann::json{{"label", p.label}, {"total", p.total}, {"jaccard", p.jaccard_vs_reference}, {"profile", prof}};
    };
    nlohmann::json vs = nlohmann::json::array();
    for (const auto &v : r.variants) vs.push_back(one(v));
    return {{"reference", one(r.reference)}, {"variants", vs}};
}

} // namespace nv::metrics
