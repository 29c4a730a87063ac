#include "mad/ir/render.hpp"

#include "mad/ir/parser.hpp"

#include <fmt/format.h>

namespace mad::ir {

namespace {

std::string render_type(const MoveType& t, const std::vector<std::string>& tparam_names)
{
    using K = MoveType::Kind;
    switch (t.kind) {
    case K::TypeParameter:
        return t.param_index < tparam_names.size() ? tparam_names[t.param_index] : "T" + std::to_string(t.param_index);
    case K::Vector: return "vector<" + render_type(t.args.at(0), tparam_names) + ">";
    case K::Reference: return "&" + render_type(t.args.at(0), tparam_names);
    case K::MutableReference: return "&mut " + render_type(t.args.at(0), tparam_names);
    case K::Datatype: {
        std::string out = t.address.short_form() + "::" + t.module + "::" + t.name;
        if (!t.args.empty()) {
            out += "<";
            for (std::size_t i = 0; i < t.args.size(); ++i) {
                if (i)
                    out += ", ";
                out += render_type(t.args[i], tparam_names);
            }
            out += ">";
        }
        return out;
    }
    default: return to_string(t);
    }
}

std::string visibility_prefix(const FunctionSig& sig)
{
    std::string out;
    if (sig.visibility == Visibility::Public)
        out = "public ";
    else if (sig.visibility == Visibility::Friend)
        out = "public(package) ";
    if (sig.is_entry)
        out += "entry ";
    return out;
}

void render_struct(std::string& out, const StructIR& s)
{
    std::vector<std::string> names;
    out += "    struct " + s.name;
    if (!s.type_params.empty()) {
        out += "<";
        for (std::size_t i = 0; i < s.type_params.size(); ++i) {
            const auto& tp = s.type_params[i];
            if (i)
                out += ", ";
            if (tp.is_phantom)
                out += "phantom ";
            out += tp.name;
            if (!tp.constraints.empty())
                out += ": " + tp.constraints.join(" + ");
            names.push_back(tp.name);
        }
        out += ">";
    }
    if (!s.abilities.empty())
        out += " has " + s.abilities.join(", ");
    out += " {\n";
    for (const auto& f : s.fields)
        out += "        " + f.name + ": " + render_type(f.type, names) + ",\n";
    out += "    }\n";
}

} // namespace

std::string render_signature(const FunctionSig& sig)
{
    std::vector<std::string> names;
    std::string out = visibility_prefix(sig) + "fun " + sig.name;
    if (!sig.type_params.empty()) {
        out += "<";
        for (std::size_t i = 0; i < sig.type_params.size(); ++i) {
            if (i)
                out += ", ";
            names.push_back("T" + std::to_string(i));
            out += names.back();
            if (!sig.type_params[i].empty())
                out += ": " + sig.type_params[i].join(" + ");
        }
        out += ">";
    }
    out += "(";
    for (std::size_t i = 0; i < sig.params.size(); ++i) {
        if (i)
            out += ", ";
        out += sig.params[i].name.value_or("Arg" + std::to_string(i)) + ": " + render_type(sig.params[i].type, names);
    }
    out += ")";
    if (sig.returns.size() == 1) {
        out += ": " + render_type(sig.returns[0], names);
    } else if (sig.returns.size() > 1) {
        out += ": (";
        for (std::size_t i = 0; i < sig.returns.size(); ++i) {
            if (i)
                out += ", ";
            out += render_type(sig.returns[i], names);
        }
        out += ")";
    }
    return out;
}

std::string render_interface(const ModuleIR& module)
{
    std::string out;
    for (const auto& s : module.structs)
        render_struct(out, s);
    for (const auto& f : module.functions)
        out += "    " + render_signature(f) + ";\n";
    return out;
}

std::string render_stub_module(const ModuleIR& module)
{
    std::string out = fmt::format("module {}::{} {{\n", module.address.short_form(), module.name);
    for (const auto& d : module.dependencies)
        out += fmt::format("    use {}::{};\n", d.address.short_form(), d.name);
    for (std::size_t i = 0; i < module.constants.size(); ++i) {
        const auto& k = module.constants[i];
        out += fmt::format("    const C{}: {} = {};\n", i, to_string(k.type), render_constant(k.type, k.bytes));
    }
    out += render_interface(module);
    out += "}\n";
    return out;
}

std::string fingerprint(const FunctionSig& sig)
{
    std::string out = std::string(to_string(sig.visibility)) + (sig.is_entry ? " entry" : "") + " fun " + sig.name + "<";
    for (std::size_t i = 0; i < sig.type_params.size(); ++i) {
        if (i)
            out += ",";
        out += "{" + sig.type_params[i].join(",") + "}";
    }
    out += ">(";
    for (std::size_t i = 0; i < sig.params.size(); ++i) {
        if (i)
            out += ",";
        out += to_string(sig.params[i].type);
    }
    out += "):(";
    for (std::size_t i = 0; i < sig.returns.size(); ++i) {
        if (i)
            out += ",";
        out += to_string(sig.returns[i]);
    }
    return out + ")";
}

} // namespace mad::ir
