#include "mad/ir/types.hpp"

#include "mad/error.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace mad::ir {

namespace {
constexpr std::string_view kAbilityNames[] = {"copy", "drop", "store", "key"};
constexpr AbilitySet::Ability kAbilities[] = {AbilitySet::Copy, AbilitySet::Drop, AbilitySet::Store, AbilitySet::Key};
} // namespace

bool AbilitySet::add_named(std::string_view name)
{
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    for (std::size_t i = 0; i < 4; ++i)
        if (lower == kAbilityNames[i]) {
            add(kAbilities[i]);
            return true;
        }
    return false;
}

std::vector<std::string_view> AbilitySet::names() const
{
    std::vector<std::string_view> out;
    for (std::size_t i = 0; i < 4; ++i)
        if (has(kAbilities[i]))
            out.push_back(kAbilityNames[i]);
    return out;
}

std::string AbilitySet::join(std::string_view separator) const
{
    std::string out;
    for (auto n : names()) {
        if (!out.empty())
            out += separator;
        out += n;
    }
    return out;
}

bool Address::valid_literal(std::string_view text)
{
    if (text.starts_with("0x") || text.starts_with("0X"))
        text.remove_prefix(2);
    if (text.empty() || text.size() > 64)
        return false;
    return std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isxdigit(c) != 0; });
}

Address Address::parse(std::string_view text)
{
    if (!valid_literal(text))
        throw Error(ErrorKind::SyntaxError, std::string(text), "invalid address literal");
    if (text.starts_with("0x") || text.starts_with("0X"))
        text.remove_prefix(2);
    Address a;
    std::string hex(text);
    std::transform(hex.begin(), hex.end(), hex.begin(), [](unsigned char c) { return std::tolower(c); });
    a.hex_ = std::string(64 - hex.size(), '0') + hex;
    return a;
}

std::string Address::short_form() const
{
    const auto first = hex_.find_first_not_of('0');
    return "0x" + (first == std::string::npos ? std::string("0") : hex_.substr(first));
}

MoveType MoveType::primitive(Kind k)
{
    MoveType t;
    t.kind = k;
    return t;
}

MoveType MoveType::vector_of(MoveType elem)
{
    MoveType t;
    t.kind = Kind::Vector;
    t.args.push_back(std::move(elem));
    return t;
}

MoveType MoveType::reference(MoveType inner, bool mutable_ref)
{
    MoveType t;
    t.kind = mutable_ref ? Kind::MutableReference : Kind::Reference;
    t.args.push_back(std::move(inner));
    return t;
}

MoveType MoveType::datatype(ir::Address addr, std::string module, std::string name, std::vector<MoveType> type_args)
{
    MoveType t;
    t.kind = Kind::Datatype;
    t.address = std::move(addr);
    t.module = std::move(module);
    t.name = std::move(name);
    t.args = std::move(type_args);
    return t;
}

MoveType MoveType::type_parameter(std::uint16_t index)
{
    MoveType t;
    t.kind = Kind::TypeParameter;
    t.param_index = index;
    return t;
}

std::optional<MoveType::Kind> MoveType::primitive_from_name(std::string_view name)
{
    if (name == "bool") return Kind::Bool;
    if (name == "u8") return Kind::U8;
    if (name == "u16") return Kind::U16;
    if (name == "u32") return Kind::U32;
    if (name == "u64") return Kind::U64;
    if (name == "u128") return Kind::U128;
    if (name == "u256") return Kind::U256;
    if (name == "address") return Kind::Address;
    if (name == "signer") return Kind::Signer;
    return std::nullopt;
}

bool MoveType::operator==(const MoveType& other) const
{
    if (kind != other.kind || args != other.args)
        return false;
    switch (kind) {
    case Kind::Datatype:
        return address == other.address && module == other.module && name == other.name;
    case Kind::TypeParameter:
        return param_index == other.param_index;
    default:
        return true;
    }
}

std::string to_string(const MoveType& t)
{
    using K = MoveType::Kind;
    switch (t.kind) {
    case K::Bool: return "bool";
    case K::U8: return "u8";
    case K::U16: return "u16";
    case K::U32: return "u32";
    case K::U64: return "u64";
    case K::U128: return "u128";
    case K::U256: return "u256";
    case K::Address: return "address";
    case K::Signer: return "signer";
    case K::Vector: return "vector<" + to_string(t.args.at(0)) + ">";
    case K::Reference: return "&" + to_string(t.args.at(0));
    case K::MutableReference: return "&mut " + to_string(t.args.at(0));
    case K::TypeParameter: return "T" + std::to_string(t.param_index);
    case K::Datatype: {
        std::string out = t.address.short_form() + "::" + t.module + "::" + t.name;
        if (!t.args.empty()) {
            out += "<";
            for (std::size_t i = 0; i < t.args.size(); ++i) {
                if (i)
                    out += ", ";
                out += to_string(t.args[i]);
            }
            out += ">";
        }
        return out;
    }
    }
    return "?";
}

std::string_view to_string(Visibility v)
{
    switch (v) {
    case Visibility::Public: return "public";
    case Visibility::Friend: return "friend";
    case Visibility::Private: return "private";
    }
    return "private";
}

const FunctionSig* ModuleIR::find_function(std::string_view fn) const
{
    for (const auto& f : functions)
        if (f.name == fn)
            return &f;
    return nullptr;
}

const StructIR* ModuleIR::find_struct(std::string_view st) const
{
    for (const auto& s : structs)
        if (s.name == st)
            return &s;
    return nullptr;
}

namespace {

void validate_type(const MoveType& t, std::size_t arity, bool inside_reference, const std::string& path)
{
    using K = MoveType::Kind;
    if (t.is_reference()) {
        if (inside_reference)
            throw Error(ErrorKind::SchemaError, path, "reference nested inside reference");
        validate_type(t.args.at(0), arity, true, path);
        return;
    }
    if (t.kind == K::TypeParameter && t.param_index >= arity)
        throw Error(ErrorKind::SchemaError, path,
                    "type parameter index " + std::to_string(t.param_index) + " out of range");
    for (const auto& a : t.args)
        validate_type(a, arity, true, path);
}

void collect_modules(const MoveType& t, std::vector<ModuleRef>& out)
{
    if (t.kind == MoveType::Kind::Datatype)
        out.push_back(ModuleRef{t.address, t.module});
    for (const auto& a : t.args)
        collect_modules(a, out);
}

} // namespace

void validate(const ModuleIR& module)
{
    std::set<std::string> names;
    for (const auto& s : module.structs) {
        if (!names.insert(s.name).second)
            throw Error(ErrorKind::SchemaError, "structs." + s.name, "duplicate struct name");
        std::set<std::string> field_names;
        for (const auto& f : s.fields) {
            if (!field_names.insert(f.name).second)
                throw Error(ErrorKind::SchemaError, "structs." + s.name + ".fields." + f.name, "duplicate field");
            validate_type(f.type, s.type_params.size(), false, "structs." + s.name + ".fields." + f.name);
        }
    }
    names.clear();
    for (const auto& f : module.functions) {
        if (!names.insert(f.name).second)
            throw Error(ErrorKind::SchemaError, "functions." + f.name, "duplicate function name");
        for (std::size_t i = 0; i < f.params.size(); ++i)
            validate_type(f.params[i].type, f.type_params.size(), false,
                          "functions." + f.name + ".parameters." + std::to_string(i));
        for (std::size_t i = 0; i < f.returns.size(); ++i)
            validate_type(f.returns[i], f.type_params.size(), false,
                          "functions." + f.name + ".return." + std::to_string(i));
    }
}

void normalize_dependencies(ModuleIR& module)
{
    std::vector<ModuleRef> deps = module.dependencies;
    for (const auto& s : module.structs)
        for (const auto& f : s.fields)
            collect_modules(f.type, deps);
    for (const auto& f : module.functions) {
        for (const auto& p : f.params)
            collect_modules(p.type, deps);
        for (const auto& r : f.returns)
            collect_modules(r, deps);
    }
    const ModuleRef self{module.address, module.name};
    std::erase(deps, self);
    std::sort(deps.begin(), deps.end());
    deps.erase(std::unique(deps.begin(), deps.end()), deps.end());
    module.dependencies = std::move(deps);
}

} // namespace mad::ir
