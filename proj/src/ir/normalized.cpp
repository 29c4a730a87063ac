#include "mad/ir/normalized.hpp"

#include "mad/error.hpp"
#include "mad/util/digest.hpp"

namespace mad::ir {

using json = nlohmann::ordered_json;

namespace {

[[noreturn]] void schema_error(const std::string& path, const std::string& why)
{
    throw Error(ErrorKind::SchemaError, path, why);
}

const json& field(const json& obj, const char* key, const std::string& path)
{
    const std::string full = path.empty() ? key : path + "." + key;
    if (!obj.is_object())
        schema_error(path.empty() ? "$" : path, "expected object");
    auto it = obj.find(key);
    if (it == obj.end())
        schema_error(full, "missing field");
    return *it;
}

const std::string& string_field(const json& obj, const char* key, const std::string& path)
{
    const json& v = field(obj, key, path);
    if (!v.is_string())
        schema_error(path.empty() ? key : path + "." + key, "expected string");
    return v.get_ref<const std::string&>();
}

Address address_of(const std::string& text, const std::string& path)
{
    if (!Address::valid_literal(text))
        schema_error(path, "invalid address '" + text + "'");
    return Address::parse(text);
}

// Abilities appear either as ["Key", "Store"] or {"abilities": [...]}.
AbilitySet abilities_of(const json& v, const std::string& path)
{
    const json* list = &v;
    if (v.is_object())
        list = &field(v, "abilities", path);
    if (!list->is_array())
        schema_error(path, "expected ability list");
    AbilitySet set;
    for (std::size_t i = 0; i < list->size(); ++i) {
        const json& a = (*list)[i];
        if (!a.is_string() || !set.add_named(a.get<std::string>()))
            schema_error(path + "[" + std::to_string(i) + "]", "unknown ability");
    }
    return set;
}

MoveType type_of(const json& v, const std::string& path)
{
    using K = MoveType::Kind;
    if (v.is_string()) {
        const auto& s = v.get_ref<const std::string&>();
        static const std::pair<const char*, K> kPrims[] = {
            {"Bool", K::Bool}, {"U8", K::U8},     {"U16", K::U16},         {"U32", K::U32},      {"U64", K::U64},
            {"U128", K::U128}, {"U256", K::U256}, {"Address", K::Address}, {"Signer", K::Signer},
        };
        for (const auto& [name, kind] : kPrims)
            if (s == name)
                return MoveType::primitive(kind);
        schema_error(path, "unknown primitive type '" + s + "'");
    }
    if (!v.is_object() || v.size() != 1)
        schema_error(path, "expected type");
    const auto& [tag, body] = *v.items().begin();
    const std::string sub = path + "." + tag;
    if (tag == "Vector")
        return MoveType::vector_of(type_of(body, sub));
    if (tag == "Reference")
        return MoveType::reference(type_of(body, sub), false);
    if (tag == "MutableReference")
        return MoveType::reference(type_of(body, sub), true);
    if (tag == "TypeParameter") {
        if (!body.is_number_unsigned())
            schema_error(sub, "expected type parameter index");
        return MoveType::type_parameter(body.get<std::uint16_t>());
    }
    if (tag == "Struct" || tag == "Datatype") {
        std::vector<MoveType> args;
        if (auto it = body.find("typeArguments"); it != body.end()) {
            if (!it->is_array())
                schema_error(sub + ".typeArguments", "expected array");
            for (std::size_t i = 0; i < it->size(); ++i)
                args.push_back(type_of((*it)[i], sub + ".typeArguments[" + std::to_string(i) + "]"));
        }
        return MoveType::datatype(address_of(string_field(body, "address", sub), sub + ".address"),
                                  string_field(body, "module", sub), string_field(body, "name", sub), std::move(args));
    }
    schema_error(path, "unknown type tag '" + tag + "'");
}

json type_to_json(const MoveType& t)
{
    using K = MoveType::Kind;
    switch (t.kind) {
    case K::Bool: return "Bool";
    case K::U8: return "U8";
    case K::U16: return "U16";
    case K::U32: return "U32";
    case K::U64: return "U64";
    case K::U128: return "U128";
    case K::U256: return "U256";
    case K::Address: return "Address";
    case K::Signer: return "Signer";
    case K::Vector: return json{{"Vector", type_to_json(t.args.at(0))}};
    case K::Reference: return json{{"Reference", type_to_json(t.args.at(0))}};
    case K::MutableReference: return json{{"MutableReference", type_to_json(t.args.at(0))}};
    case K::TypeParameter: return json{{"TypeParameter", t.param_index}};
    case K::Datatype: {
        json args = json::array();
        for (const auto& a : t.args)
            args.push_back(type_to_json(a));
        return json{{"Struct",
                     {{"address", t.address.short_form()}, {"module", t.module}, {"name", t.name}, {"typeArguments", args}}}};
    }
    }
    return nullptr;
}

json abilities_to_json(AbilitySet set)
{
    json list = json::array();
    for (auto n : set.names()) {
        std::string cap(n);
        cap[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(cap[0])));
        list.push_back(cap);
    }
    return json{{"abilities", list}};
}

const json& array_field(const json& obj, const char* key, const std::string& path)
{
    const json& v = field(obj, key, path);
    if (!v.is_array())
        schema_error(path.empty() ? key : path + "." + key, "expected array");
    return v;
}

} // namespace

ModuleIR parse_normalized_doc(const json& doc)
{
    ModuleIR m;
    m.address = address_of(string_field(doc, "address", ""), "address");
    m.name = string_field(doc, "name", "");

    const json& structs = field(doc, "structs", "");
    if (!structs.is_object())
        schema_error("structs", "expected object");
    for (const auto& [name, body] : structs.items()) {
        const std::string path = "structs." + name;
        StructIR s;
        s.name = name;
        s.abilities = abilities_of(field(body, "abilities", path), path + ".abilities");
        if (auto it = body.find("typeParameters"); it != body.end()) {
            if (!it->is_array())
                schema_error(path + ".typeParameters", "expected array");
            for (std::size_t i = 0; i < it->size(); ++i) {
                const json& tp = (*it)[i];
                const std::string tpath = path + ".typeParameters[" + std::to_string(i) + "]";
                StructTypeParam p;
                p.name = "T" + std::to_string(i);
                if (tp.is_object() && tp.contains("name") && tp["name"].is_string())
                    p.name = tp["name"].get<std::string>();
                p.constraints = abilities_of(field(tp, "constraints", tpath), tpath + ".constraints");
                if (auto ph = tp.find("isPhantom"); ph != tp.end()) {
                    if (!ph->is_boolean())
                        schema_error(tpath + ".isPhantom", "expected bool");
                    p.is_phantom = ph->get<bool>();
                }
                s.type_params.push_back(std::move(p));
            }
        }
        const json& fields = array_field(body, "fields", path);
        for (std::size_t i = 0; i < fields.size(); ++i) {
            const std::string fpath = path + ".fields[" + std::to_string(i) + "]";
            FieldIR f;
            f.name = string_field(fields[i], "name", fpath);
            f.type = type_of(field(fields[i], "type", fpath), fpath + ".type");
            s.fields.push_back(std::move(f));
        }
        m.structs.push_back(std::move(s));
    }

    const char* fn_key = doc.contains("exposedFunctions") ? "exposedFunctions" : "functions";
    const json& functions = field(doc, fn_key, "");
    if (!functions.is_object())
        schema_error(fn_key, "expected object");
    for (const auto& [name, body] : functions.items()) {
        const std::string path = std::string(fn_key) + "." + name;
        FunctionSig f;
        f.name = name;
        const std::string& vis = string_field(body, "visibility", path);
        if (vis == "Public")
            f.visibility = Visibility::Public;
        else if (vis == "Friend" || vis == "Package")
            f.visibility = Visibility::Friend;
        else if (vis == "Private")
            f.visibility = Visibility::Private;
        else
            schema_error(path + ".visibility", "unknown visibility '" + vis + "'");
        const json& entry = field(body, "isEntry", path);
        if (!entry.is_boolean())
            schema_error(path + ".isEntry", "expected bool");
        f.is_entry = entry.get<bool>();
        const json& tps = array_field(body, "typeParameters", path);
        for (std::size_t i = 0; i < tps.size(); ++i)
            f.type_params.push_back(abilities_of(tps[i], path + ".typeParameters[" + std::to_string(i) + "]"));
        const json& params = array_field(body, "parameters", path);
        for (std::size_t i = 0; i < params.size(); ++i)
            f.params.push_back(ParamIR{std::nullopt, type_of(params[i], path + ".parameters[" + std::to_string(i) + "]")});
        const json& rets = array_field(body, "return", path);
        for (std::size_t i = 0; i < rets.size(); ++i)
            f.returns.push_back(type_of(rets[i], path + ".return[" + std::to_string(i) + "]"));
        m.functions.push_back(std::move(f));
    }

    if (auto it = doc.find("constants"); it != doc.end()) {
        if (!it->is_array())
            schema_error("constants", "expected array");
        for (std::size_t i = 0; i < it->size(); ++i) {
            const std::string path = "constants[" + std::to_string(i) + "]";
            ConstantIR k;
            k.type = type_of(field((*it)[i], "type", path), path + ".type");
            try {
                k.bytes = util::from_hex(string_field((*it)[i], "value", path));
            } catch (const Error&) {
                schema_error(path + ".value", "expected hex bytes");
            }
            m.constants.push_back(std::move(k));
        }
    }

    if (auto it = doc.find("dependencies"); it != doc.end()) {
        if (!it->is_array())
            schema_error("dependencies", "expected array");
        for (std::size_t i = 0; i < it->size(); ++i) {
            const std::string path = "dependencies[" + std::to_string(i) + "]";
            m.dependencies.push_back(
                ModuleRef{address_of(string_field((*it)[i], "address", path), path + ".address"), string_field((*it)[i], "name", path)});
        }
    }

    normalize_dependencies(m);
    validate(m);
    return m;
}

ModuleIR parse_normalized(std::string_view json_text)
{
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::SchemaError, "$", e.what());
    }
    return parse_normalized_doc(doc);
}

json to_normalized(const ModuleIR& module)
{
    json doc;
    doc["fileFormatVersion"] = 6;
    doc["address"] = module.address.short_form();
    doc["name"] = module.name;
    json deps = json::array();
    for (const auto& d : module.dependencies)
        deps.push_back({{"address", d.address.short_form()}, {"name", d.name}});
    doc["dependencies"] = deps;
    json structs = json::object();
    for (const auto& s : module.structs) {
        json tps = json::array();
        for (const auto& tp : s.type_params)
            tps.push_back({{"name", tp.name}, {"constraints", abilities_to_json(tp.constraints)}, {"isPhantom", tp.is_phantom}});
        json fields = json::array();
        for (const auto& f : s.fields)
            fields.push_back({{"name", f.name}, {"type", type_to_json(f.type)}});
        structs[s.name] = {{"abilities", abilities_to_json(s.abilities)}, {"typeParameters", tps}, {"fields", fields}};
    }
    doc["structs"] = structs;
    json fns = json::object();
    for (const auto& f : module.functions) {
        json tps = json::array();
        for (const auto& tp : f.type_params)
            tps.push_back(abilities_to_json(tp));
        json params = json::array();
        for (const auto& p : f.params)
            params.push_back(type_to_json(p.type));
        json rets = json::array();
        for (const auto& r : f.returns)
            rets.push_back(type_to_json(r));
        const char* vis = f.visibility == Visibility::Public ? "Public" : f.visibility == Visibility::Friend ? "Friend" : "Private";
        fns[f.name] = {{"visibility", vis}, {"isEntry", f.is_entry}, {"typeParameters", tps}, {"parameters", params}, {"return", rets}};
    }
    doc["exposedFunctions"] = fns;
    json consts = json::array();
    for (const auto& k : module.constants)
        consts.push_back({{"type", type_to_json(k.type)}, {"value", util::to_hex(k.bytes)}});
    doc["constants"] = consts;
    return doc;
}

} // namespace mad::ir
