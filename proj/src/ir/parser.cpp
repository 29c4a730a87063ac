#include "mad/ir/parser.hpp"

#include "mad/error.hpp"
#include "mad/util/digest.hpp"
#include "mad/util/lexer.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <span>

namespace mad::ir {

using util::Token;
using util::TokenKind;

// ---------------------------------------------------------------------------
// Scope

Scope::Scope(Address self_address, std::string self_module)
    : self_address_(std::move(self_address)), self_module_(std::move(self_module))
{
}

void Scope::add_module_alias(std::string alias, ModuleRef target) { module_aliases_[std::move(alias)] = std::move(target); }

void Scope::add_member_alias(std::string alias, MemberRef target) { member_aliases_[std::move(alias)] = std::move(target); }

void Scope::add_explicit_dependency(const ModuleRef& dep)
{
    if (dep == ModuleRef{self_address_, self_module_})
        return;
    if (std::find(explicit_deps_.begin(), explicit_deps_.end(), dep) == explicit_deps_.end())
        explicit_deps_.push_back(dep);
}

std::optional<Address> Scope::named_address(std::string_view name)
{
    if (name == "std")
        return Address::parse("0x1");
    if (name == "sui")
        return Address::parse("0x2");
    if (name == "sui_system")
        return Address::parse("0x3");
    return std::nullopt;
}

namespace {

// Sui 2024-edition implicit imports.
const std::vector<std::pair<std::string, ModuleRef>>& prelude_modules()
{
    static const std::vector<std::pair<std::string, ModuleRef>> kModules = {
        {"vector", {Address::parse("0x1"), "vector"}},
        {"option", {Address::parse("0x1"), "option"}},
        {"object", {Address::parse("0x2"), "object"}},
        {"transfer", {Address::parse("0x2"), "transfer"}},
        {"tx_context", {Address::parse("0x2"), "tx_context"}},
    };
    return kModules;
}

const std::vector<std::pair<std::string, MemberRef>>& prelude_members()
{
    static const std::vector<std::pair<std::string, MemberRef>> kMembers = {
        {"Option", {{Address::parse("0x1"), "option"}, "Option"}},
        {"UID", {{Address::parse("0x2"), "object"}, "UID"}},
        {"ID", {{Address::parse("0x2"), "object"}, "ID"}},
        {"TxContext", {{Address::parse("0x2"), "tx_context"}, "TxContext"}},
    };
    return kMembers;
}

} // namespace

std::optional<ModuleRef> Scope::resolve_module(std::string_view alias) const
{
    if (alias == "Self" || alias == self_module_)
        return ModuleRef{self_address_, self_module_};
    if (auto it = module_aliases_.find(alias); it != module_aliases_.end())
        return it->second;
    for (const auto& [name, ref] : prelude_modules())
        if (name == alias)
            return ref;
    return std::nullopt;
}

std::optional<MemberRef> Scope::resolve_member(std::string_view alias) const
{
    if (auto it = member_aliases_.find(alias); it != member_aliases_.end())
        return it->second;
    for (const auto& [name, ref] : prelude_members())
        if (name == alias)
            return ref;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Token cursor

namespace {

[[noreturn]] void syntax_error(std::size_t line, std::string expected, std::string_view found)
{
    throw Error(ErrorKind::SyntaxError, std::move(expected),
                found.empty() ? std::string("found end of input") : "found '" + std::string(found) + "'", line);
}

class Cursor {
public:
    Cursor(std::span<const Token> toks, std::size_t last_line) : toks_(toks), last_line_(last_line) {}

    bool at_end() const { return pos_ >= toks_.size(); }
    const Token* peek(std::size_t k = 0) const { return pos_ + k < toks_.size() ? &toks_[pos_ + k] : nullptr; }
    bool peek_is(std::string_view s, std::size_t k = 0) const
    {
        const Token* t = peek(k);
        return t && t->text == s && t->kind != TokenKind::String;
    }
    std::size_t line() const { return at_end() ? last_line_ : toks_[pos_].line; }
    std::size_t pos() const { return pos_; }
    void seek(std::size_t p) { pos_ = p; }

    const Token& next(std::string_view expected)
    {
        if (at_end())
            syntax_error(last_line_, std::string(expected), "");
        return toks_[pos_++];
    }

    bool accept(std::string_view s)
    {
        if (peek_is(s)) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(std::string_view s)
    {
        if (!accept(s))
            syntax_error(line(), "'" + std::string(s) + "'", at_end() ? "" : toks_[pos_].text);
    }

    std::string ident(std::string_view what)
    {
        const Token& t = next(what);
        if (t.kind != TokenKind::Ident)
            syntax_error(t.line, std::string(what), t.text);
        return std::string(t.text);
    }

    // Index one past the bracket matching the opener at the cursor.
    std::size_t matching(std::string_view open, std::string_view close) const
    {
        int depth = 0;
        for (std::size_t i = pos_; i < toks_.size(); ++i) {
            if (toks_[i].kind == TokenKind::String)
                continue;
            if (toks_[i].text == open)
                ++depth;
            else if (toks_[i].text == close && --depth == 0)
                return i + 1;
        }
        syntax_error(toks_.empty() ? last_line_ : toks_[pos_].line, "'" + std::string(close) + "'", "");
    }

private:
    std::span<const Token> toks_;
    std::size_t pos_ = 0;
    std::size_t last_line_;
};

bool is_synthetic_param_name(std::string_view name)
{
    static const std::regex kArg("Arg[0-9]+");
    return std::regex_match(name.begin(), name.end(), kArg);
}

Address parse_address_token(const Token& t)
{
    if (t.kind == TokenKind::Number) {
        if (!Address::valid_literal(t.text))
            syntax_error(t.line, "address", t.text);
        return Address::parse(t.text);
    }
    if (t.kind == TokenKind::Ident)
        if (auto a = Scope::named_address(t.text))
            return *a;
    syntax_error(t.line, "address", t.text);
}

// Parses signature-level declarations with a given scope.
class DeclParser {
public:
    explicit DeclParser(const Scope& scope) : scope_(scope) {}

    MoveType parse_type(Cursor& c, const std::vector<std::string>& tparams)
    {
        if (c.accept("&")) {
            const bool is_mut = c.accept("mut");
            return MoveType::reference(parse_type(c, tparams), is_mut);
        }
        const Token& first = c.next("type");
        std::vector<std::string_view> segments;
        std::optional<Address> address;
        if (first.kind == TokenKind::Number) {
            address = parse_address_token(first);
            c.expect("::");
            segments.push_back(c.next("module name").text);
            c.expect("::");
            segments.push_back(c.next("type name").text);
        } else if (first.kind == TokenKind::Ident) {
            segments.push_back(first.text);
            while (c.peek_is("::")) {
                c.expect("::");
                const Token& seg = c.next("path segment");
                if (seg.kind != TokenKind::Ident)
                    syntax_error(seg.line, "path segment", seg.text);
                segments.push_back(seg.text);
            }
            if (segments.size() > 3)
                syntax_error(first.line, "type path", first.text);
            if (segments.size() == 3) {
                address = parse_address_token(first);
                segments.erase(segments.begin());
            }
        } else {
            syntax_error(first.line, "type", first.text);
        }

        std::vector<MoveType> args;
        if (c.accept("<")) {
            do {
                args.push_back(parse_type(c, tparams));
            } while (c.accept(","));
            c.expect(">");
        }

        if (address) {
            return MoveType::datatype(*address, std::string(segments[0]), std::string(segments[1]), std::move(args));
        }
        if (segments.size() == 2) {
            auto mod = scope_.resolve_module(segments[0]);
            if (!mod)
                syntax_error(first.line, "known module alias", segments[0]);
            return MoveType::datatype(mod->address, mod->name, std::string(segments[1]), std::move(args));
        }

        const std::string_view name = segments[0];
        if (auto it = std::find(tparams.begin(), tparams.end(), name); it != tparams.end()) {
            if (!args.empty())
                syntax_error(first.line, "type parameter without arguments", name);
            return MoveType::type_parameter(static_cast<std::uint16_t>(it - tparams.begin()));
        }
        if (name == "vector") {
            if (args.size() != 1)
                syntax_error(first.line, "vector<T>", name);
            return MoveType::vector_of(std::move(args[0]));
        }
        if (auto prim = MoveType::primitive_from_name(name)) {
            if (!args.empty())
                syntax_error(first.line, "primitive type without arguments", name);
            return MoveType::primitive(*prim);
        }
        if (scope_.is_local_struct(name))
            return MoveType::datatype(scope_.self_address(), scope_.self_module(), std::string(name), std::move(args));
        if (auto member = scope_.resolve_member(name))
            return MoveType::datatype(member->module.address, member->module.name, member->member, std::move(args));
        syntax_error(first.line, "resolvable type name", name);
    }

    AbilitySet parse_constraints(Cursor& c)
    {
        AbilitySet set;
        do {
            const Token& t = c.next("ability");
            if (!set.add_named(t.text))
                syntax_error(t.line, "ability (copy, drop, store, key)", t.text);
        } while (c.accept("+"));
        return set;
    }

    AbilitySet parse_ability_list(Cursor& c)
    {
        AbilitySet set;
        do {
            const Token& t = c.next("ability");
            if (!set.add_named(t.text))
                syntax_error(t.line, "ability (copy, drop, store, key)", t.text);
        } while (c.accept(","));
        return set;
    }

    static void skip_attributes(Cursor& c)
    {
        while (c.peek_is("#") && c.peek_is("[", 1)) {
            c.expect("#");
            c.seek(c.matching("[", "]"));
        }
    }

    FunctionSig parse_function(Cursor& c)
    {
        skip_attributes(c);
        FunctionSig sig;
        bool saw_fun = false;
        for (;;) {
            if (c.accept("public")) {
                sig.visibility = Visibility::Public;
                if (c.peek_is("(")) {
                    c.expect("(");
                    const std::string kind = c.ident("friend/package/script");
                    if (kind == "friend" || kind == "package")
                        sig.visibility = Visibility::Friend;
                    else if (kind != "script")
                        syntax_error(c.line(), "friend, package or script", kind);
                    c.expect(")");
                }
            } else if (c.accept("entry")) {
                sig.is_entry = true;
            } else if (c.accept("native") || c.accept("inline") || c.accept("macro")) {
            } else if (c.accept("fun")) {
                saw_fun = true;
                break;
            } else {
                break;
            }
        }
        sig.name = c.ident(saw_fun ? "function name" : "'fun'");
        if (!saw_fun && !c.peek_is("(") && !c.peek_is("<"))
            syntax_error(c.line(), "'fun'", sig.name);

        std::vector<std::string> tparams;
        if (c.accept("<")) {
            do {
                tparams.push_back(c.ident("type parameter"));
                AbilitySet constraints;
                if (c.accept(":"))
                    constraints = parse_constraints(c);
                sig.type_params.push_back(constraints);
            } while (c.accept(","));
            c.expect(">");
        }

        c.expect("(");
        if (!c.accept(")")) {
            do {
                if (c.peek_is(")"))
                    break;
                c.accept("mut");
                const std::string pname = c.ident("parameter name");
                c.expect(":");
                ParamIR p;
                if (!is_synthetic_param_name(pname))
                    p.name = pname;
                p.type = parse_type(c, tparams);
                sig.params.push_back(std::move(p));
            } while (c.accept(","));
            c.expect(")");
        }

        if (c.accept(":")) {
            if (c.peek_is("(")) {
                c.expect("(");
                if (!c.accept(")")) {
                    do {
                        sig.returns.push_back(parse_type(c, tparams));
                    } while (c.accept(","));
                    c.expect(")");
                }
            } else {
                // Disassembler listings print tuples as `u64 * bool`.
                do {
                    sig.returns.push_back(parse_type(c, tparams));
                } while (c.accept("*"));
            }
        }

        if (c.accept("acquires")) {
            do {
                parse_type(c, tparams);
            } while (c.accept(","));
        }

        if (c.accept(";"))
            return sig;
        if (!c.peek_is("{"))
            syntax_error(c.line(), "function body or ';'", c.at_end() ? "" : c.peek()->text);
        c.seek(c.matching("{", "}"));
        return sig;
    }

    StructIR parse_struct(Cursor& c)
    {
        skip_attributes(c);
        c.accept("public");
        c.expect("struct");
        StructIR s;
        s.name = c.ident("struct name");
        std::vector<std::string> tparams;
        if (c.accept("<")) {
            do {
                StructTypeParam tp;
                tp.is_phantom = c.accept("phantom");
                tp.name = c.ident("type parameter");
                if (c.accept(":"))
                    tp.constraints = parse_constraints(c);
                tparams.push_back(tp.name);
                s.type_params.push_back(std::move(tp));
            } while (c.accept(","));
            c.expect(">");
        }
        if (c.accept("has"))
            s.abilities = parse_ability_list(c);

        if (c.accept("{")) {
            while (!c.accept("}")) {
                FieldIR f;
                f.name = c.ident("field name");
                c.expect(":");
                f.type = parse_type(c, tparams);
                s.fields.push_back(std::move(f));
                if (!c.accept(",")) {
                    c.expect("}");
                    break;
                }
            }
        } else if (c.accept("(")) {
            std::size_t index = 0;
            while (!c.accept(")")) {
                FieldIR f;
                f.name = "pos" + std::to_string(index++);
                f.type = parse_type(c, tparams);
                s.fields.push_back(std::move(f));
                if (!c.accept(",")) {
                    c.expect(")");
                    break;
                }
            }
        }
        if (c.accept("has")) {
            if (!s.abilities.empty())
                syntax_error(c.line(), "single ability clause", "has");
            s.abilities = parse_ability_list(c);
        }
        c.accept(";");
        return s;
    }

private:
    const Scope& scope_;
};

struct ItemRange {
    std::size_t begin;
    std::size_t end;
};

// Splits module-level items. Each item spans attributes through its closing
// ';' or '}' (plus a trailing `has ...;` clause for postfix-ability structs).
std::vector<ItemRange> split_items(std::span<const Token> toks, std::size_t last_line)
{
    std::vector<ItemRange> items;
    std::size_t i = 0;
    while (i < toks.size()) {
        const std::size_t begin = i;
        int paren = 0;
        int bracket = 0;
        bool done = false;
        while (i < toks.size() && !done) {
            const Token& t = toks[i];
            if (t.kind == TokenKind::String) {
                ++i;
                continue;
            }
            if (t.text == "(")
                ++paren;
            else if (t.text == ")")
                --paren;
            else if (t.text == "[")
                ++bracket;
            else if (t.text == "]")
                --bracket;
            else if (t.text == "}" && paren == 0 && bracket == 0)
                syntax_error(t.line, "module item", t.text);
            else if (t.text == ";" && paren == 0 && bracket == 0) {
                ++i;
                done = true;
                continue;
            } else if (t.text == "{" && paren == 0 && bracket == 0) {
                int depth = 0;
                for (; i < toks.size(); ++i) {
                    if (toks[i].kind == TokenKind::String)
                        continue;
                    if (toks[i].text == "{")
                        ++depth;
                    else if (toks[i].text == "}" && --depth == 0)
                        break;
                }
                if (i >= toks.size())
                    syntax_error(last_line, "'}'", "");
                ++i;
                if (i < toks.size() && toks[i].is("has")) {
                    while (i < toks.size() && !toks[i].is(";"))
                        ++i;
                    if (i < toks.size())
                        ++i;
                } else if (i < toks.size() && toks[i].is(";")) {
                    ++i;
                }
                done = true;
                continue;
            }
            ++i;
        }
        if (!done)
            syntax_error(toks.empty() ? last_line : toks.back().line, "';' or '}'", "");
        items.push_back({begin, i});
    }
    return items;
}

std::size_t first_keyword_index(std::span<const Token> item)
{
    std::size_t k = 0;
    while (k + 1 < item.size() && item[k].is("#") && item[k + 1].is("[")) {
        int depth = 0;
        for (; k < item.size(); ++k) {
            if (item[k].is("["))
                ++depth;
            else if (item[k].is("]") && --depth == 0) {
                ++k;
                break;
            }
        }
    }
    return k;
}

enum class ItemKind { Use, Friend, Struct, Const, Function, Spec };

ItemKind classify(std::span<const Token> item)
{
    std::size_t k = first_keyword_index(item);
    if (k >= item.size())
        syntax_error(item.empty() ? 0 : item.back().line, "item", "");
    if (item[k].is("use"))
        return ItemKind::Use;
    if (item[k].is("friend"))
        return ItemKind::Friend;
    if (item[k].is("const"))
        return ItemKind::Const;
    if (item[k].is("spec"))
        return ItemKind::Spec;
    if (item[k].is("public") && k + 1 < item.size() && item[k + 1].is("struct"))
        return ItemKind::Struct;
    if (item[k].is("struct"))
        return ItemKind::Struct;
    if (item[k].kind == TokenKind::Ident)
        return ItemKind::Function;
    syntax_error(item[k].line, "module item", item[k].text);
}

// use <addr>::<tree>; where tree := ident ['as' ident] | ident '::' tree | '{' tree, ... '}'
void parse_use_tree(Cursor& c, Scope& scope, const Address& addr, std::optional<std::string> module)
{
    if (c.peek_is("{")) {
        c.expect("{");
        while (!c.accept("}")) {
            parse_use_tree(c, scope, addr, module);
            if (!c.accept(",")) {
                c.expect("}");
                break;
            }
        }
        return;
    }
    const std::string name = c.ident("use path segment");
    if (!module) {
        const ModuleRef ref{addr, name};
        scope.add_explicit_dependency(ref);
        if (c.accept("::")) {
            parse_use_tree(c, scope, addr, name);
            return;
        }
        std::string alias = name;
        if (c.accept("as"))
            alias = c.ident("alias");
        scope.add_module_alias(alias, ref);
        return;
    }
    const ModuleRef ref{addr, *module};
    std::string alias = name;
    if (c.accept("as"))
        alias = c.ident("alias");
    if (name == "Self")
        scope.add_module_alias(alias == "Self" ? *module : alias, ref);
    else
        scope.add_member_alias(alias, MemberRef{ref, name});
}

void parse_use(Cursor& c, Scope& scope)
{
    DeclParser::skip_attributes(c);
    c.expect("use");
    const Token& addr_tok = c.next("address");
    const Address addr = parse_address_token(addr_tok);
    c.expect("::");
    parse_use_tree(c, scope, addr, std::nullopt);
    c.expect(";");
}

} // namespace

// ---------------------------------------------------------------------------
// Module parsing

ParsedModule parse_module(std::string_view text)
{
    const auto all = util::lex(text, false);
    if (all.empty())
        throw Error(ErrorKind::EmptyInput, "disassembly", "input contains no tokens");
    const std::size_t last_line = all.back().line;
    std::span<const Token> toks(all);

    Cursor head(toks, last_line);
    // `address X { module M { ... } }` wrapper.
    std::optional<Address> outer_address;
    std::size_t outer_close = 0;
    if (head.peek_is("address")) {
        head.expect("address");
        outer_address = parse_address_token(head.next("address"));
        outer_close = head.matching("{", "}");
        head.expect("{");
    }

    head.expect("module");
    Address address;
    std::string name;
    if (outer_address && head.peek() && head.peek()->is_ident() && !head.peek_is("::", 1) && !head.peek_is(".", 1)) {
        address = *outer_address;
        name = head.ident("module name");
    } else {
        const Token& at = head.next("module address");
        // Disassembler headers print bare hex, which may begin with a letter.
        if (at.is_ident() && head.peek_is(".") && Address::valid_literal(at.text) && !Scope::named_address(at.text))
            address = Address::parse(at.text);
        else
            address = parse_address_token(at);
        if (!head.accept("::"))
            head.expect(".");
        name = head.ident("module name");
    }

    std::size_t body_begin = 0;
    std::size_t body_end = 0;
    if (head.peek_is("{")) {
        const std::size_t close = head.matching("{", "}");
        head.expect("{");
        body_begin = head.pos();
        body_end = close - 1;
        const std::size_t expected_end = outer_address ? outer_close - 1 : toks.size();
        if (close != expected_end)
            syntax_error(toks[close].line, "end of input after module", toks[close].text);
    } else {
        head.expect(";");
        body_begin = head.pos();
        body_end = toks.size();
    }

    ParsedModule out;
    out.scope = Scope(address, name);
    out.ir.address = address;
    out.ir.name = name;

    const auto body = toks.subspan(body_begin, body_end - body_begin);
    const auto items = split_items(body, last_line);

    // Pass 1: imports and struct names, so that declarations can reference
    // structs and aliases declared further down.
    for (const auto& it : items) {
        const auto item = body.subspan(it.begin, it.end - it.begin);
        const ItemKind kind = classify(item);
        if (kind == ItemKind::Use) {
            Cursor c(item, last_line);
            parse_use(c, out.scope);
        } else if (kind == ItemKind::Struct) {
            std::size_t k = first_keyword_index(item);
            if (item[k].is("public"))
                ++k;
            if (k + 1 < item.size() && item[k + 1].is_ident())
                out.scope.add_local_struct(std::string(item[k + 1].text));
        }
    }

    DeclParser parser(out.scope);
    for (const auto& it : items) {
        const auto item = body.subspan(it.begin, it.end - it.begin);
        Cursor c(item, last_line);
        switch (classify(item)) {
        case ItemKind::Use:
        case ItemKind::Friend:
        case ItemKind::Spec:
            break;
        case ItemKind::Struct:
            out.ir.structs.push_back(parser.parse_struct(c));
            break;
        case ItemKind::Function:
            out.ir.functions.push_back(parser.parse_function(c));
            break;
        case ItemKind::Const: {
            DeclParser::skip_attributes(c);
            c.expect("const");
            c.ident("constant name");
            c.expect(":");
            ConstantIR k;
            k.type = parser.parse_type(c, {});
            c.expect("=");
            const std::size_t lit_begin = c.pos();
            if (lit_begin + 1 >= item.size())
                syntax_error(c.line(), "constant value", "");
            const std::size_t from = item[lit_begin].offset;
            const std::size_t to = item[item.size() - 2].end();
            try {
                k.bytes = encode_constant(k.type, text.substr(from, to - from));
            } catch (const Error& e) {
                throw Error(ErrorKind::SyntaxError, "constant literal of type " + to_string(k.type), e.detail(),
                            item[lit_begin].line);
            }
            out.ir.constants.push_back(std::move(k));
            break;
        }
        }
        if (!c.at_end() && classify(item) != ItemKind::Use && classify(item) != ItemKind::Friend &&
            classify(item) != ItemKind::Spec && classify(item) != ItemKind::Const)
            syntax_error(c.line(), "end of item", c.peek()->text);
    }

    out.ir.dependencies = out.scope.explicit_dependencies();
    normalize_dependencies(out.ir);
    validate(out.ir);
    return out;
}

ModuleIR parse_disassembly(std::string_view text)
{
    if (text.find_first_not_of(" \t\r\n") == std::string_view::npos)
        throw Error(ErrorKind::EmptyInput, "disassembly", "input is empty");
    return parse_module(text).ir;
}

FunctionSig parse_function(std::string_view text, const Scope& scope)
{
    const auto toks = util::lex(text, false);
    if (toks.empty())
        throw Error(ErrorKind::SyntaxError, "function declaration", "found end of input", 1);
    Cursor c(toks, toks.back().line);
    DeclParser parser(scope);
    FunctionSig sig = parser.parse_function(c);
    if (!c.at_end())
        syntax_error(c.line(), "end of function", c.peek()->text);
    return sig;
}

// ---------------------------------------------------------------------------
// Constants

namespace {

using Bytes = std::vector<std::uint8_t>;

std::size_t int_width(MoveType::Kind k)
{
    switch (k) {
    case MoveType::Kind::U8: return 1;
    case MoveType::Kind::U16: return 2;
    case MoveType::Kind::U32: return 4;
    case MoveType::Kind::U64: return 8;
    case MoveType::Kind::U128: return 16;
    case MoveType::Kind::U256: return 32;
    default: return 0;
    }
}

void push_uleb(Bytes& out, std::size_t n)
{
    do {
        std::uint8_t b = n & 0x7f;
        n >>= 7;
        if (n)
            b |= 0x80;
        out.push_back(b);
    } while (n);
}

Bytes encode_int(std::string_view lit, std::size_t width)
{
    std::string digits;
    int base = 10;
    if (lit.starts_with("0x")) {
        base = 16;
        lit.remove_prefix(2);
    }
    for (char ch : lit) {
        if (ch == '_')
            continue;
        if (!std::isxdigit(static_cast<unsigned char>(ch)))
            break; // type suffix such as u64
        if (base == 10 && !std::isdigit(static_cast<unsigned char>(ch)))
            break;
        digits.push_back(ch);
    }
    if (digits.empty())
        throw Error(ErrorKind::SyntaxError, std::string(lit), "expected integer literal");
    Bytes le(width, 0);
    for (char ch : digits) {
        int digit = std::isdigit(static_cast<unsigned char>(ch)) ? ch - '0' : std::tolower(ch) - 'a' + 10;
        unsigned carry = static_cast<unsigned>(digit);
        for (auto& b : le) {
            const unsigned v = b * static_cast<unsigned>(base) + carry;
            b = static_cast<std::uint8_t>(v & 0xff);
            carry = v >> 8;
        }
        if (carry)
            throw Error(ErrorKind::SyntaxError, std::string(lit), "integer literal overflows type");
    }
    return le;
}

std::string decimal_from_le(const Bytes& le)
{
    Bytes n = le;
    std::string out;
    auto is_zero = [&] { return std::all_of(n.begin(), n.end(), [](auto b) { return b == 0; }); };
    if (is_zero())
        return "0";
    while (!is_zero()) {
        unsigned rem = 0;
        for (std::size_t i = n.size(); i-- > 0;) {
            const unsigned cur = (rem << 8) | n[i];
            n[i] = static_cast<std::uint8_t>(cur / 10);
            rem = cur % 10;
        }
        out.push_back(static_cast<char>('0' + rem));
    }
    std::reverse(out.begin(), out.end());
    return out;
}

Bytes unescape_byte_string(std::string_view body)
{
    Bytes out;
    for (std::size_t i = 0; i < body.size(); ++i) {
        char ch = body[i];
        if (ch != '\\') {
            out.push_back(static_cast<std::uint8_t>(ch));
            continue;
        }
        if (++i >= body.size())
            throw Error(ErrorKind::SyntaxError, std::string(body), "dangling escape");
        switch (body[i]) {
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        case 'r': out.push_back('\r'); break;
        case '0': out.push_back('\0'); break;
        case '\\': out.push_back('\\'); break;
        case '"': out.push_back('"'); break;
        case 'x': {
            if (i + 2 >= body.size())
                throw Error(ErrorKind::SyntaxError, std::string(body), "short \\x escape");
            auto b = util::from_hex(body.substr(i + 1, 2));
            out.push_back(b.at(0));
            i += 2;
            break;
        }
        default: throw Error(ErrorKind::SyntaxError, std::string(body), "unknown escape");
        }
    }
    return out;
}

void encode_value(const MoveType& type, Cursor& c, Bytes& out)
{
    using K = MoveType::Kind;
    if (const std::size_t w = int_width(type.kind)) {
        const Token& t = c.next("integer literal");
        if (t.kind != TokenKind::Number)
            syntax_error(t.line, "integer literal", t.text);
        const Bytes le = encode_int(t.text, w);
        out.insert(out.end(), le.begin(), le.end());
        return;
    }
    switch (type.kind) {
    case K::Bool: {
        const Token& t = c.next("bool literal");
        if (t.text != "true" && t.text != "false")
            syntax_error(t.line, "true or false", t.text);
        out.push_back(t.text == "true" ? 1 : 0);
        return;
    }
    case K::Address: {
        c.expect("@");
        const Address a = parse_address_token(c.next("address"));
        const Bytes raw = util::from_hex(a.hex());
        out.insert(out.end(), raw.begin(), raw.end());
        return;
    }
    case K::Vector: {
        const MoveType& elem = type.args.at(0);
        if (elem.kind == K::U8 && c.peek() && c.peek()->kind == TokenKind::String) {
            const Token& t = c.next("byte string");
            const std::string_view body = t.text.substr(2, t.text.size() - 3);
            const Bytes raw = t.text[0] == 'x' ? util::from_hex(body) : unescape_byte_string(body);
            push_uleb(out, raw.size());
            out.insert(out.end(), raw.begin(), raw.end());
            return;
        }
        c.expect("vector");
        // An explicit element annotation (vector<u64>[..]) is redundant with the declared type.
        if (c.accept("<"))
            while (!c.accept(">"))
                c.next("'>'");
        c.expect("[");
        Bytes elems;
        std::size_t count = 0;
        while (!c.accept("]")) {
            encode_value(elem, c, elems);
            ++count;
            if (!c.accept(",")) {
                c.expect("]");
                break;
            }
        }
        push_uleb(out, count);
        out.insert(out.end(), elems.begin(), elems.end());
        return;
    }
    default:
        throw Error(ErrorKind::SyntaxError, to_string(type), "unsupported constant type");
    }
}

std::string render_value(const MoveType& type, const Bytes& bytes, std::size_t& pos)
{
    using K = MoveType::Kind;
    auto take = [&](std::size_t n) {
        if (pos + n > bytes.size())
            throw Error(ErrorKind::SchemaError, to_string(type), "constant bytes truncated");
        Bytes slice(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
        pos += n;
        return slice;
    };
    if (const std::size_t w = int_width(type.kind))
        return decimal_from_le(take(w));
    switch (type.kind) {
    case K::Bool: return take(1)[0] ? "true" : "false";
    case K::Address: {
        const auto raw = take(32);
        return "@" + Address::parse(util::to_hex(raw)).short_form();
    }
    case K::Vector: {
        std::size_t len = 0;
        int shift = 0;
        for (;;) {
            const std::uint8_t b = take(1)[0];
            len |= static_cast<std::size_t>(b & 0x7f) << shift;
            shift += 7;
            if (!(b & 0x80))
                break;
        }
        const MoveType& elem = type.args.at(0);
        if (elem.kind == K::U8)
            return "x\"" + util::to_hex(take(len)) + "\"";
        std::string out = "vector[";
        for (std::size_t i = 0; i < len; ++i) {
            if (i)
                out += ", ";
            out += render_value(elem, bytes, pos);
        }
        return out + "]";
    }
    default:
        throw Error(ErrorKind::SchemaError, to_string(type), "unsupported constant type");
    }
}

} // namespace

std::vector<std::uint8_t> encode_constant(const MoveType& type, std::string_view literal)
{
    const auto toks = util::lex(literal, false);
    Cursor c(toks, toks.empty() ? 1 : toks.back().line);
    Bytes out;
    encode_value(type, c, out);
    if (!c.at_end())
        syntax_error(c.line(), "end of constant", c.peek()->text);
    return out;
}

std::string render_constant(const MoveType& type, const std::vector<std::uint8_t>& bytes)
{
    std::size_t pos = 0;
    std::string out = render_value(type, bytes, pos);
    if (pos != bytes.size())
        throw Error(ErrorKind::SchemaError, to_string(type), "trailing constant bytes");
    return out;
}

} // namespace mad::ir
