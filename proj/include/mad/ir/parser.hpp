#pragma once

#include "mad/ir/types.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace mad::ir {

/// Parses a disassembly listing in the canonical declaration subset
/// documented in docs/disassembly-grammar.md. Function bodies (source
/// statements or instruction listings) are skipped by balanced-brace scanning.
///
/// Throws EmptyInput for blank text and SyntaxError(line, expected) on any
/// grammar violation.
ModuleIR parse_disassembly(std::string_view text);

struct MemberRef {
    ModuleRef module;
    std::string member;

    friend bool operator==(const MemberRef&, const MemberRef&) = default;
};

/// Name-resolution environment of one module: its own identity, `use`
/// aliases, the implicit prelude and locally declared struct names.
class Scope {
public:
    Scope() = default;
    Scope(Address self_address, std::string self_module);

    const Address& self_address() const { return self_address_; }
    const std::string& self_module() const { return self_module_; }

    void add_module_alias(std::string alias, ModuleRef target);
    void add_member_alias(std::string alias, MemberRef target);
    void add_local_struct(std::string name) { local_structs_.insert(std::move(name)); }
    void add_explicit_dependency(const ModuleRef& dep);

    std::optional<ModuleRef> resolve_module(std::string_view alias) const;
    std::optional<MemberRef> resolve_member(std::string_view alias) const;
    bool is_local_struct(std::string_view name) const { return local_structs_.contains(std::string(name)); }
    const std::vector<ModuleRef>& explicit_dependencies() const { return explicit_deps_; }

    /// Named addresses understood in paths: std, sui, sui_system.
    static std::optional<Address> named_address(std::string_view name);

private:
    Address self_address_;
    std::string self_module_;
    std::map<std::string, ModuleRef, std::less<>> module_aliases_;
    std::map<std::string, MemberRef, std::less<>> member_aliases_;
    std::set<std::string, std::less<>> local_structs_;
    std::vector<ModuleRef> explicit_deps_;
};

/// Result of parsing a module: the IR plus the scope used to resolve names.
struct ParsedModule {
    ModuleIR ir;
    Scope scope;
};

ParsedModule parse_module(std::string_view text);

/// Parses a single function declaration (attributes, modifiers, signature and
/// optional body) against an existing scope. Throws SyntaxError.
FunctionSig parse_function(std::string_view text, const Scope& scope);

/// BCS-encodes a constant literal (`100`, `true`, `@0x2`, `x"00ff"`,
/// `b"hi"`, `vector[1, 2]`) of the given type.
std::vector<std::uint8_t> encode_constant(const MoveType& type, std::string_view literal);

/// Inverse of encode_constant: canonical literal text for BCS bytes.
std::string render_constant(const MoveType& type, const std::vector<std::uint8_t>& bytes);

} // namespace mad::ir
