#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mad::ir {

/// Bit set over Move abilities.
class AbilitySet {
public:
    enum Ability : std::uint8_t { Copy = 1, Drop = 2, Store = 4, Key = 8 };

    constexpr AbilitySet() = default;
    constexpr explicit AbilitySet(std::uint8_t bits) : bits_(bits & 0xf) {}

    constexpr bool has(Ability a) const { return (bits_ & a) != 0; }
    constexpr AbilitySet& add(Ability a)
    {
        bits_ |= a;
        return *this;
    }
    constexpr bool empty() const { return bits_ == 0; }
    constexpr std::uint8_t bits() const { return bits_; }

    /// Adds the named ability ("copy", "Drop", ...). Returns false if unknown.
    bool add_named(std::string_view name);

    /// Declaration order: copy, drop, store, key.
    std::vector<std::string_view> names() const;

    /// "copy, drop" / "copy + drop" depending on `separator`.
    std::string join(std::string_view separator) const;

    friend constexpr bool operator==(AbilitySet, AbilitySet) = default;

private:
    std::uint8_t bits_ = 0;
};

/// Normalized account address: 64 lowercase hex chars, no 0x prefix.
class Address {
public:
    Address() : hex_(64, '0') {}

    /// Accepts "0x2", "2", or a full 64-char hex string. Throws SyntaxError.
    static Address parse(std::string_view text);
    static bool valid_literal(std::string_view text);

    const std::string& hex() const { return hex_; }
    /// "0x2" style: prefix plus hex with leading zeros stripped.
    std::string short_form() const;

    friend bool operator==(const Address&, const Address&) = default;
    friend auto operator<=>(const Address&, const Address&) = default;

private:
    std::string hex_;
};

struct MoveType {
    enum class Kind : std::uint8_t {
        Bool,
        U8,
        U16,
        U32,
        U64,
        U128,
        U256,
        Address,
        Signer,
        Vector,
        Datatype,
        Reference,
        MutableReference,
        TypeParameter,
    };

    Kind kind = Kind::Bool;
    /// Vector / reference: exactly one element. Datatype: type arguments.
    std::vector<MoveType> args;
    ir::Address address;
    std::string module;
    std::string name;
    std::uint16_t param_index = 0;

    static MoveType primitive(Kind k);
    static MoveType vector_of(MoveType elem);
    static MoveType reference(MoveType inner, bool mutable_ref);
    static MoveType datatype(ir::Address addr, std::string module, std::string name, std::vector<MoveType> type_args = {});
    static MoveType type_parameter(std::uint16_t index);

    /// Maps "u64", "bool", ... to the primitive kind.
    static std::optional<Kind> primitive_from_name(std::string_view name);

    bool is_reference() const { return kind == Kind::Reference || kind == Kind::MutableReference; }
    bool is_primitive() const { return kind <= Kind::Signer; }

    bool operator==(const MoveType& other) const;
};

/// Fully qualified canonical rendering, e.g. `&mut 0x2::object::UID`,
/// `vector<T0>`. Type parameters render as T<index>.
std::string to_string(const MoveType& t);

struct StructTypeParam {
    std::string name;
    AbilitySet constraints;
    bool is_phantom = false;

    friend bool operator==(const StructTypeParam&, const StructTypeParam&) = default;
};

struct FieldIR {
    std::string name;
    MoveType type;

    friend bool operator==(const FieldIR&, const FieldIR&) = default;
};

struct StructIR {
    std::string name;
    AbilitySet abilities;
    std::vector<StructTypeParam> type_params;
    std::vector<FieldIR> fields;

    friend bool operator==(const StructIR&, const StructIR&) = default;
};

enum class Visibility : std::uint8_t { Private, Friend, Public };

std::string_view to_string(Visibility v);

struct ParamIR {
    /// Absent for low-level/bytecode parameters that carry no source name.
    std::optional<std::string> name;
    MoveType type;

    friend bool operator==(const ParamIR&, const ParamIR&) = default;
};

struct FunctionSig {
    std::string name;
    Visibility visibility = Visibility::Private;
    bool is_entry = false;
    std::vector<AbilitySet> type_params;
    std::vector<ParamIR> params;
    std::vector<MoveType> returns;

    friend bool operator==(const FunctionSig&, const FunctionSig&) = default;
};

struct ModuleRef {
    ir::Address address;
    std::string name;

    friend bool operator==(const ModuleRef&, const ModuleRef&) = default;
    friend auto operator<=>(const ModuleRef&, const ModuleRef&) = default;
};

struct ConstantIR {
    MoveType type;
    /// BCS encoding of the value.
    std::vector<std::uint8_t> bytes;

    friend bool operator==(const ConstantIR&, const ConstantIR&) = default;
};

struct ModuleIR {
    ir::Address address;
    std::string name;
    /// Sorted and unique; never contains the module itself.
    std::vector<ModuleRef> dependencies;
    std::vector<StructIR> structs;
    std::vector<FunctionSig> functions;
    std::vector<ConstantIR> constants;

    const FunctionSig* find_function(std::string_view fn) const;
    const StructIR* find_struct(std::string_view st) const;

    friend bool operator==(const ModuleIR&, const ModuleIR&) = default;
};

/// Checks the ModuleIR invariants (unique names, reference nesting, type
/// parameter bounds). Throws SchemaError naming the offending path.
void validate(const ModuleIR& module);

/// Adds every module referenced by a datatype in signatures or fields to
/// `module.dependencies`, then sorts and dedupes (dropping the module itself).
void normalize_dependencies(ModuleIR& module);

} // namespace mad::ir
