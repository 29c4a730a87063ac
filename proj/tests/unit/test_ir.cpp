#include "mad/error.hpp"
#include "mad/ir/normalized.hpp"
#include "mad/ir/parser.hpp"
#include "mad/ir/render.hpp"
#include "support/fixtures.hpp"

#include <doctest.h>

#include <random>
#include <set>

using namespace mad;
using namespace mad::ir;
using K = MoveType::Kind;

namespace {

ErrorKind kind_of(auto&& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected mad::Error");
    return ErrorKind::Io;
}

std::set<std::string> fingerprints(const ModuleIR& m)
{
    std::set<std::string> out;
    for (const auto& f : m.functions)
        out.insert(fingerprint(f));
    return out;
}

MoveType obj(std::string module, std::string name) { return MoveType::datatype(Address::parse("0x2"), std::move(module), std::move(name)); }

} // namespace

TEST_CASE("addresses are normalized")
{
    CHECK(Address::parse("0x2").hex() == std::string(63, '0') + "2");
    CHECK(Address::parse("0xABC").short_form() == "0xabc");
    CHECK(Address::parse(std::string(64, 'f')).hex() == std::string(64, 'f'));
    CHECK(Address::parse("0x0").short_form() == "0x0");
    CHECK_THROWS_AS(Address::parse("0x"), Error);
    CHECK_THROWS_AS(Address::parse(std::string(65, '1')), Error);
    CHECK_THROWS_AS(Address::parse("0xg1"), Error);
}

TEST_CASE("minimal module")
{
    auto ir = parse_disassembly("module 0x2::m { fun f() {} }");
    CHECK(ir.name == "m");
    CHECK(ir.address == Address::parse("0x2"));
    CHECK(ir.structs.empty());
    REQUIRE(ir.functions.size() == 1);
    CHECK(ir.functions[0].name == "f");
    CHECK(ir.functions[0].visibility == Visibility::Private);
    CHECK_FALSE(ir.functions[0].is_entry);
}

TEST_CASE("key struct and entry function match a hand-built IR")
{
    auto ir = parse_disassembly(R"(module 0x2::m {
        struct S has key { id: UID }
        entry fun g(s: &mut S, ctx: &mut TxContext) { }
    })");

    ModuleIR expected;
    expected.address = Address::parse("0x2");
    expected.name = "m";
    expected.dependencies = {{Address::parse("0x2"), "object"}, {Address::parse("0x2"), "tx_context"}};
    StructIR s;
    s.name = "S";
    s.abilities.add(AbilitySet::Key);
    s.fields.push_back({"id", obj("object", "UID")});
    expected.structs.push_back(s);
    FunctionSig g;
    g.name = "g";
    g.is_entry = true;
    g.params.push_back({"s", MoveType::reference(MoveType::datatype(Address::parse("0x2"), "m", "S"), true)});
    g.params.push_back({"ctx", MoveType::reference(obj("tx_context", "TxContext"), true)});
    expected.functions.push_back(g);

    REQUIRE(ir.structs.size() == 1);
    CHECK(ir.structs[0] == expected.structs[0]);
    REQUIRE(ir.functions.size() == 1);
    CHECK(ir.functions[0] == expected.functions[0]);
    CHECK(ir.dependencies == expected.dependencies);
    CHECK(ir == expected);
}

TEST_CASE("empty input")
{
    CHECK(kind_of([] { parse_disassembly(""); }) == ErrorKind::EmptyInput);
    CHECK(kind_of([] { parse_disassembly("  \n// nothing\n"); }) == ErrorKind::EmptyInput);
}

TEST_CASE("syntax errors carry the line")
{
    try {
        parse_disassembly("module 0x2::m {\n  struct S has key {\n    id UID\n  }\n}");
        FAIL("no error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::SyntaxError);
        CHECK(e.position() == 3);
    }
    CHECK(kind_of([] { parse_disassembly("module 0x2::m { fun f(x: &&u8) {} }"); }) == ErrorKind::SyntaxError);
    CHECK(kind_of([] { parse_disassembly("module 0x2::m { fun f(x: Missing) {} }"); }) == ErrorKind::SyntaxError);
}

TEST_CASE("grammar variants")
{
    SUBCASE("dotted disassembler header, star tuples and friend visibility")
    {
        auto ir = parse_disassembly("module 2a.m {\npublic(friend) f(Arg0: u8): bool * u64 {\nB0:\n\t0: Ret\n}\n}");
        CHECK(ir.address.short_form() == "0x2a");
        REQUIRE(ir.functions.size() == 1);
        CHECK(ir.functions[0].visibility == Visibility::Friend);
        CHECK(ir.functions[0].returns.size() == 2);
        CHECK_FALSE(ir.functions[0].params[0].name.has_value());
    }
    SUBCASE("address block with use aliases")
    {
        auto ir = parse_disassembly(R"(address 0x42 { module m {
            use sui::coin::{Self, Coin as C};
            use std::string;
            public fun f<T: drop + store>(c: C<T>, s: string::String): coin::Coin<T> { abort 0 }
        }})");
        const auto& f = ir.functions.at(0);
        CHECK(f.visibility == Visibility::Public);
        CHECK(to_string(f.params[0].type) == "0x2::coin::Coin<T0>");
        CHECK(to_string(f.params[1].type) == "0x1::string::String");
        CHECK(f.type_params.at(0).join(",") == "drop,store");
        std::vector<std::string> deps;
        for (const auto& d : ir.dependencies)
            deps.push_back(d.address.short_form() + "::" + d.name);
        CHECK(deps == std::vector<std::string>{"0x1::string", "0x2::coin"});
    }
    SUBCASE("phantom params, postfix abilities, positional fields, constants")
    {
        auto ir = parse_disassembly(R"(module 0x1::p {
            struct W<phantom T, U: copy> has copy, drop { v: U }
            public struct P(u8, bool) has copy;
            const MAX: u64 = 0x10;
            const NAME: vector<u8> = b"hi";
            native public fun n(): u8;
        })");
        REQUIRE(ir.structs.size() == 2);
        CHECK(ir.structs[0].type_params[0].is_phantom);
        CHECK(ir.structs[0].type_params[1].constraints.has(AbilitySet::Copy));
        CHECK(ir.structs[1].fields.size() == 2);
        CHECK(ir.structs[1].fields[0].name == "pos0");
        CHECK(ir.structs[1].abilities.has(AbilitySet::Copy));
        REQUIRE(ir.constants.size() == 2);
        CHECK(ir.constants[0].bytes == std::vector<std::uint8_t>{16, 0, 0, 0, 0, 0, 0, 0});
        CHECK(ir.constants[1].bytes == std::vector<std::uint8_t>{2, 'h', 'i'});
        CHECK(ir.functions.at(0).name == "n");
    }
}

TEST_CASE("IR invariants are enforced")
{
    CHECK(kind_of([] { parse_disassembly("module 0x2::m { fun f() {} fun f() {} }"); }) == ErrorKind::SchemaError);
    CHECK(kind_of([] { parse_disassembly("module 0x2::m { struct S { a: u8, a: u8 } }"); }) == ErrorKind::SchemaError);
    ModuleIR m;
    m.name = "m";
    FunctionSig f;
    f.name = "f";
    f.params.push_back({std::nullopt, MoveType::type_parameter(1)});
    f.type_params.resize(1);
    m.functions.push_back(f);
    CHECK(kind_of([&] { validate(m); }) == ErrorKind::SchemaError);
    m.functions[0].params[0].type = MoveType::vector_of(MoveType::reference(MoveType::primitive(K::U8), false));
    CHECK(kind_of([&] { validate(m); }) == ErrorKind::SchemaError);
}

TEST_CASE("constant encoding is little-endian BCS")
{
    auto u128 = MoveType::primitive(K::U128);
    auto bytes = encode_constant(u128, "258");
    CHECK(bytes.size() == 16);
    CHECK(bytes[0] == 2);
    CHECK(bytes[1] == 1);
    CHECK(render_constant(u128, bytes) == "258");
    auto u256 = MoveType::primitive(K::U256);
    std::string big = "115792089237316195423570985008687907853269984665640564039457584007913129639935";
    CHECK(encode_constant(u256, big) == std::vector<std::uint8_t>(32, 0xff));
    CHECK(render_constant(u256, std::vector<std::uint8_t>(32, 0xff)) == big);
    CHECK(encode_constant(MoveType::primitive(K::Address), "@0x2").back() == 2);
    auto vu8 = MoveType::vector_of(MoveType::primitive(K::U8));
    CHECK(render_constant(vu8, encode_constant(vu8, "x\"00ff\"")) == "x\"00ff\"");
    CHECK(encode_constant(MoveType::primitive(K::Bool), "true") == std::vector<std::uint8_t>{1});
    CHECK_THROWS_AS(encode_constant(MoveType::primitive(K::U8), "256"), Error);
}

TEST_CASE("normalized documents")
{
    SUBCASE("one exposed function, no structs")
    {
        auto ir = parse_normalized(R"({"address":"0x2","name":"m","structs":{},
            "exposedFunctions":{"f":{"visibility":"Public","isEntry":false,"typeParameters":[],
            "parameters":["U64"],"return":["Bool"]}}})");
        REQUIRE(ir.functions.size() == 1);
        CHECK(ir.functions[0].visibility == Visibility::Public);
        CHECK(fingerprint(ir.functions[0]) == "public fun f<>(u64):(bool)");
    }
    SUBCASE("missing functions map")
    {
        try {
            parse_normalized(R"({"address":"0x2","name":"m","structs":{}})");
            FAIL("no error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::SchemaError);
            CHECK(e.subject() == "functions");
        }
    }
    SUBCASE("mistyped field names its path")
    {
        try {
            parse_normalized(R"({"address":"0x2","name":"m","structs":{},"exposedFunctions":{"f":{"visibility":"Public",
                "isEntry":"yes","typeParameters":[],"parameters":[],"return":[]}}})");
            FAIL("no error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::SchemaError);
            CHECK(e.subject().find("isEntry") != std::string::npos);
        }
        CHECK(kind_of([] { parse_normalized("{not json"); }) == ErrorKind::SchemaError);
    }
    SUBCASE("to_normalized is inverse")
    {
        auto ir = parse_disassembly(test::corpus_file("02_vault", ".disasm"));
        CHECK(parse_normalized_doc(to_normalized(ir)) == ir);
    }
}

TEST_CASE("dual-parse agreement on every fixture with both representations")
{
    auto stems = test::corpus_stems(".json");
    CHECK(stems.size() >= 5);
    for (const auto& stem : stems) {
        CAPTURE(stem);
        auto a = parse_disassembly(test::corpus_file(stem, ".disasm"));
        auto b = parse_normalized(test::corpus_file(stem, ".json"));
        CHECK(fingerprints(a) == fingerprints(b));
        CHECK(a == b);
    }
}

TEST_CASE("every disassembly fixture parses and re-parses from its interface")
{
    auto stems = test::corpus_stems(".disasm");
    CHECK(stems.size() >= 10);
    for (const auto& stem : stems) {
        CAPTURE(stem);
        auto ir = parse_disassembly(test::corpus_file(stem, ".disasm"));
        CHECK_FALSE(ir.functions.empty());
        auto stub = render_stub_module(ir);
        CHECK(render_stub_module(ir) == stub);
        auto back = parse_disassembly(stub);
        CHECK(fingerprints(back) == fingerprints(ir));
        CHECK(back.structs == ir.structs);
        CHECK(back.constants == ir.constants);
    }
}

TEST_CASE("interface rendering")
{
    auto ir = parse_disassembly("module 0x2::m { public fun f(): u64 { 1 } }");
    auto text = render_interface(ir);
    CHECK(text == "    public fun f(): u64;\n");
    CHECK(render_interface(ir) == text);
}

TEST_CASE("fingerprint basics")
{
    const Scope scope(Address::parse("0x2"), "m");
    auto a = parse_function("fun f(x: u64) {}", scope);
    auto b = parse_function("fun f(v0: u64) {}", scope);
    CHECK(fingerprint(a) == fingerprint(b));
    CHECK(fingerprint(parse_function("public fun f(x: u64) {}", scope)) != fingerprint(a));
    CHECK(fingerprint(parse_function("fun f<T: copy>(x: T) {}", scope)) !=
          fingerprint(parse_function("fun f<T: drop>(x: T) {}", scope)));
}

namespace {

// Small alphabet so that random pairs collide often enough to exercise both
// branches of the equivalence.
struct SigGen {
    std::mt19937 rng;

    int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); }

    MoveType type(int depth, int tparams, bool allow_ref)
    {
        int choice = pick(depth > 1 ? 4 : 7);
        switch (choice) {
        case 0: return MoveType::primitive(pick(2) ? K::U64 : K::Bool);
        case 1: return MoveType::primitive(pick(2) ? K::Address : K::U8);
        case 2:
            return tparams > 0 ? MoveType::type_parameter(static_cast<std::uint16_t>(pick(tparams)))
                               : MoveType::primitive(K::U128);
        case 3: return obj("coin", pick(2) ? "Coin" : "TreasuryCap");
        case 4: return MoveType::vector_of(type(depth + 1, tparams, false));
        case 5: {
            auto t = obj("coin", "Coin");
            t.args.push_back(type(depth + 1, tparams, false));
            return t;
        }
        default:
            if (!allow_ref)
                return MoveType::primitive(K::U64);
            return MoveType::reference(type(depth + 1, tparams, false), pick(2) == 0);
        }
    }

    FunctionSig sig()
    {
        FunctionSig s;
        s.name = pick(3) ? "f" : "g";
        s.visibility = static_cast<Visibility>(pick(3));
        s.is_entry = pick(2);
        int ntp = pick(3);
        for (int i = 0; i < ntp; ++i)
            s.type_params.emplace_back(static_cast<std::uint8_t>(pick(16)));
        int np = pick(3);
        for (int i = 0; i < np; ++i)
            s.params.push_back({pick(2) ? std::optional<std::string>("p" + std::to_string(pick(5))) : std::nullopt,
                                type(0, ntp, true)});
        int nr = pick(3);
        for (int i = 0; i < nr; ++i)
            s.returns.push_back(type(0, ntp, true));
        return s;
    }

    /// A copy with parameter names scrambled and, half the time, one small
    /// structural change.
    FunctionSig variant(const FunctionSig& base)
    {
        FunctionSig v = base;
        for (auto& p : v.params)
            p.name = pick(2) ? std::optional<std::string>("q" + std::to_string(pick(9))) : std::nullopt;
        if (pick(2) == 0)
            return v;
        switch (pick(6)) {
        case 0: v.is_entry = !v.is_entry; break;
        case 1: v.visibility = static_cast<Visibility>((static_cast<int>(v.visibility) + 1) % 3); break;
        case 2:
            if (!v.params.empty())
                v.params[pick(static_cast<int>(v.params.size()))].type = type(0, static_cast<int>(v.type_params.size()), true);
            break;
        case 3: v.returns.push_back(MoveType::primitive(K::U64)); break;
        case 4:
            if (!v.type_params.empty())
                v.type_params[0] = AbilitySet(static_cast<std::uint8_t>(pick(16)));
            break;
        default: v.name = pick(2) ? "f" : "h"; break;
        }
        return v;
    }
};

bool same_type(const MoveType& a, const MoveType& b)
{
    if (a.kind != b.kind || a.args.size() != b.args.size())
        return false;
    if (a.kind == K::Datatype && (a.address.hex() != b.address.hex() || a.module != b.module || a.name != b.name))
        return false;
    if (a.kind == K::TypeParameter && a.param_index != b.param_index)
        return false;
    for (std::size_t i = 0; i < a.args.size(); ++i)
        if (!same_type(a.args[i], b.args[i]))
            return false;
    return true;
}

/// Brute-force structural comparison that ignores parameter names.
bool structurally_equal(const FunctionSig& a, const FunctionSig& b)
{
    if (a.name != b.name || a.visibility != b.visibility || a.is_entry != b.is_entry)
        return false;
    if (a.type_params.size() != b.type_params.size() || a.params.size() != b.params.size() ||
        a.returns.size() != b.returns.size())
        return false;
    for (std::size_t i = 0; i < a.type_params.size(); ++i)
        if (a.type_params[i].bits() != b.type_params[i].bits())
            return false;
    for (std::size_t i = 0; i < a.params.size(); ++i)
        if (!same_type(a.params[i].type, b.params[i].type))
            return false;
    for (std::size_t i = 0; i < a.returns.size(); ++i)
        if (!same_type(a.returns[i], b.returns[i]))
            return false;
    return true;
}

} // namespace

TEST_CASE("fingerprint equality agrees with the structural comparator on random pairs")
{
    SigGen gen{std::mt19937(20240917)};
    int equal = 0, different = 0;
    for (int i = 0; i < 400; ++i) {
        auto a = gen.sig();
        auto b = (i % 4 == 3) ? gen.sig() : gen.variant(a);
        bool oracle = structurally_equal(a, b);
        CAPTURE(fingerprint(a));
        CAPTURE(fingerprint(b));
        CHECK((fingerprint(a) == fingerprint(b)) == oracle);
        (oracle ? equal : different)++;
    }
    CHECK(equal >= 20);
    CHECK(different >= 20);
}
