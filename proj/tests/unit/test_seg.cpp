#include "mad/error.hpp"
#include "mad/ir/parser.hpp"
#include "mad/seg/segmentation.hpp"
#include "mad/util/lexer.hpp"
#include "support/fixtures.hpp"

#include <doctest.h>

#include <chrono>

using namespace mad;
using namespace mad::seg;

namespace {

std::vector<std::pair<std::string, std::string>> identity(const SplitResult& s)
{
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& c : s.chunks)
        out.emplace_back(c.name, c.raw_text);
    return out;
}

std::size_t non_space(std::string_view s)
{
    std::size_t n = 0;
    for (char c : s)
        n += !std::isspace(static_cast<unsigned char>(c));
    return n;
}

const char* kThree = R"(// header comment
module 0x2::three {
    use sui::transfer;
    use sui::object::{Self, UID};

    struct S has key { id: UID }

    const E: u64 = 1;

    public fun f1(): u64 { 1 }

    /// doc for f2
    fun f2(x: u64): u64 {
        if (x > 0) { while (x > 1) { x = x - 1; }; };
        x
    }

    entry fun f3(s: S) { let S { id } = s; object::delete(id); }
}
)";

} // namespace

TEST_CASE("split two functions and reassemble")
{
    const char* src = "module 0x2::m {\n  fun a() { }\n  fun b(): u8 { 1 }\n}\n";
    auto s = split_functions(src);
    REQUIRE(s.chunks.size() == 2);
    CHECK(s.chunks[0].name == "a");
    CHECK(s.chunks[1].name == "b");
    CHECK(util::normalize_whitespace(reassemble(s.header, identity(s))) == util::normalize_whitespace(src));
}

TEST_CASE("structs only")
{
    auto s = split_functions("module 0x2::m { struct A has drop { x: u8 } struct B { y: bool } }");
    CHECK(s.chunks.empty());
    CHECK(s.header.structs.size() == 2);
}

TEST_CASE("nested braces stay in one chunk")
{
    auto s = split_functions(kThree);
    REQUIRE(s.chunks.size() == 3);
    const auto& f2 = s.chunks[1].raw_text;
    CHECK(f2.find("/// doc for f2") == 0);
    // Bracket-depth oracle: the chunk closes exactly at depth zero.
    int depth = 0, min_after_open = 1;
    bool opened = false;
    for (std::size_t i = 0; i < f2.size(); ++i) {
        if (f2[i] == '{') {
            ++depth;
            opened = true;
        } else if (f2[i] == '}') {
            --depth;
            if (depth == 0 && i + 1 != f2.size())
                min_after_open = 0;
        }
    }
    CHECK(opened);
    CHECK(depth == 0);
    CHECK(min_after_open == 1);
    CHECK(f2.back() == '}');
}

TEST_CASE("split errors")
{
    try {
        split_functions("module 0x2::m {\n fun f() { if (x) { }\n");
        FAIL("no error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::UnbalancedBraces);
        CHECK(e.position() == 25); // innermost unclosed brace
    }
    try {
        split_functions("module 0x2::m { fun f() { } } }");
        FAIL("no error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::UnbalancedBraces);
        CHECK(e.position() == 30);
    }
    CHECK_THROWS_WITH_AS(split_functions("fun f() {}"), doctest::Contains("NoModuleDeclaration"), Error);
    CHECK_THROWS_AS(split_functions("module 0x2::m { fun f() {} fun f() {} }"), Error);
}

TEST_CASE("context building")
{
    auto ir = ir::parse_disassembly(kThree);
    auto s = segment(kThree, ir);
    REQUIRE(s.chunks.size() == 3);
    CHECK(s.chunks[1].signature.has_value());
    const auto ctx = build_context(s.header, ir, "f2");
    CHECK(ctx == s.chunks[1].context);
    CHECK(build_context(s.header, ir, "f2") == ctx);
    CHECK(ctx.find("module 0x2::three {") != std::string::npos);
    CHECK(ctx.find("use sui::transfer;") != std::string::npos);
    CHECK(ctx.find("struct S has key") != std::string::npos);
    CHECK(ctx.find("const E: u64 = 1;") != std::string::npos);
    CHECK(ctx.find("fun f1(): u64;") != std::string::npos);
    CHECK(ctx.find("fun f3(") != std::string::npos);
    CHECK(ctx.find("fun f2") == std::string::npos);
    CHECK(ctx.find("while") == std::string::npos);
    CHECK_THROWS_WITH_AS(build_context(s.header, ir, "nope"), doctest::Contains("UnknownFunction"), Error);

    const char* one = "module 0x2::one { fun only() {} }";
    auto ir1 = ir::parse_disassembly(one);
    auto s1 = segment(one, ir1);
    CHECK(s1.chunks[0].context.find("signatures only") == std::string::npos);
    CHECK(s1.chunks[0].context.find("module 0x2::one") != std::string::npos);
}

TEST_CASE("reassembly edge cases")
{
    auto s = split_functions(kThree);
    SUBCASE("empty outputs give a valid empty module")
    {
        auto text = reassemble(s.header, {});
        auto ir = ir::parse_disassembly(text);
        CHECK(ir.functions.empty());
        CHECK(ir.structs.size() == 1);
        CHECK(text.find("struct S") != std::string::npos);
    }
    SUBCASE("imports lifted from outputs are deduplicated")
    {
        auto text = reassemble(s.header, {{"f1", "use sui::transfer;\nuse sui::event;\npublic fun f1(): u64 { 1 }"},
                                          {"f2", "use sui::transfer;\nuse  sui::event;\nfun f2(x: u64): u64 { x }"}});
        auto count = [&](std::string_view needle) {
            std::size_t n = 0;
            for (auto p = text.find(needle); p != std::string::npos; p = text.find(needle, p + 1))
                ++n;
            return n;
        };
        CHECK(count("use sui::transfer;") == 1);
        CHECK(count("sui::event;") == 1);
        CHECK(text.find("use sui::event;") < text.find("struct S"));
    }
    SUBCASE("module-wrapped output is unwrapped and stray items dropped")
    {
        auto out = parse_function_output("module 0x2::three {\n const X: u8 = 1;\n fun f2(x: u64): u64 { x }\n}\n");
        CHECK(out.name == "f2");
        CHECK(out.dropped_items.size() == 1);
    }
    SUBCASE("missing and duplicate functions")
    {
        CHECK_THROWS_WITH_AS(reassemble(s.header, {{"f1", "// nothing here"}}), doctest::Contains("MissingFunction"), Error);
        CHECK_THROWS_WITH_AS(reassemble(s.header, {{"f1", "fun f1() {} fun f2() {}"}}),
                             doctest::Contains("DuplicateFunction"), Error);
        CHECK_THROWS_WITH_AS(reassemble(s.header, {{"f1", "fun f1() {}"}, {"f1b", "fun f1() {}"}}),
                             doctest::Contains("DuplicateFunction"), Error);
    }
}

TEST_CASE("corpus round-trip and chunk counts")
{
    auto stems = test::corpus_stems(".move");
    REQUIRE(stems.size() >= 10);
    std::vector<std::string> sources;
    for (const auto& stem : stems)
        sources.push_back(test::corpus_file(stem, ".move"));
    auto start = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < stems.size(); ++i) {
        CAPTURE(stems[i]);
        auto s = split_functions(sources[i]);
        auto back = reassemble(s.header, identity(s));
        CHECK(util::token_equivalent(back, sources[i]));
        CHECK(util::normalize_whitespace(back) == util::normalize_whitespace(sources[i]));
        // Header parts and chunks cover every non-whitespace character once.
        const auto& h = s.header;
        std::size_t covered = non_space(h.preamble) + non_space(h.declaration) + non_space(h.trailer) + non_space(h.postamble) + 1;
        for (const auto* group : {&h.imports, &h.structs, &h.constants, &h.others})
            for (const auto& item : *group)
                covered += non_space(item);
        for (const auto& c : s.chunks)
            covered += non_space(c.raw_text);
        CHECK(covered == non_space(sources[i]));
        auto ir = ir::parse_disassembly(test::corpus_file(stems[i], ".disasm"));
        CHECK(s.chunks.size() == ir.functions.size());
        for (std::size_t k = 0; k < s.chunks.size(); ++k)
            CHECK(s.chunks[k].name == ir.functions[k].name);
    }
    auto elapsed = std::chrono::steady_clock::now() - start;
    CHECK(elapsed < std::chrono::seconds(1));
}
