#include "mad/seg/segmentation.hpp"

#include "mad/error.hpp"
#include "mad/ir/render.hpp"
#include "mad/util/lexer.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <set>

namespace mad::seg {

using util::Token;
using util::TokenKind;

namespace {

enum class RawKind { Import, Struct, Constant, Function, Other };

struct RawItem {
    std::size_t first_tok; // first token, leading comments included
    std::size_t end_tok;   // one past the last token
    RawKind kind;
    std::string name;      // functions only
};

struct BodyScan {
    std::vector<RawItem> items;
    std::optional<std::size_t> trailer_first; // comments after the last item
};

bool is_comment(const Token& t) { return t.kind == TokenKind::Comment; }

// Verifies that every '{' has a matching '}'. Throws UnbalancedBraces with the
// byte offset of the offending brace.
void check_braces(const std::vector<Token>& toks)
{
    std::vector<std::size_t> open;
    for (const auto& t : toks) {
        if (t.kind != TokenKind::Punct)
            continue;
        if (t.text == "{") {
            open.push_back(t.offset);
        } else if (t.text == "}") {
            if (open.empty())
                throw Error(ErrorKind::UnbalancedBraces, "}", "closing brace without opener", t.offset);
            open.pop_back();
        }
    }
    if (!open.empty())
        throw Error(ErrorKind::UnbalancedBraces, "{", "unclosed brace", open.back());
}

std::size_t next_code(const std::vector<Token>& toks, std::size_t i, std::size_t end)
{
    while (i < end && is_comment(toks[i]))
        ++i;
    return i;
}

// Index of the first significant token after attributes and comments.
std::size_t skip_attributes(const std::vector<Token>& toks, std::size_t i, std::size_t end)
{
    i = next_code(toks, i, end);
    while (i + 1 < end && toks[i].is("#") && toks[next_code(toks, i + 1, end)].is("[")) {
        int depth = 0;
        for (i = next_code(toks, i + 1, end); i < end; ++i) {
            if (is_comment(toks[i]) || toks[i].kind == TokenKind::String)
                continue;
            if (toks[i].is("["))
                ++depth;
            else if (toks[i].is("]") && --depth == 0) {
                ++i;
                break;
            }
        }
        i = next_code(toks, i, end);
    }
    return i;
}

const std::set<std::string_view>& function_modifiers()
{
    static const std::set<std::string_view> kMods = {"public", "entry", "native", "inline", "macro"};
    return kMods;
}

RawKind classify(const std::vector<Token>& toks, std::size_t kw, std::size_t end, std::string& name)
{
    if (kw >= end)
        return RawKind::Other;
    const Token& t = toks[kw];
    if (t.is("use") || t.is("friend"))
        return RawKind::Import;
    if (t.is("const"))
        return RawKind::Constant;
    if (t.is("struct") || t.is("enum"))
        return RawKind::Struct;
    if (t.is("spec"))
        return RawKind::Other;
    std::size_t i = kw;
    while (i < end) {
        const Token& cur = toks[i];
        if (is_comment(cur)) {
            ++i;
            continue;
        }
        if (cur.is("struct") || cur.is("enum"))
            return RawKind::Struct;
        if (cur.is("public")) {
            ++i;
            const std::size_t n = next_code(toks, i, end);
            if (n < end && toks[n].is("(")) {
                while (i < end && !toks[i].is(")"))
                    ++i;
                ++i;
            }
            continue;
        }
        if (function_modifiers().contains(cur.text) && cur.kind == TokenKind::Ident) {
            ++i;
            continue;
        }
        if (cur.is("fun")) {
            const std::size_t n = next_code(toks, i + 1, end);
            if (n < end && toks[n].is_ident()) {
                name = std::string(toks[n].text);
                return RawKind::Function;
            }
            return RawKind::Other;
        }
        // Disassembler form: modifiers then `name(` with no `fun` keyword.
        if (cur.is_ident()) {
            const std::size_t n = next_code(toks, i + 1, end);
            if (n < end && (toks[n].is("(") || toks[n].is("<"))) {
                name = std::string(cur.text);
                return RawKind::Function;
            }
        }
        return RawKind::Other;
    }
    return RawKind::Other;
}

// Splits [begin, end) into module items. Item boundaries follow the module
// grammar: ';' at depth 0, or the closing '}' of a top-level block (plus a
// postfix `has ...;` clause).
BodyScan scan_items(const std::vector<Token>& toks, std::size_t begin, std::size_t end)
{
    BodyScan scan;
    std::size_t i = begin;
    while (i < end) {
        const std::size_t first = i;
        const std::size_t kw_raw = next_code(toks, i, end);
        if (kw_raw >= end) {
            scan.trailer_first = first;
            break;
        }
        int paren = 0;
        int bracket = 0;
        std::size_t k = kw_raw;
        bool done = false;
        while (k < end && !done) {
            const Token& t = toks[k];
            if (is_comment(t) || t.kind == TokenKind::String) {
                ++k;
                continue;
            }
            if (t.is("("))
                ++paren;
            else if (t.is(")"))
                --paren;
            else if (t.is("["))
                ++bracket;
            else if (t.is("]"))
                --bracket;
            else if (t.is(";") && paren <= 0 && bracket <= 0) {
                ++k;
                done = true;
                continue;
            } else if (t.is("{") && paren <= 0 && bracket <= 0) {
                int depth = 0;
                for (; k < end; ++k) {
                    if (toks[k].kind != TokenKind::Punct)
                        continue;
                    if (toks[k].is("{"))
                        ++depth;
                    else if (toks[k].is("}") && --depth == 0)
                        break;
                }
                if (k >= end)
                    throw Error(ErrorKind::UnbalancedBraces, "{", "unclosed brace", t.offset);
                ++k;
                const std::size_t n = next_code(toks, k, end);
                if (n < end && toks[n].is("has")) {
                    k = n;
                    while (k < end && !toks[k].is(";"))
                        ++k;
                    if (k < end)
                        ++k;
                } else if (n < end && toks[n].is(";")) {
                    k = n + 1;
                }
                done = true;
                continue;
            } else if (t.is("}")) {
                throw Error(ErrorKind::UnbalancedBraces, "}", "closing brace without opener", t.offset);
            }
            ++k;
        }
        if (!done)
            throw Error(ErrorKind::SyntaxError, "';' or '}'", "module item does not terminate", toks[kw_raw].line);
        RawItem item{first, k, RawKind::Other, {}};
        item.kind = classify(toks, skip_attributes(toks, kw_raw, k), k, item.name);
        scan.items.push_back(std::move(item));
        i = k;
    }
    return scan;
}

std::string slice(std::string_view text, const std::vector<Token>& toks, std::size_t first, std::size_t end)
{
    if (first >= end)
        return {};
    const std::size_t from = toks[first].offset;
    const std::size_t to = toks[end - 1].end();
    return std::string(text.substr(from, to - from));
}

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

struct ModuleSpan {
    std::size_t decl_first; // first token of the declaration (attributes included)
    std::size_t body_begin; // first token inside the module
    std::size_t body_end;   // the closing '}' (or toks.size() for `module x::y;`)
    bool braced;
};

std::optional<ModuleSpan> locate_module(const std::vector<Token>& toks)
{
    std::size_t i = next_code(toks, 0, toks.size());
    const std::size_t decl_first = i;
    i = skip_attributes(toks, i, toks.size());
    if (i >= toks.size() || !toks[i].is("module"))
        return std::nullopt;
    for (std::size_t k = i; k < toks.size(); ++k) {
        if (toks[k].is(";"))
            return ModuleSpan{decl_first, k + 1, toks.size(), false};
        if (toks[k].is("{")) {
            int depth = 0;
            for (std::size_t j = k; j < toks.size(); ++j) {
                if (toks[j].kind != TokenKind::Punct)
                    continue;
                if (toks[j].is("{"))
                    ++depth;
                else if (toks[j].is("}") && --depth == 0)
                    return ModuleSpan{decl_first, k + 1, j, true};
            }
            throw Error(ErrorKind::UnbalancedBraces, "{", "unclosed module brace", toks[k].offset);
        }
    }
    return std::nullopt;
}

void render_header_items(std::string& out, const ModuleHeader& header, const std::vector<std::string>& imports,
                         bool include_others)
{
    // Lifted imports (beyond the header's own) go right after the last header import.
    std::size_t last_import_slot = header.order.size();
    for (std::size_t s = 0; s < header.order.size(); ++s)
        if (header.order[s].kind == ModuleHeader::ItemKind::Import)
            last_import_slot = s;
    auto emit_extra_imports = [&] {
        for (std::size_t k = header.imports.size(); k < imports.size(); ++k)
            out += "    " + imports[k] + "\n";
    };
    if (last_import_slot == header.order.size())
        emit_extra_imports();
    for (std::size_t s = 0; s < header.order.size(); ++s) {
        const auto& slot = header.order[s];
        switch (slot.kind) {
        case ModuleHeader::ItemKind::Import: out += "    " + header.imports[slot.index] + "\n"; break;
        case ModuleHeader::ItemKind::Struct: out += "    " + header.structs[slot.index] + "\n"; break;
        case ModuleHeader::ItemKind::Constant: out += "    " + header.constants[slot.index] + "\n"; break;
        case ModuleHeader::ItemKind::Other:
            if (include_others)
                out += "    " + header.others[slot.index] + "\n";
            break;
        }
        if (s == last_import_slot)
            emit_extra_imports();
    }
}

} // namespace

SplitResult split_functions(std::string_view source)
{
    const auto toks = util::lex(source, true);
    check_braces(toks);
    const auto span = locate_module(toks);
    if (!span)
        throw Error(ErrorKind::NoModuleDeclaration, "module", "no `module` declaration found");

    SplitResult out;
    ModuleHeader& h = out.header;
    h.braced = span->braced;
    h.preamble = trim(source.substr(0, span->decl_first < toks.size() ? toks[span->decl_first].offset : 0));
    h.declaration = slice(source, toks, span->decl_first, span->body_begin);

    const auto scan = scan_items(toks, span->body_begin, span->body_end);
    std::set<std::string> seen;
    for (const auto& item : scan.items) {
        std::string text = slice(source, toks, item.first_tok, item.end_tok);
        switch (item.kind) {
        case RawKind::Function:
            if (!seen.insert(item.name).second)
                throw Error(ErrorKind::DuplicateFunction, item.name, "function defined twice");
            out.chunks.push_back(FunctionChunk{item.name, std::move(text), std::nullopt, {}});
            break;
        case RawKind::Import:
            h.order.push_back({ModuleHeader::ItemKind::Import, h.imports.size()});
            h.imports.push_back(std::move(text));
            break;
        case RawKind::Struct:
            h.order.push_back({ModuleHeader::ItemKind::Struct, h.structs.size()});
            h.structs.push_back(std::move(text));
            break;
        case RawKind::Constant:
            h.order.push_back({ModuleHeader::ItemKind::Constant, h.constants.size()});
            h.constants.push_back(std::move(text));
            break;
        case RawKind::Other:
            h.order.push_back({ModuleHeader::ItemKind::Other, h.others.size()});
            h.others.push_back(std::move(text));
            break;
        }
    }
    if (scan.trailer_first)
        h.trailer = slice(source, toks, *scan.trailer_first, span->body_end);
    if (span->braced && span->body_end + 1 < toks.size())
        h.postamble = trim(source.substr(toks[span->body_end].end()));
    return out;
}

std::string build_context(const ModuleHeader& header, const ir::ModuleIR& module, std::string_view current)
{
    if (!module.find_function(current))
        throw Error(ErrorKind::UnknownFunction, std::string(current), "not declared in module " + module.name);
    std::string out = header.declaration + "\n";
    render_header_items(out, header, header.imports, false);
    bool any = false;
    for (const auto& f : module.functions) {
        if (f.name == current)
            continue;
        if (!any) {
            out += "    // Other functions in this module (signatures only)\n";
            any = true;
        }
        out += "    " + ir::render_signature(f) + ";\n";
    }
    if (header.braced)
        out += "}\n";
    return out;
}

SplitResult segment(std::string_view source, const ir::ModuleIR& module)
{
    SplitResult out = split_functions(source);
    for (auto& chunk : out.chunks) {
        if (const auto* sig = module.find_function(chunk.name)) {
            chunk.signature = *sig;
            chunk.context = build_context(out.header, module, chunk.name);
        }
    }
    return out;
}

FunctionOutput parse_function_output(std::string_view text, std::string_view label)
{
    const std::string subject(label.empty() ? std::string_view("output") : label);
    std::vector<Token> toks;
    try {
        toks = util::lex(text, true);
        check_braces(toks);
    } catch (const Error& e) {
        throw Error(ErrorKind::MissingFunction, subject, e.what());
    }
    std::size_t begin = 0;
    std::size_t end = toks.size();
    if (auto span = locate_module(toks)) {
        begin = span->body_begin;
        end = span->body_end;
    }

    BodyScan scan;
    try {
        scan = scan_items(toks, begin, end);
    } catch (const Error& e) {
        throw Error(ErrorKind::MissingFunction, subject, e.what());
    }

    FunctionOutput out;
    bool found = false;
    for (const auto& item : scan.items) {
        std::string item_text = slice(text, toks, item.first_tok, item.end_tok);
        switch (item.kind) {
        case RawKind::Function:
            if (found)
                throw Error(ErrorKind::DuplicateFunction, item.name, "output for " + subject + " defines more than one function");
            found = true;
            out.name = item.name;
            out.function_text = std::move(item_text);
            break;
        case RawKind::Import: out.lifted_imports.push_back(std::move(item_text)); break;
        default:
            spdlog::warn("dropping module-level item emitted inside function output for {}: {}", subject,
                         util::normalize_whitespace(item_text).substr(0, 60));
            out.dropped_items.push_back(std::move(item_text));
            break;
        }
    }
    if (!found)
        throw Error(ErrorKind::MissingFunction, subject, "no function definition in output");
    return out;
}

std::string reassemble(const ModuleHeader& header, const std::vector<std::pair<std::string, std::string>>& outputs)
{
    std::vector<std::string> imports = header.imports;
    std::set<std::string> import_keys;
    for (const auto& imp : imports)
        import_keys.insert(util::normalize_whitespace(imp));

    std::vector<std::string> functions;
    std::set<std::string> names;
    for (const auto& [label, text] : outputs) {
        FunctionOutput fo = parse_function_output(text, label);
        if (!names.insert(fo.name).second)
            throw Error(ErrorKind::DuplicateFunction, fo.name, "two outputs define the same function");
        for (auto& imp : fo.lifted_imports)
            if (import_keys.insert(util::normalize_whitespace(imp)).second)
                imports.push_back(std::move(imp));
        functions.push_back(std::move(fo.function_text));
    }

    std::string out;
    if (!header.preamble.empty())
        out += header.preamble + "\n";
    out += header.declaration + "\n";
    render_header_items(out, header, imports, true);
    for (const auto& fn : functions) {
        out += "\n    " + fn + "\n";
    }
    if (!header.trailer.empty())
        out += "    " + header.trailer + "\n";
    if (header.braced)
        out += "}\n";
    if (!header.postamble.empty())
        out += header.postamble + "\n";
    return out;
}

} // namespace mad::seg
