#include "mad/util/lexer.hpp"

#include "mad/error.hpp"

#include <array>
#include <cctype>

namespace mad::util {

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

constexpr std::array<std::string_view, 9> kTwoCharPuncts = {"::", "->", "=>", "==", "!=", "&&", "||", "..", "+="};

// Returns the index one past the closing quote of a string starting at `i`
// (which points at the opening quote).
std::size_t scan_string(std::string_view text, std::size_t i, std::size_t line)
{
    const std::size_t start = i;
    ++i;
    while (i < text.size()) {
        if (text[i] == '\\' && i + 1 < text.size()) {
            i += 2;
            continue;
        }
        if (text[i] == '"')
            return i + 1;
        ++i;
    }
    throw Error(ErrorKind::SyntaxError, "string literal", "unterminated string", line ? line : start);
}

} // namespace

std::vector<Token> lex(std::string_view text, bool keep_comments)
{
    std::vector<Token> out;
    std::size_t i = 0;
    std::size_t line = 1;
    auto emit = [&](TokenKind kind, std::size_t begin, std::size_t end, std::size_t at_line) {
        out.push_back(Token{kind, text.substr(begin, end - begin), begin, at_line});
    };

    while (i < text.size()) {
        const char c = text[i];
        if (c == '\n') {
            ++line;
            ++i;
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        const std::size_t begin = i;
        const std::size_t begin_line = line;

        if (c == '/' && i + 1 < text.size() && text[i + 1] == '/') {
            while (i < text.size() && text[i] != '\n')
                ++i;
            if (keep_comments)
                emit(TokenKind::Comment, begin, i, begin_line);
            continue;
        }
        if (c == '/' && i + 1 < text.size() && text[i + 1] == '*') {
            i += 2;
            int depth = 1;
            while (i < text.size() && depth > 0) {
                if (text[i] == '\n')
                    ++line;
                if (text.compare(i, 2, "/*") == 0) {
                    ++depth;
                    i += 2;
                } else if (text.compare(i, 2, "*/") == 0) {
                    --depth;
                    i += 2;
                } else {
                    ++i;
                }
            }
            if (depth > 0)
                throw Error(ErrorKind::SyntaxError, "block comment", "unterminated comment", begin_line);
            if (keep_comments)
                emit(TokenKind::Comment, begin, i, begin_line);
            continue;
        }
        if ((c == 'b' || c == 'x') && i + 1 < text.size() && text[i + 1] == '"') {
            i = scan_string(text, i + 1, begin_line);
            emit(TokenKind::String, begin, i, begin_line);
            continue;
        }
        if (c == '"') {
            i = scan_string(text, i, begin_line);
            for (std::size_t k = begin; k < i; ++k)
                if (text[k] == '\n')
                    ++line;
            emit(TokenKind::String, begin, i, begin_line);
            continue;
        }
        if (ident_start(c)) {
            while (i < text.size() && ident_char(text[i]))
                ++i;
            emit(TokenKind::Ident, begin, i, begin_line);
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            // Covers decimal, 0x-hex and type-suffixed literals such as 10u64 / 1_000.
            while (i < text.size() && ident_char(text[i]))
                ++i;
            emit(TokenKind::Number, begin, i, begin_line);
            continue;
        }
        bool two = false;
        if (i + 1 < text.size()) {
            const std::string_view pair = text.substr(i, 2);
            for (auto p : kTwoCharPuncts)
                if (pair == p) {
                    two = true;
                    break;
                }
        }
        i += two ? 2 : 1;
        emit(TokenKind::Punct, begin, i, begin_line);
    }
    return out;
}

std::string normalize_whitespace(std::string_view text)
{
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    std::size_t i = 0;
    auto flush_space = [&] {
        if (pending_space && !out.empty())
            out.push_back(' ');
        pending_space = false;
    };
    while (i < text.size()) {
        const char c = text[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = true;
            ++i;
            continue;
        }
        flush_space();
        const bool string_start = c == '"' || ((c == 'b' || c == 'x') && i + 1 < text.size() && text[i + 1] == '"' &&
                                               (i == 0 || !ident_char(text[i - 1])));
        if (string_start) {
            const std::size_t quote = c == '"' ? i : i + 1;
            std::size_t end = quote + 1;
            while (end < text.size() && text[end] != '"') {
                if (text[end] == '\\')
                    ++end;
                ++end;
            }
            end = std::min(end + 1, text.size());
            out.append(text.substr(i, end - i));
            i = end;
            continue;
        }
        out.push_back(c);
        ++i;
    }
    return out;
}

std::vector<std::string> token_texts(std::string_view text)
{
    std::vector<std::string> out;
    for (const auto& t : lex(text, false))
        out.emplace_back(t.text);
    return out;
}

bool token_equivalent(std::string_view a, std::string_view b)
{
    return token_texts(a) == token_texts(b);
}

} // namespace mad::util
