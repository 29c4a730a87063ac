#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace mad::util {

enum class TokenKind { Ident, Number, String, Punct, Comment };

/// A token is a view into the lexed text; the text must outlive it.
struct Token {
    TokenKind kind;
    std::string_view text;
    std::size_t offset;
    std::size_t line;

    bool is(std::string_view s) const { return (kind == TokenKind::Punct || kind == TokenKind::Ident) && text == s; }
    bool is_ident() const { return kind == TokenKind::Ident; }
    std::size_t end() const { return offset + text.size(); }
};

/// Lexes Move-like source. Byte strings (b"..", x".."), plain strings and
/// comments are single tokens. Throws SyntaxError on unterminated literals.
std::vector<Token> lex(std::string_view text, bool keep_comments = false);

/// Collapses whitespace runs outside string literals and comments to a single
/// space and trims both ends.
std::string normalize_whitespace(std::string_view text);

/// Token texts of `text` with comments dropped.
std::vector<std::string> token_texts(std::string_view text);

/// True when both inputs lex to the same non-comment token sequence.
bool token_equivalent(std::string_view a, std::string_view b);

} // namespace mad::util
