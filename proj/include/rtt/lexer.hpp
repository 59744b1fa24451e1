#pragma once

#include "rtt/error.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace rtt {

enum class TokenKind { End, Ident, Int, String, Punct };

struct Token {
    TokenKind kind = TokenKind::End;
    std::string text;        // identifier, punctuation, or unquoted string body
    std::int64_t value = 0;  // for Int
    SourcePos pos;

    bool is(std::string_view punct) const { return kind == TokenKind::Punct && text == punct; }
    bool is_ident(std::string_view word) const { return kind == TokenKind::Ident && text == word; }
};

struct LexOptions {
    bool comments = true;  // `#` and `//` to end of line
    SourcePos origin{1, 1};
};

/// Tokenizes the whole input. Throws ParseError on stray characters or
/// unterminated strings.
std::vector<Token> tokenize(std::string_view text, const LexOptions& options = {});

/// Cursor over a token vector, shared by the recursive-descent parsers.
class TokenStream {
public:
    explicit TokenStream(std::vector<Token> tokens);

    const Token& peek(std::size_t ahead = 0) const;
    const Token& next();
    bool at_end() const { return peek().kind == TokenKind::End; }

    bool accept(std::string_view punct);
    bool accept_ident(std::string_view word);
    const Token& expect(std::string_view punct);
    void expect_ident(std::string_view word);
    std::string expect_name();
    std::int64_t expect_int();
    std::string expect_string();

    [[noreturn]] void fail(const std::string& message) const;
    [[noreturn]] static void fail_at(const Token& t, const std::string& message);

private:
    std::vector<Token> tokens_;
    std::size_t index_ = 0;
};

std::string describe(const Token& t);

} // namespace rtt
