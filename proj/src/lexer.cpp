#include "rtt/lexer.hpp"

#include <array>
#include <cctype>

namespace rtt {

namespace {

constexpr std::array<std::string_view, 10> kTwoCharPuncts = {
    "::", ":=", "==", "!=", "<>", "<=", ">=", "&&", "||", "->"};

constexpr std::string_view kOneCharPuncts = "()[]{},;:.+-*/%=<>!&|";

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

} // namespace

std::vector<Token> tokenize(std::string_view text, const LexOptions& options)
{
    std::vector<Token> out;
    int line = options.origin.line;
    int col = options.origin.column;
    std::size_t i = 0;

    auto advance = [&](std::size_t n) {
        for (std::size_t k = 0; k < n && i < text.size(); ++k, ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
    };

    while (i < text.size()) {
        char c = text[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            advance(1);
            continue;
        }
        if (options.comments && (c == '#' || (c == '/' && i + 1 < text.size() && text[i + 1] == '/'))) {
            while (i < text.size() && text[i] != '\n')
                advance(1);
            continue;
        }
        Token tok;
        tok.pos = {line, col};
        if (ident_start(c)) {
            std::size_t j = i;
            while (j < text.size() && ident_char(text[j]))
                ++j;
            tok.kind = TokenKind::Ident;
            tok.text = std::string(text.substr(i, j - i));
            advance(j - i);
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t j = i;
            std::int64_t v = 0;
            while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) {
                if (v > (INT64_MAX - 9) / 10)
                    throw ParseError(tok.pos, "integer literal too large");
                v = v * 10 + (text[j] - '0');
                ++j;
            }
            tok.kind = TokenKind::Int;
            tok.value = v;
            tok.text = std::string(text.substr(i, j - i));
            advance(j - i);
        } else if (c == '"') {
            std::size_t j = i + 1;
            std::string body;
            while (j < text.size() && text[j] != '"') {
                if (text[j] == '\n')
                    throw ParseError(tok.pos, "unterminated string");
                if (text[j] == '\\' && j + 1 < text.size()) {
                    body += text[j + 1];
                    j += 2;
                    continue;
                }
                body += text[j++];
            }
            if (j >= text.size())
                throw ParseError(tok.pos, "unterminated string");
            tok.kind = TokenKind::String;
            tok.text = std::move(body);
            advance(j + 1 - i);
        } else {
            tok.kind = TokenKind::Punct;
            bool matched = false;
            if (i + 1 < text.size()) {
                auto two = text.substr(i, 2);
                for (auto p : kTwoCharPuncts) {
                    if (two == p) {
                        tok.text = std::string(p);
                        advance(2);
                        matched = true;
                        break;
                    }
                }
            }
            if (!matched) {
                if (kOneCharPuncts.find(c) == std::string_view::npos)
                    throw ParseError(tok.pos, std::string("unexpected character '") + c + "'");
                tok.text = std::string(1, c);
                advance(1);
            }
        }
        out.push_back(std::move(tok));
    }
    Token end;
    end.pos = {line, col};
    out.push_back(end);
    return out;
}

std::string describe(const Token& t)
{
    switch (t.kind) {
    case TokenKind::End: return "end of input";
    case TokenKind::String: return "string \"" + t.text + "\"";
    default: return "'" + t.text + "'";
    }
}

TokenStream::TokenStream(std::vector<Token> tokens) : tokens_(std::move(tokens))
{
    if (tokens_.empty() || tokens_.back().kind != TokenKind::End)
        tokens_.push_back(Token{});
}

const Token& TokenStream::peek(std::size_t ahead) const
{
    std::size_t k = index_ + ahead;
    return k < tokens_.size() ? tokens_[k] : tokens_.back();
}

const Token& TokenStream::next()
{
    const Token& t = peek();
    if (index_ + 1 < tokens_.size())
        ++index_;
    return t;
}

bool TokenStream::accept(std::string_view punct)
{
    if (peek().is(punct)) {
        next();
        return true;
    }
    return false;
}

bool TokenStream::accept_ident(std::string_view word)
{
    if (peek().is_ident(word)) {
        next();
        return true;
    }
    return false;
}

const Token& TokenStream::expect(std::string_view punct)
{
    if (!peek().is(punct))
        fail("expected '" + std::string(punct) + "', found " + describe(peek()));
    return next();
}

void TokenStream::expect_ident(std::string_view word)
{
    if (!accept_ident(word))
        fail("expected '" + std::string(word) + "', found " + describe(peek()));
}

std::string TokenStream::expect_name()
{
    if (peek().kind != TokenKind::Ident)
        fail("expected identifier, found " + describe(peek()));
    return next().text;
}

std::int64_t TokenStream::expect_int()
{
    bool negative = accept("-");
    if (peek().kind != TokenKind::Int)
        fail("expected integer, found " + describe(peek()));
    auto v = next().value;
    return negative ? -v : v;
}

std::string TokenStream::expect_string()
{
    if (peek().kind != TokenKind::String)
        fail("expected quoted string, found " + describe(peek()));
    return next().text;
}

void TokenStream::fail(const std::string& message) const { fail_at(peek(), message); }

void TokenStream::fail_at(const Token& t, const std::string& message)
{
    throw ParseError(t.pos, message);
}

} // namespace rtt
