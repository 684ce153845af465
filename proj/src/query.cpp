#include "ctfbounds/query.hpp"

#include <cctype>
#include <sstream>

#include "ctfbounds/errors.hpp"

namespace ctf {

std::string CtfTerm::alias() const {
    if (intervention.empty()) return variable;
    std::string out = variable + "@{";
    bool first = true;
    for (const auto& [var, val] : intervention) {
        if (!first) out += ",";
        first = false;
        out += var + "=" + std::to_string(val);
    }
    return out + "}";
}

namespace {

class Parser {
public:
    explicit Parser(const std::string& text) : text_(text) {}

    CtfQuery parse() {
        skip_ws();
        char head = peek();
        CtfQuery q;
        if (head == 'P' && peek_at(1) == '[') {
            q.kind = CtfQuery::Kind::Probability;
            pos_ += 2;
            parse_conjunction(q);
        } else if (head == 'E' && peek_at(1) == '[') {
            q.kind = CtfQuery::Kind::Expectation;
            pos_ += 2;
            q.expectation = parse_linear(q);
        } else {
            fail("expected 'P[' or 'E['");
        }
        expect(']');
        skip_ws();
        if (pos_ != text_.size()) fail("trailing input after query");
        if (q.terms.empty()) fail("query must reference at least one counterfactual term");
        return q;
    }

private:
    void parse_conjunction(CtfQuery& q) {
        q.body.push_back(parse_comparison(q));
        skip_ws();
        while (peek() == '&') {
            ++pos_;
            q.body.push_back(parse_comparison(q));
            skip_ws();
        }
    }

    Comparison parse_comparison(CtfQuery& q) {
        Comparison c;
        c.lhs = parse_linear(q);
        skip_ws();
        long long shift = 0;
        if (peek() == '=') {
            ++pos_;
            c.cmp = Cmp::Eq;
        } else if (peek() == '<') {
            ++pos_;
            if (peek() == '=') {
                ++pos_;
            } else {
                shift = -1;  // a < b  =>  a <= b-1
            }
            c.cmp = Cmp::Le;
        } else if (peek() == '>') {
            ++pos_;
            if (peek() == '=') {
                ++pos_;
            } else {
                shift = 1;  // a > b  =>  a >= b+1
            }
            c.cmp = Cmp::Ge;
        } else {
            fail("expected comparator '=', '<=', '>=', '<' or '>'");
        }
        c.rhs = parse_int() + shift - c.lhs.constant;
        c.lhs.constant = 0;
        if (c.lhs.coeffs.empty()) fail("comparison has no counterfactual term on its left side");
        return c;
    }

    LinearForm parse_linear(CtfQuery& q) {
        LinearForm lin;
        int sign = 1;
        skip_ws();
        if (peek() == '-') {
            ++pos_;
            sign = -1;
        } else if (peek() == '+') {
            ++pos_;
        }
        parse_signed_term(q, lin, sign);
        for (;;) {
            skip_ws();
            if (peek() == '+') {
                ++pos_;
                parse_signed_term(q, lin, 1);
            } else if (peek() == '-') {
                ++pos_;
                parse_signed_term(q, lin, -1);
            } else {
                break;
            }
        }
        return lin;
    }

    void parse_signed_term(CtfQuery& q, LinearForm& lin, int sign) {
        skip_ws();
        if (std::isdigit(static_cast<unsigned char>(peek()))) {
            long long k = parse_int();
            skip_ws();
            if (peek() == '*') {
                ++pos_;
                int idx = parse_term(q);
                add_coeff(lin, static_cast<int>(sign * k), idx);
            } else {
                lin.constant += sign * k;
            }
            return;
        }
        int idx = parse_term(q);
        add_coeff(lin, sign, idx);
    }

    static void add_coeff(LinearForm& lin, int coeff, int term_idx) {
        for (auto& [c, t] : lin.coeffs) {
            if (t == term_idx) {
                c += coeff;
                return;
            }
        }
        lin.coeffs.emplace_back(coeff, term_idx);
    }

    int parse_term(CtfQuery& q) {
        CtfTerm term;
        term.variable = parse_ident();
        skip_ws();
        if (peek() == '@') {
            ++pos_;
            expect('{');
            for (;;) {
                std::string var = parse_ident();
                expect('=');
                long long val = parse_int();
                if (!term.intervention.emplace(var, static_cast<int>(val)).second) {
                    fail("variable '" + var + "' intervened twice in one term");
                }
                skip_ws();
                if (peek() == ',') {
                    ++pos_;
                    continue;
                }
                break;
            }
            expect('}');
        }
        if (term.intervention.count(term.variable)) {
            fail("term variable '" + term.variable + "' appears in its own intervention");
        }
        for (size_t i = 0; i < q.terms.size(); ++i) {
            if (q.terms[i] == term) return static_cast<int>(i);
        }
        q.terms.push_back(std::move(term));
        return static_cast<int>(q.terms.size() - 1);
    }

    std::string parse_ident() {
        skip_ws();
        size_t start = pos_;
        if (pos_ < text_.size() &&
            (std::isalpha(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
            ++pos_;
            while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
                                           text_[pos_] == '_')) {
                ++pos_;
            }
        }
        if (start == pos_) fail("expected identifier");
        return text_.substr(start, pos_ - start);
    }

    long long parse_int() {
        skip_ws();
        size_t start = pos_;
        if (peek() == '-') ++pos_;
        size_t digits = pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        if (pos_ == digits) fail("expected integer");
        return std::stoll(text_.substr(start, pos_ - start));
    }

    void expect(char c) {
        skip_ws();
        if (peek() != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }
    char peek_at(size_t off) const {
        return pos_ + off < text_.size() ? text_[pos_ + off] : '\0';
    }
    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ValidationError("query syntax error at position " + std::to_string(pos_) + ": " + msg);
    }

    const std::string& text_;
    size_t pos_ = 0;
};

}  // namespace

CtfQuery parse_query(const std::string& text) { return Parser(text).parse(); }

CtfQuery parse_query(const std::string& text, const CausalDiagram& diagram) {
    CtfQuery q = Parser(text).parse();
    for (const auto& term : q.terms) {
        if (!diagram.has_endogenous(term.variable)) {
            throw ValidationError("unknown variable '" + term.variable + "' in query");
        }
        for (const auto& [var, val] : term.intervention) {
            int v = diagram.endo_index(var);
            if (v < 0) throw ValidationError("unknown variable '" + var + "' in intervention");
            if (val < 0 || val >= diagram.card(v)) {
                throw ValidationError("value " + std::to_string(val) + " out of range for '" + var +
                                      "' (card " + std::to_string(diagram.card(v)) + ")");
            }
        }
    }
    return q;
}

namespace {

std::string render_linear(const CtfQuery& q, const LinearForm& lin, bool with_constant) {
    std::string out;
    bool first = true;
    for (const auto& [coeff, idx] : lin.coeffs) {
        int mag = coeff < 0 ? -coeff : coeff;
        if (first) {
            if (coeff < 0) out += "-";
        } else {
            out += coeff < 0 ? " - " : " + ";
        }
        first = false;
        if (mag != 1) out += std::to_string(mag) + "*";
        out += q.terms[idx].alias();
    }
    if (with_constant && lin.constant != 0) {
        out += lin.constant < 0 ? " - " : " + ";
        long long mag = lin.constant < 0 ? -lin.constant : lin.constant;
        out += std::to_string(mag);
    }
    return out;
}

}  // namespace

std::string serialize_query(const CtfQuery& q) {
    std::string out;
    if (q.kind == CtfQuery::Kind::Expectation) {
        out = "E[" + render_linear(q, q.expectation, true) + "]";
        return out;
    }
    out = "P[";
    for (size_t i = 0; i < q.body.size(); ++i) {
        if (i) out += " & ";
        const auto& c = q.body[i];
        out += render_linear(q, c.lhs, false);
        switch (c.cmp) {
            case Cmp::Eq: out += " = "; break;
            case Cmp::Le: out += " <= "; break;
            case Cmp::Ge: out += " >= "; break;
        }
        out += std::to_string(c.rhs);
    }
    return out + "]";
}

double evaluate_event(const CtfQuery& q, const std::vector<int>& term_values) {
    if (term_values.size() < q.terms.size()) {
        throw ValidationError("evaluate_event: missing term values");
    }
    auto value_of = [&](const LinearForm& lin) {
        long long acc = lin.constant;
        for (const auto& [coeff, idx] : lin.coeffs) acc += static_cast<long long>(coeff) * term_values[idx];
        return acc;
    };
    if (q.kind == CtfQuery::Kind::Expectation) {
        return static_cast<double>(value_of(q.expectation));
    }
    for (const auto& c : q.body) {
        long long lhs = value_of(c.lhs);
        bool ok = c.cmp == Cmp::Eq ? lhs == c.rhs : (c.cmp == Cmp::Le ? lhs <= c.rhs : lhs >= c.rhs);
        if (!ok) return 0.0;
    }
    return 1.0;
}

std::pair<double, double> query_value_range(const CtfQuery& q, const CausalDiagram& diagram) {
    if (q.kind == CtfQuery::Kind::Probability) return {0.0, 1.0};
    long long lo = q.expectation.constant, hi = q.expectation.constant;
    for (const auto& [coeff, idx] : q.expectation.coeffs) {
        int v = diagram.endo_index(q.terms[idx].variable);
        long long top = static_cast<long long>(coeff) * (diagram.card(v) - 1);
        lo += std::min<long long>(0, top);
        hi += std::max<long long>(0, top);
    }
    return {static_cast<double>(lo), static_cast<double>(hi)};
}

}  // namespace ctf
