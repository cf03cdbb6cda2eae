#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ultrakin/errors.hpp"

namespace ultrakin {

/// One bosonic mode of the model: a chemical species with a bare mode energy.
/// The network text never sets energies; they default to zero and can be
/// assigned afterwards.
struct Species {
    std::string name;
    double ground_energy = 0.0;

    friend bool operator==(const Species&, const Species&) = default;
};

/// Stoichiometric entry: species index and positive multiplicity.
struct Term {
    int species = 0;
    int coeff = 1;

    friend bool operator==(const Term&, const Term&) = default;
};

/// One reversible reaction with a single non-negative rate constant.
/// An empty side represents the particle bath. A species never appears on
/// both sides, and within one side repeats are merged into the coefficient.
struct Reaction {
    std::vector<Term> reactants;
    std::vector<Term> products;
    double rate = 0.0;
    std::optional<int> rate_suffix; // display label: k, k1, k2, ...

    friend bool operator==(const Reaction&, const Reaction&) = default;
};

/// Parsed reaction network: species in first-appearance order plus the
/// reaction list.
class ReactionNetwork {
public:
    const std::vector<Species>& species() const { return species_; }
    const std::vector<Reaction>& reactions() const { return reactions_; }
    std::size_t n_species() const { return species_.size(); }

    std::optional<int> species_index(std::string_view name) const {
        for (std::size_t i = 0; i < species_.size(); ++i)
            if (species_[i].name == name) return static_cast<int>(i);
        return std::nullopt;
    }

    void set_ground_energy(std::string_view name, double energy) {
        auto idx = species_index(name);
        if (!idx) throw std::invalid_argument("unknown species: " + std::string(name));
        species_[*idx].ground_energy = energy;
    }

    /// Used by the parser; not part of the normal construction path.
    int intern_species(std::string_view name) {
        if (auto idx = species_index(name)) return *idx;
        species_.push_back({std::string(name), 0.0});
        return static_cast<int>(species_.size() - 1);
    }

    void add_reaction(Reaction r) { reactions_.push_back(std::move(r)); }

    friend bool operator==(const ReactionNetwork&, const ReactionNetwork&) = default;

private:
    std::vector<Species> species_;
    std::vector<Reaction> reactions_;
};

/// Ladder-operator content of one interaction term: for each species the
/// powers of the creation and annihilation operators. The Hermitian
/// conjugate is implied and not stored.
struct LadderFactor {
    int create = 0;
    int annihilate = 0;

    friend bool operator==(const LadderFactor&, const LadderFactor&) = default;
};

struct LadderMonomial {
    double rate = 0.0;
    std::vector<LadderFactor> factors; // indexed by species

    LadderMonomial conjugate() const {
        LadderMonomial c;
        c.rate = rate;
        c.factors.reserve(factors.size());
        for (const auto& f : factors) c.factors.push_back({f.annihilate, f.create});
        return c;
    }

    friend bool operator==(const LadderMonomial&, const LadderMonomial&) = default;
};

/// Two monomials generate the same Hermitian interaction M + M^dagger iff
/// they match directly or up to conjugation.
inline bool same_operator(const LadderMonomial& a, const LadderMonomial& b) {
    return a == b || a == b.conjugate();
}

/// Integer species weights defining a conserved charge Q = sum_s w_s n_s.
/// Canonical form: entries coprime, first nonzero entry positive.
struct ChargeVector {
    std::vector<long long> weights;

    friend bool operator==(const ChargeVector&, const ChargeVector&) = default;
};

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

namespace detail {

class NetworkScanner {
public:
    explicit NetworkScanner(std::string_view text) : text_(text) {}

    bool eof() const { return pos_ >= text_.size(); }
    char peek() const { return eof() ? '\0' : text_[pos_]; }
    int line() const { return line_; }
    int column() const { return col_; }

    void advance() {
        if (eof()) return;
        if (text_[pos_] == '\n') { ++line_; col_ = 1; } else { ++col_; }
        ++pos_;
    }

    /// Skip spaces and tabs but not newlines (newlines separate reactions).
    void skip_blanks() {
        while (!eof() && (peek() == ' ' || peek() == '\t' || peek() == '\r')) advance();
    }

    /// Skip any run of separators (newlines, semicolons) and blanks.
    void skip_separators() {
        while (!eof()) {
            char c = peek();
            if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == ';') advance();
            else break;
        }
    }

    bool at_separator() const {
        return eof() || peek() == '\n' || peek() == ';';
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(msg, line_, col_);
    }

    std::string_view take_while(bool (*pred)(char)) {
        std::size_t start = pos_;
        while (!eof() && pred(peek())) advance();
        return text_.substr(start, pos_ - start);
    }

    std::string_view remainder() const { return text_.substr(pos_); }
    void advance_by(std::size_t n) { for (std::size_t i = 0; i < n; ++i) advance(); }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }
inline bool is_ident_start(char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_';
}
inline bool is_ident_char(char c) { return is_ident_start(c) || is_digit(c); }

/// Parse "0" (bath) or a '+'-separated term list, merging repeated species.
inline std::vector<Term> parse_side(NetworkScanner& sc, ReactionNetwork& net) {
    sc.skip_blanks();
    if (sc.eof() || sc.at_separator()) sc.fail("expected reaction side");

    // Bare "0" marks the bath side.
    if (sc.peek() == '0') {
        int l = sc.line(), c = sc.column();
        auto digits = sc.take_while(is_digit);
        sc.skip_blanks();
        if (is_ident_start(sc.peek()))
            throw ParseError("non-positive coefficient", l, c);
        if (digits != "0")
            throw ParseError("unexpected integer without species", l, c);
        if (sc.peek() == '+')
            sc.fail("bath side cannot carry additional terms");
        return {};
    }

    std::vector<Term> terms;
    for (;;) {
        sc.skip_blanks();
        int coeff = 1;
        int l = sc.line(), c = sc.column();
        if (is_digit(sc.peek())) {
            auto digits = sc.take_while(is_digit);
            int value = 0;
            std::from_chars(digits.data(), digits.data() + digits.size(), value);
            if (value <= 0) throw ParseError("non-positive coefficient", l, c);
            coeff = value;
            sc.skip_blanks();
        }
        if (!is_ident_start(sc.peek()))
            sc.fail("expected species name");
        auto name = sc.take_while(is_ident_char);
        int idx = net.intern_species(name);

        bool merged = false;
        for (auto& t : terms)
            if (t.species == idx) { t.coeff += coeff; merged = true; break; }
        if (!merged) terms.push_back({idx, coeff});

        sc.skip_blanks();
        if (sc.peek() == '+') { sc.advance(); continue; }
        break;
    }
    return terms;
}

/// Parse "<k=FLOAT>" with an optional integer label suffix (k1 or k_1).
inline std::pair<double, std::optional<int>> parse_arrow(NetworkScanner& sc) {
    sc.skip_blanks();
    if (sc.peek() != '<') sc.fail("expected '<' starting the rate arrow");
    sc.advance();
    sc.skip_blanks();

    int l = sc.line(), c = sc.column();
    if (!is_ident_start(sc.peek())) sc.fail("expected rate label 'k'");
    auto label = sc.take_while(is_ident_char);
    if (label.empty() || label[0] != 'k')
        throw ParseError("expected rate label 'k'", l, c);
    std::string_view suffix = label.substr(1);
    if (!suffix.empty() && suffix[0] == '_') suffix.remove_prefix(1);
    std::optional<int> suffix_value;
    if (!suffix.empty()) {
        int v = 0;
        auto [p, ec] = std::from_chars(suffix.data(), suffix.data() + suffix.size(), v);
        if (ec != std::errc() || p != suffix.data() + suffix.size())
            throw ParseError("malformed rate label", l, c);
        suffix_value = v;
    }

    sc.skip_blanks();
    if (sc.peek() != '=') sc.fail("expected '=' after rate label");
    sc.advance();
    sc.skip_blanks();

    l = sc.line(); c = sc.column();
    auto rest = sc.remainder();
    double rate = 0.0;
    auto [p, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), rate);
    if (ec != std::errc() || p == rest.data())
        throw ParseError("malformed rate value", l, c);
    sc.advance_by(static_cast<std::size_t>(p - rest.data()));
    if (rate < 0.0) throw ParseError("negative rate", l, c);

    sc.skip_blanks();
    if (sc.peek() == ',' || is_ident_start(sc.peek()))
        sc.fail("duplicate rate spec");
    if (sc.peek() != '>') sc.fail("expected '>' closing the rate arrow");
    sc.advance();
    return {rate, suffix_value};
}

} // namespace detail

/// Parse reaction-network text. Grammar per reaction:
///   side <k[label]=rate> side
/// where a side is "0" (bath) or a '+'-separated list of optionally
/// coefficient-prefixed species names. Reactions are separated by newlines
/// or semicolons.
inline ReactionNetwork parse_network(std::string_view text) {
    detail::NetworkScanner sc(text);
    ReactionNetwork net;

    for (;;) {
        sc.skip_separators();
        if (sc.eof()) break;

        Reaction r;
        r.reactants = detail::parse_side(sc, net);
        auto [rate, suffix] = detail::parse_arrow(sc);
        r.rate = rate;
        r.rate_suffix = suffix;
        r.products = detail::parse_side(sc, net);

        if (r.reactants.empty() && r.products.empty())
            sc.fail("reaction with both sides empty");
        for (const auto& a : r.reactants)
            for (const auto& b : r.products)
                if (a.species == b.species)
                    sc.fail("species '" + net.species()[a.species].name +
                            "' appears on both sides");

        sc.skip_blanks();
        if (!sc.at_separator()) sc.fail("unexpected token after reaction");
        net.add_reaction(std::move(r));
    }

    if (net.reactions().empty())
        throw ParseError("network must contain at least one reaction", 1, 1);
    return net;
}

namespace detail {

/// Shortest decimal form that round-trips through parsing.
inline std::string format_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, p);
}

inline std::string side_text(const std::vector<Term>& side, const ReactionNetwork& net) {
    if (side.empty()) return "0";
    std::string out;
    for (std::size_t i = 0; i < side.size(); ++i) {
        if (i) out += " + ";
        if (side[i].coeff != 1) out += std::to_string(side[i].coeff);
        out += net.species()[side[i].species].name;
    }
    return out;
}

} // namespace detail

/// Canonical text form; parsing it reproduces the network exactly.
inline std::string pretty_print(const ReactionNetwork& net) {
    std::string out;
    for (const auto& r : net.reactions()) {
        out += detail::side_text(r.reactants, net);
        out += " <k";
        if (r.rate_suffix) out += std::to_string(*r.rate_suffix);
        out += "=" + detail::format_double(r.rate) + "> ";
        out += detail::side_text(r.products, net);
        out += "\n";
    }
    return out;
}

/// Interaction content of the network: one monomial per reaction with the
/// creation power equal to the reactant multiplicity and the annihilation
/// power equal to the product multiplicity. The assembled interaction is
/// sum_r k_r (M_r + M_r^dagger).
inline std::vector<LadderMonomial> interaction_terms(const ReactionNetwork& net) {
    std::vector<LadderMonomial> terms;
    terms.reserve(net.reactions().size());
    for (const auto& r : net.reactions()) {
        LadderMonomial m;
        m.rate = r.rate;
        m.factors.assign(net.n_species(), LadderFactor{});
        for (const auto& t : r.reactants) m.factors[t.species].create += t.coeff;
        for (const auto& t : r.products) m.factors[t.species].annihilate += t.coeff;
        terms.push_back(std::move(m));
    }
    return terms;
}

// ---------------------------------------------------------------------------
// Conserved charges: exact integer nullspace of the reaction balance matrix
// ---------------------------------------------------------------------------

namespace detail {

struct Fraction {
    long long num = 0;
    long long den = 1;

    static Fraction of(long long n, long long d = 1) {
        Fraction f{n, d};
        f.reduce();
        return f;
    }
    void reduce() {
        if (den < 0) { num = -num; den = -den; }
        long long g = std::gcd(num < 0 ? -num : num, den);
        if (g > 1) { num /= g; den /= g; }
        if (num == 0) den = 1;
    }
    bool zero() const { return num == 0; }

    friend Fraction operator*(Fraction a, Fraction b) { return of(a.num * b.num, a.den * b.den); }
    friend Fraction operator/(Fraction a, Fraction b) { return of(a.num * b.den, a.den * b.num); }
    friend Fraction operator-(Fraction a, Fraction b) {
        return of(a.num * b.den - b.num * a.den, a.den * b.den);
    }
};

} // namespace detail

/// Integer basis of species weight vectors w with, for every reaction,
/// sum_reactants w_s mu_s = sum_products w_s nu_s. Vectors are primitive,
/// first nonzero entry positive, ordered by the free column that generates
/// them. If the all-ones vector is conserved (every reaction balances a
/// weight-1 count) it is guaranteed to appear literally in the basis.
inline std::vector<ChargeVector> conserved_charges(const ReactionNetwork& net) {
    using detail::Fraction;
    const std::size_t S = net.n_species();
    const std::size_t R = net.reactions().size();

    // Balance matrix: D[r][s] = mu_{r,s} - nu_{r,s}; a conserved weight
    // vector w satisfies D w = 0. Entries are integers at this point.
    std::vector<std::vector<Fraction>> D(R, std::vector<Fraction>(S));
    for (std::size_t r = 0; r < R; ++r) {
        for (const auto& t : net.reactions()[r].reactants)
            D[r][t.species].num += t.coeff;
        for (const auto& t : net.reactions()[r].products)
            D[r][t.species].num -= t.coeff;
    }

    // Reduced row echelon form with exact arithmetic.
    std::vector<int> pivot_col;
    std::size_t row = 0;
    for (std::size_t col = 0; col < S && row < R; ++col) {
        std::size_t sel = row;
        while (sel < R && D[sel][col].zero()) ++sel;
        if (sel == R) continue;
        std::swap(D[sel], D[row]);
        Fraction inv = Fraction::of(D[row][col].den, D[row][col].num);
        for (std::size_t c = 0; c < S; ++c) D[row][c] = D[row][c] * inv;
        for (std::size_t r2 = 0; r2 < R; ++r2) {
            if (r2 == row || D[r2][col].zero()) continue;
            Fraction factor = D[r2][col];
            for (std::size_t c = 0; c < S; ++c)
                D[r2][c] = D[r2][c] - factor * D[row][c];
        }
        pivot_col.push_back(static_cast<int>(col));
        ++row;
    }

    std::vector<bool> is_pivot(S, false);
    for (int c : pivot_col) is_pivot[c] = true;

    std::vector<ChargeVector> basis;
    for (std::size_t f = 0; f < S; ++f) {
        if (is_pivot[f]) continue;
        // Solution with free column f set to 1, other free columns 0.
        std::vector<Fraction> v(S);
        v[f] = Fraction::of(1);
        for (std::size_t p = 0; p < pivot_col.size(); ++p)
            v[pivot_col[p]] = Fraction::of(0) - D[p][f];

        long long lcm = 1;
        for (const auto& x : v) lcm = std::lcm(lcm, x.den);
        std::vector<long long> w(S);
        for (std::size_t s = 0; s < S; ++s) w[s] = v[s].num * (lcm / v[s].den);

        long long g = 0;
        for (long long x : w) g = std::gcd(g, x < 0 ? -x : x);
        if (g > 1)
            for (auto& x : w) x /= g;
        for (long long x : w) {
            if (x == 0) continue;
            if (x < 0)
                for (auto& y : w) y = -y;
            break;
        }
        basis.push_back({std::move(w)});
    }

    // If every reaction balances plain particle count, surface the all-ones
    // charge literally (it always lies in the span in that case).
    bool ones_conserved = true;
    for (const auto& r : net.reactions()) {
        long long lhs = 0, rhs = 0;
        for (const auto& t : r.reactants) lhs += t.coeff;
        for (const auto& t : r.products) rhs += t.coeff;
        if (lhs != rhs) { ones_conserved = false; break; }
    }
    if (ones_conserved && !basis.empty()) {
        std::vector<long long> ones(S, 1);
        bool present = std::any_of(basis.begin(), basis.end(),
                                   [&](const ChargeVector& c) { return c.weights == ones; });
        if (!present) basis.front().weights = ones;
    }

    return basis;
}

} // namespace ultrakin
