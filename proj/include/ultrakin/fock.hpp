#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "ultrakin/errors.hpp"
#include "ultrakin/reaction.hpp"

namespace ultrakin {

/// Guard against accidentally enormous product bases.
inline constexpr long long kDefaultDimensionCap = 2'000'000;

/// Per-species maximum occupation of the truncated Fock space.
struct FockCutoff {
    std::vector<int> max_occupation;

    static FockCutoff uniform(std::size_t n_species, int value) {
        return {std::vector<int>(n_species, value)};
    }

    int operator[](std::size_t s) const { return max_occupation[s]; }
    std::size_t size() const { return max_occupation.size(); }

    friend bool operator==(const FockCutoff&, const FockCutoff&) = default;
};

/// Occupation-number basis, either a full product basis (no charge) or one
/// charge sector. Sector states are stored lexicographically descending in
/// the first species; product states ascending.
struct SectorBasis {
    std::optional<ChargeVector> charge;
    long long charge_value = 0;
    FockCutoff cutoff;
    std::vector<std::vector<int>> states;
    bool descending = false;

    Eigen::Index dim() const { return static_cast<Eigen::Index>(states.size()); }
    std::size_t n_species() const { return cutoff.size(); }

    std::optional<Eigen::Index> index_of(std::span<const int> state) const {
        auto less = [this](std::span<const int> a, std::span<const int> b) {
            return descending ? std::lexicographical_compare(b.begin(), b.end(), a.begin(), a.end())
                              : std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
        };
        auto it = std::lower_bound(states.begin(), states.end(), state,
                                   [&](const std::vector<int>& a, std::span<const int> b) {
                                       return less(a, b);
                                   });
        if (it == states.end() || !std::equal(it->begin(), it->end(), state.begin(), state.end()))
            return std::nullopt;
        return static_cast<Eigen::Index>(it - states.begin());
    }

    friend bool operator==(const SectorBasis&, const SectorBasis&) = default;
};

/// Dense real-symmetric Hamiltonian on one basis.
struct HamiltonianBlock {
    SectorBasis basis;
    Eigen::MatrixXd matrix;
};

namespace detail {

/// Walk every admissible state of the unbounded sector (weights positive, so
/// the set is finite) in lexicographically descending order; any admissible
/// state outside the cutoff raises the clipped-sector error.
inline void enumerate_sector(const ChargeVector& charge, const FockCutoff& cutoff,
                             long long residual, std::size_t s, std::vector<int>& state,
                             std::vector<std::vector<int>>& out) {
    const std::size_t S = charge.weights.size();
    long long w = charge.weights[s];
    if (s == S - 1) {
        if (residual % w != 0) return;
        long long n = residual / w;
        state[s] = static_cast<int>(n);
        for (std::size_t i = 0; i < S; ++i)
            if (state[i] > cutoff[i])
                throw std::invalid_argument(
                    "cutoff-clipped sector: admissible occupation " +
                    std::to_string(state[i]) + " of species " + std::to_string(i) +
                    " exceeds cutoff " + std::to_string(cutoff[i]));
        out.push_back(state);
        return;
    }
    for (long long n = residual / w; n >= 0; --n) {
        state[s] = static_cast<int>(n);
        enumerate_sector(charge, cutoff, residual - n * w, s + 1, state, out);
    }
}

} // namespace detail

/// All occupation states with sum_s w_s n_s = value. Requires strictly
/// positive weights (otherwise the admissible set is infinite) and a cutoff
/// wide enough that no admissible state is clipped; both violations throw.
inline SectorBasis sector_basis(const ReactionNetwork& net, const ChargeVector& charge,
                                long long value, const FockCutoff& cutoff) {
    if (charge.weights.size() != net.n_species() || cutoff.size() != net.n_species())
        throw std::invalid_argument("sector_basis: charge/cutoff size mismatch");
    if (value < 0) throw std::invalid_argument("sector_basis: negative charge value");
    for (std::size_t s = 0; s < charge.weights.size(); ++s)
        if (charge.weights[s] <= 0)
            throw std::invalid_argument(
                "cutoff-clipped sector: weight of species " + std::to_string(s) +
                " is not positive, the admissible set is infinite");

    SectorBasis basis{charge, value, cutoff, {}, true};
    std::vector<int> state(net.n_species(), 0);
    detail::enumerate_sector(charge, cutoff, value, 0, state, basis.states);
    return basis;
}

/// Full truncated product basis in ascending lexicographic order.
inline SectorBasis product_basis(const ReactionNetwork& net, const FockCutoff& cutoff,
                                 long long dimension_cap = kDefaultDimensionCap) {
    if (cutoff.size() != net.n_species())
        throw std::invalid_argument("product_basis: cutoff size mismatch");
    long long dim = 1;
    for (std::size_t s = 0; s < cutoff.size(); ++s) {
        if (cutoff[s] < 0) throw std::invalid_argument("product_basis: negative cutoff");
        dim *= cutoff[s] + 1;
        if (dim > dimension_cap)
            throw std::invalid_argument(
                "product basis dimension exceeds cap of " + std::to_string(dimension_cap));
    }

    SectorBasis basis{std::nullopt, 0, cutoff, {}, false};
    basis.states.reserve(static_cast<std::size_t>(dim));
    std::vector<int> state(net.n_species(), 0);
    for (;;) {
        basis.states.push_back(state);
        std::size_t s = net.n_species();
        while (s > 0) {
            --s;
            if (state[s] < cutoff[s]) { ++state[s]; break; }
            state[s] = 0;
            if (s == 0) return basis;
        }
        if (net.n_species() == 0) return basis;
    }
}

/// Convenience cutoff for sector layouts: every populated sector with charge
/// value <= q_max fits unclipped when cutoff_s = ceil(q_max / w_s).
inline FockCutoff sector_cutoff_for(const ChargeVector& charge, long long q_max) {
    FockCutoff cutoff;
    cutoff.max_occupation.reserve(charge.weights.size());
    for (long long w : charge.weights) {
        if (w <= 0) throw std::invalid_argument("sector_cutoff_for: weights must be positive");
        cutoff.max_occupation.push_back(static_cast<int>((q_max + w - 1) / w));
    }
    return cutoff;
}

/// Assemble H = sum_s E_s n_s + sum_r k_r (M_r + M_r^T) on the given basis.
/// Monomial images falling outside the basis (truncation boundary or another
/// sector) are projected away.
inline HamiltonianBlock build_hamiltonian(const ReactionNetwork& net, const SectorBasis& basis) {
    const Eigen::Index d = basis.dim();
    const std::size_t S = net.n_species();
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(d, d);

    for (Eigen::Index i = 0; i < d; ++i) {
        double diag = 0.0;
        for (std::size_t s = 0; s < S; ++s)
            diag += net.species()[s].ground_energy * basis.states[i][s];
        H(i, i) += diag;
    }

    std::vector<int> image(S);
    for (const auto& mono : interaction_terms(net)) {
        if (mono.rate == 0.0) continue;
        for (Eigen::Index col = 0; col < d; ++col) {
            const auto& n = basis.states[col];
            double factor = mono.rate;
            bool dead = false;
            for (std::size_t s = 0; s < S; ++s) image[s] = n[s];
            for (std::size_t s = 0; s < S && !dead; ++s) {
                for (int a = 0; a < mono.factors[s].annihilate; ++a) {
                    if (image[s] == 0) { dead = true; break; }
                    factor *= std::sqrt(static_cast<double>(image[s]));
                    --image[s];
                }
            }
            if (dead) continue;
            for (std::size_t s = 0; s < S; ++s) {
                for (int c = 0; c < mono.factors[s].create; ++c) {
                    ++image[s];
                    factor *= std::sqrt(static_cast<double>(image[s]));
                }
            }
            auto row = basis.index_of(image);
            if (!row) continue;
            H(*row, col) += factor;
            H(col, *row) += factor;
        }
    }

    return {basis, std::move(H)};
}

/// Occupation of one species along the basis (diagonal of the number operator).
inline Eigen::VectorXd occupation_vector(const SectorBasis& basis, int species) {
    Eigen::VectorXd n(basis.dim());
    for (Eigen::Index i = 0; i < basis.dim(); ++i)
        n(i) = basis.states[i][species];
    return n;
}

/// Dense (diagonal) number operator of one species.
inline Eigen::MatrixXd number_matrix(const SectorBasis& basis, int species) {
    return occupation_vector(basis, species).asDiagonal();
}

/// Matrix elements <m| a_s |n> on the basis; images outside the basis are
/// projected away.
inline Eigen::MatrixXd annihilation_matrix(const SectorBasis& basis, int species) {
    const Eigen::Index d = basis.dim();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
    std::vector<int> image;
    for (Eigen::Index col = 0; col < d; ++col) {
        const auto& n = basis.states[col];
        if (n[species] == 0) continue;
        image = n;
        --image[species];
        if (auto row = basis.index_of(image))
            a(*row, col) = std::sqrt(static_cast<double>(n[species]));
    }
    return a;
}

/// Smallest cutoff whose Poisson tail mass beyond it stays below tail_tol,
/// for a coherent state with the given mean occupation.
inline int coherent_cutoff(double mean_occupation, double tail_tol = 1e-12) {
    if (mean_occupation < 0.0)
        throw std::invalid_argument("coherent_cutoff: negative mean occupation");
    if (mean_occupation == 0.0) return 0;
    double cumulative = 0.0;
    const int n_max = static_cast<int>(10.0 * mean_occupation) + 200;
    for (int n = 0; n <= n_max; ++n) {
        double log_p = -mean_occupation + n * std::log(mean_occupation) - std::lgamma(n + 1.0);
        cumulative += std::exp(log_p);
        if (1.0 - cumulative < tail_tol) return n;
    }
    throw NumericError("coherent_cutoff: tail tolerance not reached");
}

/// Debug dump of a Hamiltonian block as "row,col,value" CSV.
inline void dump_block_csv(const HamiltonianBlock& block, std::ostream& os) {
    os << "row,col,value\n";
    char buf[40];
    for (Eigen::Index r = 0; r < block.matrix.rows(); ++r)
        for (Eigen::Index c = 0; c < block.matrix.cols(); ++c) {
            if (block.matrix(r, c) == 0.0) continue;
            std::snprintf(buf, sizeof buf, "%.17g", block.matrix(r, c));
            os << r << ',' << c << ',' << buf << '\n';
        }
}

} // namespace ultrakin
