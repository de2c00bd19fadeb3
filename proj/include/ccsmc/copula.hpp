#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "combinatorics.hpp"
#include "generators.hpp"
#include "random.hpp"
#include "stable.hpp"

namespace ccsmc {

/// One node of a (possibly nested) Archimedean copula. Leaves are 0-based
/// coordinate indices attached directly to this node's generator.
struct CopulaNode {
    ArchimedeanGenerator generator;
    std::vector<std::size_t> leaves;
    std::vector<CopulaNode> children;

    std::size_t leaf_count() const {
        std::size_t n = leaves.size();
        for (const auto& c : children) n += c.leaf_count();
        return n;
    }
};

/// Flat or hierarchical Archimedean copula on [0,1]^d. Immutable once built.
class CopulaModel {
public:
    static CopulaModel flat(Family family, double theta, std::size_t dim) {
        if (dim == 0) throw std::invalid_argument("copula dimension must be positive");
        std::vector<std::size_t> leaves(dim);
        for (std::size_t i = 0; i < dim; ++i) leaves[i] = i;
        return CopulaModel(CopulaNode{ArchimedeanGenerator(family, theta), std::move(leaves), {}});
    }

    static CopulaModel nested(CopulaNode root) { return CopulaModel(std::move(root)); }

    std::size_t dim() const noexcept { return dim_; }
    bool is_flat() const noexcept { return root_.children.empty(); }
    const CopulaNode& root() const noexcept { return root_; }

    double cdf(std::span<const double> u) const {
        check_dim(u.size());
        for (double v : u)
            if (v <= 0.0) return 0.0;
        return root_.generator.psi(inner_sum(root_, u));
    }

    /// log c(u) for u in (0,1)^d. Non-finite output signals under/overflow
    /// at the cube boundary; callers clamp u first.
    double log_density(std::span<const double> u) const {
        check_dim(u.size());
        const auto& g = root_.generator;
        if (is_flat()) {
            double t = 0.0;
            double s = 0.0;
            for (double v : u) {
                t += g.psi_inv(v);
                s += std::log(std::fabs(g.psi_inv_prime(v)));
            }
            return g.log_abs_psi_deriv(static_cast<unsigned>(dim_), t) + s;
        }
        const NodeTerms terms = node_terms(root_, u);
        double c = 0.0;
        for (std::size_t m = 1; m < terms.blocks.size(); ++m)
            if (terms.blocks[m] != 0.0) c += g.psi_deriv(static_cast<unsigned>(m), terms.t) * terms.blocks[m];
        return std::log(c);
    }

    double density(std::span<const double> u) const { return std::exp(log_density(u)); }

    /// Marshall-Olkin draw; nested nodes draw their frailty conditionally on
    /// the parent's.
    void sample(Rng& rng, std::span<double> out) const {
        check_dim(out.size());
        const auto& g = root_.generator;
        if (g.family() == Family::frank && g.theta() < 0.0) {
            sample_frank_negative(rng, out);
            return;
        }
        sample_node(root_, g.sample_frailty(rng), rng, out);
    }

    std::vector<double> sample(Rng& rng) const {
        std::vector<double> u(dim_);
        sample(rng, u);
        return u;
    }

private:
    explicit CopulaModel(CopulaNode root) : root_(std::move(root)) {
        dim_ = root_.leaf_count();
        if (dim_ == 0) throw std::invalid_argument("copula has no coordinates");
        std::vector<int> seen(dim_, 0);
        validate(root_, seen);
        for (int s : seen)
            if (s != 1) throw std::invalid_argument("copula leaves must partition {1..d}");
        const auto& g = root_.generator;
        if (g.family() == Family::frank && g.theta() < 0.0 && dim_ != 2)
            throw std::invalid_argument("Frank with negative theta is a copula only for d = 2");
        if (dim_ > kMaxDerivativeOrder) throw std::invalid_argument("copula dimension too large");
    }

    void validate(const CopulaNode& node, std::vector<int>& seen) const {
        if (node.leaves.empty() && node.children.empty())
            throw std::invalid_argument("copula node without leaves or children");
        for (std::size_t i : node.leaves) {
            if (i >= seen.size()) throw std::invalid_argument("copula leaf index out of range");
            ++seen[i];
        }
        for (const auto& c : node.children) {
            if (node.generator.family() == Family::frank)
                throw std::invalid_argument("nested Frank copulas are not supported");
            if (c.generator.family() != node.generator.family())
                throw std::invalid_argument("nested copula nodes must share the parent's family");
            if (c.generator.theta() < node.generator.theta())
                throw std::invalid_argument("nested copula requires child theta >= parent theta");
            validate(c, seen);
        }
    }

    void check_dim(std::size_t n) const {
        if (n != dim_) throw std::invalid_argument("copula: dimension mismatch");
    }

    /// phi = psi_parent^-1 o psi_child; theta-ratio a = theta_p / theta_c.
    ///   Clayton: phi(t) = (1+t)^a - 1     Gumbel: phi(t) = t^a
    static double link(const CopulaNode& parent, const CopulaNode& child, double t) {
        const double a = parent.generator.theta() / child.generator.theta();
        if (std::isinf(t)) return t;
        if (parent.generator.family() == Family::clayton) return std::expm1(a * std::log1p(t));
        return std::pow(t, a);
    }

    /// phi^(k)(t) for k = 1..n.
    static std::vector<double> link_derivatives(const CopulaNode& parent, const CopulaNode& child,
                                                double t, unsigned n) {
        const double a = parent.generator.theta() / child.generator.theta();
        const double base = parent.generator.family() == Family::clayton ? 1.0 + t : t;
        std::vector<double> d(n);
        for (unsigned k = 1; k <= n; ++k) d[k - 1] = comb::falling(a, k) * std::pow(base, a - k);
        return d;
    }

    /// Sum of psi_node^-1 over the subtree, i.e. psi_node^-1(C_node(u_node)).
    static double inner_sum(const CopulaNode& node, std::span<const double> u) {
        double t = 0.0;
        for (std::size_t i : node.leaves) t += node.generator.psi_inv(u[i]);
        for (const auto& c : node.children) t += link(node, c, inner_sum(c, u));
        return t;
    }

    /// Mixed derivative bookkeeping for the density of nested models.
    /// For a node with inner sum t, blocks[m] is the sum over partitions of
    /// the node's leaves into m blocks (each block inside a single child) of
    /// the product of block derivatives of the child inner functions. The
    /// node's own mixed derivative of f(t) is then sum_m f^(m)(t) blocks[m].
    struct NodeTerms {
        double t = 0.0;
        std::vector<double> blocks;  // index = number of blocks
    };

    static std::vector<double> convolve(const std::vector<double>& a, const std::vector<double>& b) {
        std::vector<double> out(a.size() + b.size() - 1, 0.0);
        for (std::size_t i = 0; i < a.size(); ++i)
            if (a[i] != 0.0)
                for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
        return out;
    }

    static NodeTerms node_terms(const CopulaNode& node, std::span<const double> u) {
        NodeTerms out;
        out.blocks = {1.0};
        for (std::size_t i : node.leaves) {
            out.t += node.generator.psi_inv(u[i]);
            out.blocks = convolve(out.blocks, {0.0, node.generator.psi_inv_prime(u[i])});
        }
        for (const auto& c : node.children) {
            const NodeTerms inner = node_terms(c, u);
            out.t += link(node, c, inner.t);
            const auto n = static_cast<unsigned>(inner.blocks.size() - 1);
            const auto dphi = link_derivatives(node, c, inner.t, n);
            const auto bell = comb::partial_bell_table(dphi, n);
            std::vector<double> d(n + 1, 0.0);
            for (unsigned j = 1; j <= n; ++j)
                for (unsigned m = j; m <= n; ++m) d[j] += inner.blocks[m] * bell[m * (n + 1) + j];
            out.blocks = convolve(out.blocks, d);
        }
        return out;
    }

    static double inner_frailty(const CopulaNode& parent, const CopulaNode& child, double v,
                                Rng& rng) {
        const double a = parent.generator.theta() / child.generator.theta();
        if (parent.generator.family() == Family::clayton) return tilted_stable(rng, a, v);
        return std::pow(v, 1.0 / a) * positive_stable(rng, a);
    }

    static void sample_node(const CopulaNode& node, double v, Rng& rng, std::span<double> out) {
        for (std::size_t i : node.leaves) out[i] = node.generator.psi(exponential1(rng) / v);
        for (const auto& c : node.children) sample_node(c, inner_frailty(node, c, v, rng), rng, out);
    }

    /// Bivariate Frank with theta < 0 by conditional inversion.
    void sample_frank_negative(Rng& rng, std::span<double> out) const {
        const double th = root_.generator.theta();
        const double u1 = uniform01(rng);
        const double w = uniform01(rng);
        const double num = w * std::expm1(-th);
        const double den = w + (1.0 - w) * std::exp(-th * u1);
        out[root_.leaves[0]] = u1;
        out[root_.leaves[1]] = -std::log1p(num / den) / th;
    }

    CopulaNode root_;
    std::size_t dim_ = 0;
};

/// Copula density by mixed central finite differences of the cdf,
///   c(u) ~ sum_{s in {-1,1}^d} prod(s) C(u + h s) / (2h)^d.
/// Works for any tree shape; accuracy degrades quickly with d.
inline double density_finite_difference(const CopulaModel& model, std::span<const double> u,
                                        double h) {
    const std::size_t d = model.dim();
    if (u.size() != d) throw std::invalid_argument("density_finite_difference: dimension mismatch");
    for (double v : u)
        if (v - h <= 0.0 || v + h >= 1.0)
            throw std::domain_error("density_finite_difference: stencil leaves the unit cube");
    std::vector<double> p(d);
    double acc = 0.0;
    for (std::size_t mask = 0; mask < (std::size_t{1} << d); ++mask) {
        int sign = 1;
        for (std::size_t i = 0; i < d; ++i) {
            const bool up = (mask >> i) & 1U;
            p[i] = u[i] + (up ? h : -h);
            if (!up) sign = -sign;
        }
        acc += sign * model.cdf(p);
    }
    return acc / std::pow(2.0 * h, static_cast<double>(d));
}

}  // namespace ccsmc
