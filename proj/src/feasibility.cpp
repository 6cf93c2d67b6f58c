#include "sphereflow/feasibility.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "sphereflow/errors.hpp"

namespace sphereflow {

const char* kind_name(TargetClass::Kind kind) {
    switch (kind) {
        case TargetClass::Kind::Interior: return "interior";
        case TargetClass::Kind::Stratum: return "stratum";
        case TargetClass::Kind::Zero: return "zero";
        case TargetClass::Kind::Infeasible: return "infeasible";
    }
    return "?";
}

namespace {

// Subsets of the support are 24-bit masks (bit i = i-th support face).  The
// witness tie-break wants "lexicographically smallest sorted face list",
// which is NOT numeric mask order: {0,1} (mask 3) precedes {1} (mask 2).
bool mask_lex_less(std::uint64_t a, std::uint64_t b) {
    while (a != 0 && b != 0) {
        const int ia = std::countr_zero(a);
        const int ib = std::countr_zero(b);
        if (ia != ib) return ia < ib;
        a &= a - 1;
        b &= b - 1;
    }
    return a == 0 && b != 0; // a proper prefix sorts first
}

struct BestSubset {
    double slack = -std::numeric_limits<double>::infinity();
    std::uint64_t mask = 0;
    bool valid = false;
};

// Strict total order on candidates: larger slack wins, then lex-smaller
// mask.  Folding chunk winners under a total order gives the same overall
// winner for every chunking, which is what makes the parallel scan
// deterministic.
bool better(const BestSubset& cand, const BestSubset& cur) {
    if (!cur.valid) return true;
    if (cand.slack != cur.slack) return cand.slack > cur.slack;
    return mask_lex_less(cand.mask, cur.mask);
}

struct SupportTables {
    std::vector<double> L;                       // target over support faces
    std::vector<std::vector<std::uint64_t>> inc; // per face: edge-index bitset
    std::size_t words = 0;
    const std::vector<WeightedEdge>* edges = nullptr;
};

// slack(F') = sum_{f in F'} L_hat_f - 2 * sum_{e in E_{F'}} weight(e).
// Both sums run in a fixed ascending order so the value is bit-reproducible
// no matter which thread evaluates which mask.
double subset_slack(const SupportTables& t, std::uint64_t mask,
                    std::vector<std::uint64_t>& scratch) {
    scratch.assign(t.words, 0);
    double sum_l = 0.0;
    for (std::uint64_t m = mask; m != 0; m &= m - 1) {
        const int i = std::countr_zero(m);
        sum_l += t.L[static_cast<std::size_t>(i)];
        const auto& w = t.inc[static_cast<std::size_t>(i)];
        for (std::size_t j = 0; j < t.words; ++j) scratch[j] |= w[j];
    }
    double sum_phi = 0.0;
    for (std::size_t j = 0; j < t.words; ++j)
        for (std::uint64_t m = scratch[j]; m != 0; m &= m - 1) {
            const std::size_t e = j * 64 + static_cast<std::size_t>(std::countr_zero(m));
            sum_phi += (*t.edges)[e].weight;
        }
    return sum_l - 2.0 * sum_phi;
}

TargetClass classify_impl(const CellComplex& cx, const Eigen::VectorXd& L_hat,
                          bool parallel) {
    if (L_hat.size() != cx.num_faces())
        throw DomainError("target: vector size must equal num_faces");
    for (int f = 0; f < L_hat.size(); ++f)
        if (!std::isfinite(L_hat[f]) || L_hat[f] < 0.0)
            throw DomainError("target: entries must be finite and >= 0");

    std::vector<int> support;
    for (int f = 0; f < L_hat.size(); ++f)
        if (L_hat[f] > 0.0) support.push_back(f);

    TargetClass out;
    if (support.empty()) {
        out.kind = TargetClass::Kind::Zero;
        return out;
    }
    const int m = static_cast<int>(support.size());
    if (m > kMaxSupport)
        throw SupportTooLargeError("target support has " + std::to_string(m) +
                                   " faces; exhaustive subset scan is capped at " +
                                   std::to_string(kMaxSupport));

    SupportTables tables;
    tables.edges = &cx.edges();
    tables.words = (cx.edges().size() + 63) / 64;
    tables.L.resize(static_cast<std::size_t>(m));
    tables.inc.assign(static_cast<std::size_t>(m),
                      std::vector<std::uint64_t>(tables.words, 0));
    for (int i = 0; i < m; ++i) {
        tables.L[static_cast<std::size_t>(i)] = L_hat[support[static_cast<std::size_t>(i)]];
        for (const auto& inc : cx.incident(support[static_cast<std::size_t>(i)]))
            tables.inc[static_cast<std::size_t>(i)][static_cast<std::size_t>(inc.edge_index) / 64] |=
                std::uint64_t{1} << (static_cast<std::size_t>(inc.edge_index) % 64);
    }

    const std::uint64_t n_masks = (std::uint64_t{1} << m) - 1; // masks 1..n_masks
    BestSubset best;

    if (!parallel || n_masks < 4096) {
        std::vector<std::uint64_t> scratch;
        for (std::uint64_t mask = 1; mask <= n_masks; ++mask) {
            const BestSubset cand{subset_slack(tables, mask, scratch), mask, true};
            if (better(cand, best)) best = cand;
        }
    } else {
#ifdef _OPENMP
        const int max_threads = omp_get_max_threads();
#else
        const int max_threads = 1;
#endif
        std::vector<BestSubset> per_thread(static_cast<std::size_t>(max_threads));
#pragma omp parallel
        {
#ifdef _OPENMP
            const int tid = omp_get_thread_num();
#else
            const int tid = 0;
#endif
            BestSubset local;
            std::vector<std::uint64_t> scratch;
#pragma omp for schedule(static)
            for (std::int64_t mask = 1; mask <= static_cast<std::int64_t>(n_masks); ++mask) {
                const BestSubset cand{
                    subset_slack(tables, static_cast<std::uint64_t>(mask), scratch),
                    static_cast<std::uint64_t>(mask), true};
                if (better(cand, local)) local = cand;
            }
            per_thread[static_cast<std::size_t>(tid)] = local;
        }
        for (const BestSubset& c : per_thread)
            if (c.valid && better(c, best)) best = c;
    }

    // A genuine violation (slack >= 0) is infeasible outright; a target within
    // 1e-12 of some bound is treated the same way, since its solution (if any)
    // sits at astronomically large |K| that no solver here will reach.
    if (best.slack > -1e-12) {
        out.kind = TargetClass::Kind::Infeasible;
        out.slack = best.slack;
        out.boundary_proximal = (best.slack < 0.0);
        for (std::uint64_t m2 = best.mask; m2 != 0; m2 &= m2 - 1)
            out.witness.push_back(support[static_cast<std::size_t>(std::countr_zero(m2))]);
        out.support = std::move(support);
        return out;
    }

    out.kind = (m == cx.num_faces()) ? TargetClass::Kind::Interior
                                     : TargetClass::Kind::Stratum;
    out.support = std::move(support);
    return out;
}

} // namespace

TargetClass classify_target(const CellComplex& cx, const Eigen::VectorXd& L_hat) {
    return classify_impl(cx, L_hat, true);
}

namespace ref {
TargetClass classify_target(const CellComplex& cx, const Eigen::VectorXd& L_hat) {
    return classify_impl(cx, L_hat, false);
}
} // namespace ref

} // namespace sphereflow
