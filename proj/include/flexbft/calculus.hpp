/* Copyright 2026 The flexbft authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License. */

#pragma once

#include <algorithm>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rational.hpp"

namespace flexbft::calculus {

/// The four quorum roles of a certify/lock/commit/unlock protocol, each
/// a fraction of n. Collapsing to (q_c, q_r, q_c, q_r) recovers the
/// two-parameter scheme the replicas actually run.
struct QuorumConfig {
    Rational q_unq;
    Rational q_lck;
    Rational q_cmt;
    Rational q_ulck;
};

/// Fault-tolerance summary for one commit rule. `safety_total` is a
/// strict upper bound on the Byzantine-plus-corrupt fraction;
/// `liveness_byz` is an inclusive upper bound on the Byzantine fraction.
struct Tolerance {
    Rational safety_total;
    Rational liveness_byz;

    bool operator==(const Tolerance&) const = default;
};

enum class RuleKind : std::uint8_t { CR1, CR2, Unsupported };

/// A client requirement point: (Byzantine fraction, total fraction),
/// with the rule that supports it, if any.
struct ClientPoint {
    Rational byz;
    Rational total;
    RuleKind rule = RuleKind::Unsupported;
    std::optional<Rational> q_c;  // set when rule == CR1
};

inline void check_quorum_fraction(const Rational& q, const char* name) {
    if (q <= Rational(0) || q > Rational(1))
        throw std::invalid_argument(std::string(name) + " must be in (0, 1]");
}

/// General four-quorum tolerance: safety bounded by the weaker of the
/// two pairwise intersections, liveness by the largest quorum that must
/// still be formable.
inline Tolerance general_tolerance(const QuorumConfig& cfg) {
    check_quorum_fraction(cfg.q_unq, "q_unq");
    check_quorum_fraction(cfg.q_lck, "q_lck");
    check_quorum_fraction(cfg.q_cmt, "q_cmt");
    check_quorum_fraction(cfg.q_ulck, "q_ulck");
    const Rational one(1);
    const Rational s1 = cfg.q_unq + cfg.q_lck - one;
    const Rational s2 = cfg.q_cmt + cfg.q_ulck - one;
    Rational biggest = cfg.q_unq;
    for (const Rational& q : {cfg.q_cmt, cfg.q_lck, cfg.q_ulck})
        if (q > biggest) biggest = q;
    return Tolerance{s1 < s2 ? s1 : s2, one - biggest};
}

/// Partially synchronous commit rule with client parameter q_c:
/// safe below q_c + q_r - 1 total faults, live up to 1 - q_c Byzantine.
inline Tolerance cr1_tolerance(const Rational& q_r, const Rational& q_c) {
    check_quorum_fraction(q_r, "q_r");
    check_quorum_fraction(q_c, "q_c");
    if (q_c < q_r) throw std::invalid_argument("cr1: q_c must be >= q_r");
    return Tolerance{q_c + q_r - Rational(1), Rational(1) - q_c};
}

/// Synchronous commit rule: safe below q_r total faults (for a correct
/// delay bound), live up to 1 - q_r Byzantine. Accepts q_r = 1/2, the
/// classic synchronous point, even though a running protocol instance
/// requires strictly more.
inline Tolerance cr2_tolerance(const Rational& q_r) {
    check_quorum_fraction(q_r, "q_r");
    if (q_r < Rational(1, 2)) throw std::invalid_argument("cr2: q_r must be at least 1/2");
    return Tolerance{q_r, Rational(1) - q_r};
}

/// Picks the weakest commit rule covering a requirement point
/// (byz, total). CR1 uses the smallest admissible q_c, namely
/// max(q_r, total - q_r + 1); a point exactly on the CR1 frontier is
/// supported because the frontier itself is the necessary rule. CR2
/// keeps the strict "< q_r" total bound. Otherwise the point is not
/// achievable at this q_r.
inline ClientPoint pick_rule(const Rational& byz, const Rational& total, const Rational& q_r) {
    if (total < byz) throw std::invalid_argument("pick_rule: total fraction below byzantine fraction");
    if (byz < Rational(0)) throw std::invalid_argument("pick_rule: negative fraction");
    check_quorum_fraction(q_r, "q_r");

    ClientPoint point{byz, total, RuleKind::Unsupported, std::nullopt};
    Rational q_c = total - q_r + Rational(1);
    if (q_c < q_r) q_c = q_r;
    if (q_c <= Rational(1) && byz <= Rational(1) - q_c) {
        point.rule = RuleKind::CR1;
        point.q_c = q_c;
        return point;
    }
    if (total < q_r && byz <= Rational(1) - q_r) {
        point.rule = RuleKind::CR2;
        return point;
    }
    return point;
}

/// The analytic frontier of the supported-client region for one q_r:
/// the CR1 segment endpoints and the CR2 rectangle corner.
struct RegionBoundary {
    ClientPoint cr1_low;   // q_c = q_r end of the CR1 segment
    ClientPoint cr1_high;  // q_c = 1 end of the CR1 segment
    ClientPoint cr2_corner;
};

inline RegionBoundary region_boundary(const Rational& q_r) {
    const Rational one(1);
    RegionBoundary b;
    b.cr1_low = ClientPoint{one - q_r, q_r + q_r - one, RuleKind::CR1, q_r};
    b.cr1_high = ClientPoint{Rational(0), q_r, RuleKind::CR1, one};
    b.cr2_corner = ClientPoint{one - q_r, q_r, RuleKind::CR2, std::nullopt};
    return b;
}

struct RegionGrid {
    Rational q_r;
    Rational step;
    std::vector<ClientPoint> points;  // lattice points with total >= byz
    RegionBoundary boundary;
};

/// Labels every lattice point of {0, step, ..., 1}^2 above the diagonal
/// with the rule that supports it.
inline RegionGrid region_grid(const Rational& q_r, const Rational& step) {
    if (step <= Rational(0) || step > Rational(1, 10))
        throw std::invalid_argument("region_grid: step must be in (0, 1/10]");
    RegionGrid grid{q_r, step, {}, region_boundary(q_r)};
    for (std::int64_t i = 0;; ++i) {
        const Rational byz = step * Rational(i);
        if (byz > Rational(1)) break;
        for (std::int64_t j = i;; ++j) {
            const Rational total = step * Rational(j);
            if (total > Rational(1)) break;
            grid.points.push_back(pick_rule(byz, total, q_r));
        }
    }
    return grid;
}

/// Region export: one record per lattice point, exact rationals, with a
/// summary header naming q_r and the analytic boundary. Consumed by
/// external plotting.
inline std::string region_csv(const RegionGrid& grid) {
    std::ostringstream out;
    const RegionBoundary& b = grid.boundary;
    out << "# q_r=" << grid.q_r.str() << " step=" << grid.step.str()
        << " cr1_endpoints=(" << b.cr1_low.byz.str() << "," << b.cr1_low.total.str() << ")..("
        << b.cr1_high.byz.str() << "," << b.cr1_high.total.str() << ")"
        << " cr2_corner=(" << b.cr2_corner.byz.str() << "," << b.cr2_corner.total.str() << ")\n";
    out << "byz,total,rule,q_c\n";
    for (const ClientPoint& p : grid.points) {
        out << p.byz.str() << ',' << p.total.str() << ',';
        switch (p.rule) {
            case RuleKind::CR1: out << "CR1," << p.q_c->str(); break;
            case RuleKind::CR2: out << "CR2,"; break;
            case RuleKind::Unsupported: out << "UNSUPPORTED,"; break;
        }
        out << '\n';
    }
    return out.str();
}

enum class RegionOrder : std::uint8_t { Equal, FirstInsideSecond, SecondInsideFirst, Incomparable };

struct QrComparison {
    Rational qr_a;
    Rational qr_b;
    RegionOrder cr1_region;     // containment of CR1-supported lattice points
    Rational max_total_a;       // largest CR1 safety tolerance (= q_r)
    Rational max_total_b;
    Rational max_byz_a;         // largest Byzantine fraction on the CR1 family
    Rational max_byz_b;
};

/// Largest Byzantine fraction supported anywhere on the CR1 family for a
/// given q_r: q_r/2 when the balancing q_c is admissible, else 1 - q_r.
inline Rational cr1_max_byz(const Rational& q_r) {
    const Rational balanced = Rational(1) - q_r / Rational(2);
    if (balanced >= q_r) return q_r / Rational(2);
    return Rational(1) - q_r;
}

/// Pairwise dominance report over CR1 regions; grids are compared at a
/// common lattice step.
inline std::vector<QrComparison> compare_qr(const std::vector<Rational>& qr_list,
                                            const Rational& step = Rational(1, 20)) {
    auto cr1_supported = [&](const Rational& q_r) {
        std::vector<std::pair<Rational, Rational>> pts;
        for (const ClientPoint& p : region_grid(q_r, step).points)
            if (p.rule == RuleKind::CR1) pts.emplace_back(p.byz, p.total);
        return pts;
    };
    std::vector<QrComparison> out;
    for (std::size_t a = 0; a < qr_list.size(); ++a) {
        for (std::size_t b = a + 1; b < qr_list.size(); ++b) {
            const auto ra = cr1_supported(qr_list[a]);
            const auto rb = cr1_supported(qr_list[b]);
            const bool a_in_b = std::all_of(ra.begin(), ra.end(), [&](const auto& p) {
                return std::find(rb.begin(), rb.end(), p) != rb.end();
            });
            const bool b_in_a = std::all_of(rb.begin(), rb.end(), [&](const auto& p) {
                return std::find(ra.begin(), ra.end(), p) != ra.end();
            });
            RegionOrder order = RegionOrder::Incomparable;
            if (a_in_b && b_in_a) order = RegionOrder::Equal;
            else if (a_in_b) order = RegionOrder::FirstInsideSecond;
            else if (b_in_a) order = RegionOrder::SecondInsideFirst;
            out.push_back(QrComparison{qr_list[a], qr_list[b], order,
                                       qr_list[a], qr_list[b],
                                       cr1_max_byz(qr_list[a]), cr1_max_byz(qr_list[b])});
        }
    }
    return out;
}

inline std::string compare_qr_text(const std::vector<QrComparison>& comparisons) {
    std::ostringstream out;
    for (const QrComparison& c : comparisons) {
        out << "q_r " << c.qr_a.str() << " vs " << c.qr_b.str() << ": ";
        switch (c.cr1_region) {
            case RegionOrder::Equal: out << "equal CR1 regions"; break;
            case RegionOrder::FirstInsideSecond:
                out << "CR1 region of " << c.qr_a.str() << " contained in " << c.qr_b.str();
                break;
            case RegionOrder::SecondInsideFirst:
                out << "CR1 region of " << c.qr_b.str() << " contained in " << c.qr_a.str();
                break;
            case RegionOrder::Incomparable: out << "incomparable CR1 regions"; break;
        }
        out << "; max_total " << c.max_total_a.str() << " vs " << c.max_total_b.str()
            << "; max_byz " << c.max_byz_a.str() << " vs " << c.max_byz_b.str() << '\n';
    }
    return out.str();
}

}  // namespace flexbft::calculus
