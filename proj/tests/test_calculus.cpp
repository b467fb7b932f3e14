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

#include <catch2/catch_amalgamated.hpp>

#include <flexbft/calculus.hpp>

using namespace flexbft;
using namespace flexbft::calculus;

TEST_CASE("general four-quorum tolerance") {
    const Rational two_thirds(2, 3);
    const Tolerance pbft = general_tolerance({two_thirds, two_thirds, two_thirds, two_thirds});
    CHECK(pbft.safety_total == Rational(1, 3));
    CHECK(pbft.liveness_byz == Rational(1, 3));

    const Tolerance mixed =
        general_tolerance({Rational(4, 5), Rational(7, 10), Rational(4, 5), Rational(7, 10)});
    CHECK(mixed.safety_total == Rational(1, 2));
    CHECK(mixed.liveness_byz == Rational(1, 5));

    CHECK_THROWS(general_tolerance({Rational(0), two_thirds, two_thirds, two_thirds}));
    CHECK_THROWS(general_tolerance({Rational(3, 2), two_thirds, two_thirds, two_thirds}));
}

TEST_CASE("balanced quorum sizes dominate") {
    // rebalancing (q_cmt, q_ulck) := (q_unq, q_lck) (or the other way,
    // whichever pair is stronger) never hurts safety or liveness;
    // exhaustive over the 1/20 grid
    std::vector<Rational> grid;
    for (std::int64_t i = 11; i <= 20; ++i) grid.emplace_back(i, 20);
    for (const Rational& unq : grid)
        for (const Rational& lck : grid)
            for (const Rational& cmt : grid)
                for (const Rational& ulck : grid) {
                    const Tolerance plain = general_tolerance({unq, lck, cmt, ulck});
                    const bool first_pair_stronger = unq + lck >= cmt + ulck;
                    const QuorumConfig balanced =
                        first_pair_stronger ? QuorumConfig{unq, lck, unq, lck}
                                            : QuorumConfig{cmt, ulck, cmt, ulck};
                    const Tolerance better = general_tolerance(balanced);
                    REQUIRE(better.safety_total >= plain.safety_total);
                    REQUIRE(better.liveness_byz >= plain.liveness_byz);
                }
}

TEST_CASE("cr1 tolerance") {
    const Tolerance classic = cr1_tolerance(Rational(2, 3), Rational(2, 3));
    CHECK(classic.safety_total == Rational(1, 3));
    CHECK(classic.liveness_byz == Rational(1, 3));

    const Tolerance strong = cr1_tolerance(Rational(7, 10), Rational(4, 5));
    CHECK(strong.safety_total == Rational(1, 2));
    CHECK(strong.liveness_byz == Rational(1, 5));

    const Tolerance extreme = cr1_tolerance(Rational(2, 3), Rational(1));
    CHECK(extreme.safety_total == Rational(2, 3));
    CHECK(extreme.liveness_byz == Rational(0));

    CHECK_THROWS(cr1_tolerance(Rational(2, 3), Rational(1, 2)));  // q_c < q_r
}

TEST_CASE("cr2 tolerance") {
    const Tolerance t = cr2_tolerance(Rational(2, 3));
    CHECK(t.safety_total == Rational(2, 3));
    CHECK(t.liveness_byz == Rational(1, 3));

    const Tolerance half = cr2_tolerance(Rational(1, 2));
    CHECK(half.safety_total == Rational(1, 2));
    CHECK(half.liveness_byz == Rational(1, 2));

    const Tolerance seventy = cr2_tolerance(Rational(7, 10));
    CHECK(seventy.safety_total == Rational(7, 10));
    CHECK(seventy.liveness_byz == Rational(3, 10));

    CHECK_THROWS(cr2_tolerance(Rational(2, 5)));
}

TEST_CASE("cr1 is the balanced collapse of the general calculus") {
    std::vector<Rational> grid;
    for (std::int64_t den = 2; den <= 12; ++den)
        for (std::int64_t num = den / 2 + 1; num <= den; ++num) grid.emplace_back(num, den);
    for (const Rational& q_r : grid)
        for (const Rational& q_c : grid) {
            if (q_c < q_r) continue;
            const Tolerance direct = cr1_tolerance(q_r, q_c);
            const Tolerance general = general_tolerance({q_c, q_r, q_c, q_r});
            REQUIRE(direct == general);
        }
}

TEST_CASE("pick_rule chooses the weakest sufficient rule") {
    const Rational q_r(2, 3);

    const ClientPoint p1 = pick_rule(Rational(1, 5), Rational(2, 5), q_r);
    REQUIRE(p1.rule == RuleKind::CR1);
    CHECK(*p1.q_c == Rational(11, 15));
    CHECK(p1.byz <= Rational(1) - *p1.q_c);  // liveness side holds

    const ClientPoint p2 = pick_rule(Rational(3, 10), Rational(3, 5), q_r);
    // CR1 would need q_c = 14/15 but the byz bound 1/15 fails; CR2 covers
    CHECK(p2.rule == RuleKind::CR2);

    const ClientPoint p3 = pick_rule(Rational(2, 5), Rational(7, 10), q_r);
    CHECK(p3.rule == RuleKind::Unsupported);

    CHECK_THROWS(pick_rule(Rational(1, 2), Rational(1, 3), q_r));  // total below byz
}

TEST_CASE("region grid carries the analytic boundary") {
    const RegionGrid grid = region_grid(Rational(2, 3), Rational(1, 30));
    CHECK(grid.boundary.cr1_low.byz == Rational(1, 3));
    CHECK(grid.boundary.cr1_low.total == Rational(1, 3));
    CHECK(grid.boundary.cr1_high.byz == Rational(0));
    CHECK(grid.boundary.cr1_high.total == Rational(2, 3));
    CHECK(grid.boundary.cr2_corner.byz == Rational(1, 3));
    CHECK(grid.boundary.cr2_corner.total == Rational(2, 3));

    // the largest Byzantine fraction on the CR1 family is q_r/2
    Rational byz_max(0);
    for (const ClientPoint& p : grid.points)
        if (p.rule == RuleKind::CR1 && p.byz > byz_max) byz_max = p.byz;
    CHECK(byz_max == Rational(1, 3));
    CHECK(cr1_max_byz(Rational(2, 3)) == Rational(1, 3));
    CHECK(cr1_max_byz(Rational(3, 4)) == Rational(1, 4));

    // every grid label agrees with the closed-form support condition:
    // CR1 iff byz + total <= q_r and byz <= 1 - q_r
    for (const ClientPoint& p : grid.points) {
        const bool cr1 = p.byz + p.total <= Rational(2, 3) && p.byz <= Rational(1, 3);
        CHECK((p.rule == RuleKind::CR1) == cr1);
    }

    CHECK_THROWS(region_grid(Rational(2, 3), Rational(1, 5)));  // step too coarse
}

TEST_CASE("region csv is exact and stable") {
    const RegionGrid grid = region_grid(Rational(2, 3), Rational(1, 10));
    const std::string csv = region_csv(grid);
    CHECK(csv.find("# q_r=2/3 step=1/10") == 0);
    CHECK(csv.find("byz,total,rule,q_c\n") != std::string::npos);
    CHECK(csv.find("0,0,CR1,2/3\n") != std::string::npos);
    CHECK(csv.find("1/10,2/5,CR1,11/15\n") != std::string::npos);
    CHECK(csv.find("2/5,7/10,UNSUPPORTED,\n") != std::string::npos);
}

TEST_CASE("q_r comparison: containment and trade-off") {
    const auto low_vs_twothirds = compare_qr({Rational(11, 20), Rational(2, 3)});
    REQUIRE(low_vs_twothirds.size() == 1);
    CHECK(low_vs_twothirds[0].cr1_region == RegionOrder::FirstInsideSecond);

    const auto twothirds_vs_threequarters = compare_qr({Rational(2, 3), Rational(3, 4)});
    REQUIRE(twothirds_vs_threequarters.size() == 1);
    const QrComparison& c = twothirds_vs_threequarters[0];
    CHECK(c.cr1_region == RegionOrder::Incomparable);
    CHECK(c.max_total_b > c.max_total_a);  // 3/4 tolerates more total faults
    CHECK(c.max_byz_b < c.max_byz_a);      // but fewer Byzantine

    const auto same = compare_qr({Rational(2, 3), Rational(2, 3)});
    CHECK(same[0].cr1_region == RegionOrder::Equal);

    const std::string text = compare_qr_text(twothirds_vs_threequarters);
    CHECK(text.find("incomparable") != std::string::npos);
}
