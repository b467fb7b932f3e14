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

#include <random>

#include <flexbft/core.hpp>

using namespace flexbft;

namespace {

Block make_block(Height h, const std::string& payload, const Digest& parent) {
    return Block{h, to_bytes(payload), parent};
}

/// A small tree: genesis <- b1 <- b2 <- b3, with b2p a sibling of b2.
struct Chain {
    BlockStore store;
    Digest b1, b2, b3, b2p;

    Chain() {
        const Block blk1 = make_block(1, "one", genesis_digest());
        b1 = store.put(blk1);
        const Block blk2 = make_block(2, "two", b1);
        b2 = store.put(blk2);
        const Block blk3 = make_block(3, "three", b2);
        b3 = store.put(blk3);
        const Block blk2p = make_block(2, "two-prime", b1);
        b2p = store.put(blk2p);
    }
};

Certificate certify(const Digest& block, Height height, View view,
                    const std::vector<ReplicaId>& voters) {
    Certificate c{block, height, view, {}};
    for (const ReplicaId r : voters) c.votes.push_back(make_vote(r, block, view));
    return c;
}

}  // namespace

TEST_CASE("sha256 matches the NIST vectors") {
    auto hex = [](const std::string& s) {
        const Bytes b = to_bytes(s);
        return hex_encode(Sha256::digest(b));
    };
    CHECK(hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(hex("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
    const Bytes million(1000000, std::uint8_t('a'));
    CHECK(hex_encode(Sha256::digest(million)) ==
          "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");

    // streaming across buffer boundaries agrees with one-shot
    Sha256 h;
    const Bytes data = to_bytes(std::string(150, 'x'));
    h.update({data.data(), 7});
    h.update({data.data() + 7, 100});
    h.update({data.data() + 107, 43});
    CHECK(h.finalize() == Sha256::digest(data));
}

TEST_CASE("rational arithmetic is exact and normalized") {
    CHECK(Rational(2, 4) == Rational(1, 2));
    CHECK(Rational(-2, -4) == Rational(1, 2));
    CHECK(Rational(2, -4).num() == -1);
    CHECK(Rational(1, 3) + Rational(1, 6) == Rational(1, 2));
    CHECK(Rational(7, 10) * Rational(4, 5) == Rational(14, 25));
    CHECK(Rational(1) - Rational(2, 3) == Rational(1, 3));
    CHECK(Rational(2, 3) / Rational(4, 3) == Rational(1, 2));
    CHECK(Rational(2, 3) < Rational(7, 10));
    CHECK(Rational(22, 30).str() == "11/15");
    CHECK(Rational(4, 2).str() == "2");
    CHECK(Rational::parse("3/5") == Rational(3, 5));
    CHECK(Rational::parse("7") == Rational(7));
    CHECK_THROWS(Rational(1, 0));
    CHECK_THROWS(Rational::parse("x/y"));
}

TEST_CASE("block digest is deterministic and pinned") {
    // golden value computed once with a reference implementation of the
    // canonical encoding (LE u64 height, LE u64 length, payload, parent)
    CHECK(genesis_digest().hex() ==
          "17b0761f87b081d5cf10757ccc89f12be355c70e2e29df288b65b30710dcbcd1");
    const Block b1 = make_block(1, "h1/v0/L0", genesis_digest());
    CHECK(block_digest(b1).hex() ==
          "fde79578511c34956ae9527f61449d5b0f528a818a74441a871dc157024b472b");

    // canonical layout, byte for byte
    const Bytes enc = genesis_block().encode();
    REQUIRE(enc.size() == 48);
    CHECK(std::all_of(enc.begin(), enc.end(), [](std::uint8_t b) { return b == 0; }));

    const Block x = make_block(4, "payload", genesis_digest());
    const Block y = make_block(4, "payloae", genesis_digest());
    CHECK(block_digest(x) != block_digest(y));
    CHECK(block_digest(x) == block_digest(x));
}

TEST_CASE("quorum_count uses strict-majority rounding") {
    CHECK(quorum_count(3, Rational(1, 2)) == 2);    // f+1 out of 2f+1
    CHECK(quorum_count(4, Rational(2, 3)) == 3);    // 2f+1 out of 3f+1
    CHECK(quorum_count(10, Rational(7, 10)) == 8);  // integral: floor+1
    CHECK(quorum_count(10, Rational(3, 5)) == 7);
    CHECK(quorum_count(30, Rational(2, 3)) == 21);
    CHECK(quorum_count(30, Rational(4, 5)) == 25);
    CHECK(quorum_count(20, Rational(2, 3)) == 14);  // non-integral: ceil
    CHECK_THROWS_AS(quorum_count(10, Rational(0)), std::invalid_argument);
    CHECK_THROWS_AS(quorum_count(10, Rational(-1, 2)), std::invalid_argument);
    CHECK_THROWS_AS(quorum_count(10, Rational(11, 10)), std::invalid_argument);
    CHECK_THROWS_AS(quorum_count(0, Rational(1, 2)), std::invalid_argument);
}

TEST_CASE("quorum_count is monotone in the fraction") {
    // exhaustive over all n <= 100 and all reduced fractions with
    // denominator <= 30
    std::vector<Rational> fractions;
    for (std::int64_t den = 1; den <= 30; ++den)
        for (std::int64_t num = 1; num <= den; ++num) fractions.emplace_back(num, den);
    std::sort(fractions.begin(), fractions.end());
    fractions.erase(std::unique(fractions.begin(), fractions.end()), fractions.end());
    for (std::size_t n = 1; n <= 100; ++n) {
        std::size_t prev = 0;
        for (const Rational& q : fractions) {
            const std::size_t m = quorum_count(n, q);
            REQUIRE(m >= prev);
            prev = m;
        }
    }
}

TEST_CASE("flexible quorum intersection bound holds exhaustively") {
    // two vote sets of quorum size drawn from n replicas overlap in at
    // least m_a + m_b - n replicas, and that overlap is positive
    // whenever q_a + q_b > 1
    std::vector<Rational> fractions;
    for (std::int64_t den = 1; den <= 12; ++den)
        for (std::int64_t num = 1; num <= den; ++num) fractions.emplace_back(num, den);
    for (std::size_t n = 1; n <= 20; ++n) {
        for (const Rational& qa : fractions) {
            for (const Rational& qb : fractions) {
                const std::size_t ma = quorum_count(n, qa);
                const std::size_t mb = quorum_count(n, qb);
                if (ma > n || mb > n) continue;  // no such vote set exists
                // worst-case placement: first ma ids vs last mb ids
                const std::size_t overlap = ma + mb > n ? ma + mb - n : 0;
                std::set<ReplicaId> a, b;
                for (std::size_t i = 0; i < ma; ++i) a.insert(static_cast<ReplicaId>(i));
                for (std::size_t i = 0; i < mb; ++i) b.insert(static_cast<ReplicaId>(n - 1 - i));
                std::size_t measured = 0;
                for (const ReplicaId r : a) measured += b.count(r);
                REQUIRE(measured == overlap);
                if (qa + qb > Rational(1)) REQUIRE(overlap >= 1);
            }
        }
    }
}

TEST_CASE("extends walks the parent chain and is reflexive") {
    Chain c;
    CHECK(extends(c.b1, c.b1, c.store));
    CHECK(extends(c.b3, c.b1, c.store));
    CHECK(extends(c.b3, genesis_digest(), c.store));
    CHECK_FALSE(extends(c.b1, c.b3, c.store));
    CHECK_FALSE(extends(c.b2, c.b2p, c.store));
    Digest unknown;
    unknown.bytes[0] = 0xaa;
    CHECK_THROWS_AS(extends(unknown, c.b1, c.store), std::out_of_range);
}

TEST_CASE("equivocates means unrelated branches") {
    Chain c;
    CHECK_FALSE(equivocates(c.b1, c.b1, c.store));
    CHECK_FALSE(equivocates(c.b2, c.b1, c.store));
    CHECK(equivocates(c.b2, c.b2p, c.store));
    CHECK(equivocates(c.b3, c.b2p, c.store));
}

TEST_CASE("extends/equivocates trichotomy") {
    // for any two valid blocks exactly one of {equal or extends in some
    // direction, equivocates} holds
    Chain c;
    const std::vector<Digest> all = {genesis_digest(), c.b1, c.b2, c.b3, c.b2p};
    for (const Digest& a : all) {
        for (const Digest& b : all) {
            const bool related = a == b || extends(a, b, c.store) || extends(b, a, c.store);
            CHECK(related != equivocates(a, b, c.store));
        }
    }
}

TEST_CASE("certificates rank by view then height") {
    Chain c;
    const Certificate high_view = certify(c.b2, 2, 3, {0, 1, 2});
    const Certificate low_view = certify(c.b3, 9, 2, {0, 1, 2});
    CHECK(rank_certificates(high_view, low_view) == std::strong_ordering::greater);

    const Certificate h5 = certify(c.b2, 5, 2, {0, 1, 2});
    const Certificate h4 = certify(c.b2p, 4, 2, {0, 1, 2});
    CHECK(rank_certificates(h5, h4) == std::strong_ordering::greater);

    const Certificate same_a = certify(c.b2, 2, 1, {0, 1, 2});
    const Certificate same_b = certify(c.b2p, 2, 1, {3, 4, 5});
    CHECK(rank_certificates(same_a, same_b) == std::strong_ordering::equal);
}

TEST_CASE("certificate ranking is a total preorder") {
    std::mt19937 rng(42);
    std::uniform_int_distribution<std::uint64_t> dist(0, 5);
    Chain c;
    auto random_cert = [&] {
        return certify(c.b1, dist(rng), dist(rng), {0});
    };
    for (int i = 0; i < 500; ++i) {
        const Certificate a = random_cert();
        const Certificate b = random_cert();
        const Certificate d = random_cert();
        // antisymmetry up to (view, height) equality
        if (rank_certificates(a, b) == std::strong_ordering::greater)
            CHECK(rank_certificates(b, a) == std::strong_ordering::less);
        if (rank_certificates(a, b) == std::strong_ordering::equal) {
            CHECK(a.view == b.view);
            CHECK(a.height == b.height);
        }
        // transitivity
        if (rank_certificates(a, b) != std::strong_ordering::less &&
            rank_certificates(b, d) != std::strong_ordering::less)
            CHECK(rank_certificates(a, d) != std::strong_ordering::less);
    }
}

TEST_CASE("verify_certificate checks voters, auth, and quorum") {
    Chain c;
    ProtocolConfig cfg{4, Rational(2, 3), 100, 2};

    const Certificate good = certify(c.b1, 1, 0, {0, 1, 2});
    CHECK(verify_certificate(good, cfg));

    Certificate dup = good;
    dup.votes[2] = dup.votes[0];  // duplicated voter drops below quorum
    CHECK_FALSE(verify_certificate(dup, cfg));

    Certificate short_cert = certify(c.b1, 1, 0, {0, 1});
    CHECK_FALSE(verify_certificate(short_cert, cfg));

    Certificate mixed = good;
    mixed.votes[1] = make_vote(1, c.b1, 1);  // wrong view
    CHECK_FALSE(verify_certificate(mixed, cfg));

    Certificate forged = good;
    forged.votes[1].auth = make_auth(3, vote_signing_digest(c.b1, 0));  // not the voter's token
    CHECK_FALSE(verify_certificate(forged, cfg));

    CHECK(verify_certificate(genesis_certificate(), cfg));
}

TEST_CASE("authenticators bind signer and message") {
    const Digest msg = vote_signing_digest(genesis_digest(), 3);
    const Auth a = make_auth(2, msg);
    CHECK(verify_auth(a, 2, msg));
    CHECK_FALSE(verify_auth(a, 3, msg));
    const Digest other = vote_signing_digest(genesis_digest(), 4);
    CHECK_FALSE(verify_auth(a, 2, other));
}

TEST_CASE("protocol config validation") {
    CHECK_NOTHROW(validate_protocol_config(ProtocolConfig{4, Rational(2, 3), 100, 2}));
    CHECK_THROWS(validate_protocol_config(ProtocolConfig{4, Rational(1, 3), 100, 2}));
    CHECK_THROWS(validate_protocol_config(ProtocolConfig{4, Rational(1), 100, 2}));
    CHECK_THROWS(validate_protocol_config(ProtocolConfig{4, Rational(2, 3), 0, 2}));
}

TEST_CASE("block store resolves chains") {
    Chain c;
    CHECK(c.store.chain_resolved(c.b3));
    BlockStore partial;
    const Block orphan = make_block(5, "orphan", Digest{{0x01}});
    const Digest d = partial.put(orphan);
    CHECK_FALSE(partial.chain_resolved(d));
}
