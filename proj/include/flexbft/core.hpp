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
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <vector>

#include "bytes.hpp"
#include "rational.hpp"
#include "sha256.hpp"

namespace flexbft {

using ReplicaId = std::uint32_t;
using View = std::uint64_t;
using Height = std::uint64_t;

/// Virtual time in integer ticks. There is one global clock; replicas
/// never read anything else.
using Time = std::int64_t;

constexpr Time kTimeInfinity = INT64_MAX;

/// 32-byte collision-resistant hash value.
struct Digest {
    std::array<std::uint8_t, 32> bytes{};

    auto operator<=>(const Digest&) const = default;

    [[nodiscard]] std::string hex() const { return hex_encode(bytes); }

    static Digest from_hex(const std::string& text) {
        const Bytes raw = hex_decode(text);
        if (raw.size() != 32) throw std::invalid_argument("digest: expected 32 bytes");
        Digest d;
        std::copy(raw.begin(), raw.end(), d.bytes.begin());
        return d;
    }
};

inline Digest sha256_digest(std::span<const std::uint8_t> data) {
    return Digest{Sha256::digest(data)};
}

/// A height-indexed value carrying a digest link to its parent. The
/// genesis block sits at height 0 with an all-zeros parent digest so
/// that ranking logic never has to special-case a missing parent.
struct Block {
    Height height = 0;
    Bytes payload;
    Digest parent;

    bool operator==(const Block&) const = default;

    /// Canonical encoding: LE u64 height, LE u64 payload length, payload
    /// bytes, 32-byte parent digest. This layout is frozen; transcripts
    /// rely on it being bit-identical across platforms.
    [[nodiscard]] Bytes encode() const {
        ByteWriter w;
        w.u64(height);
        w.u64(payload.size());
        w.raw(payload);
        w.raw(parent.bytes);
        return w.take();
    }

    static Block decode(ByteReader& r) {
        Block b;
        b.height = r.u64();
        b.payload = r.blob();
        r.raw(b.parent.bytes);
        return b;
    }
};

inline Digest block_digest(const Block& block) {
    const Bytes enc = block.encode();
    return sha256_digest(enc);
}

inline const Block& genesis_block() {
    static const Block g{};
    return g;
}

inline const Digest& genesis_digest() {
    static const Digest d = block_digest(genesis_block());
    return d;
}

/// Simulated signature: a token binding a signer identity to a message
/// digest. Verification recomputes the tag, so a token made for one
/// identity never verifies for another. A real signature scheme can be
/// swapped in behind the same three functions.
struct Auth {
    ReplicaId signer = 0;
    Digest tag;

    bool operator==(const Auth&) const = default;

    [[nodiscard]] Bytes encode() const {
        ByteWriter w;
        w.u32(signer);
        w.raw(tag.bytes);
        return w.take();
    }

    static Auth decode(ByteReader& r) {
        Auth a;
        a.signer = r.u32();
        r.raw(a.tag.bytes);
        return a;
    }
};

inline Auth make_auth(ReplicaId signer, const Digest& message) {
    ByteWriter w;
    w.str("fbft-auth");
    w.u32(signer);
    w.raw(message.bytes);
    return Auth{signer, sha256_digest(w.bytes())};
}

inline bool verify_auth(const Auth& auth, ReplicaId expected_signer, const Digest& message) {
    return auth.signer == expected_signer && auth == make_auth(expected_signer, message);
}

/// Signing payload for a vote on (block, view).
inline Digest vote_signing_digest(const Digest& block, View view) {
    ByteWriter w;
    w.str("fbft-vote");
    w.raw(block.bytes);
    w.u64(view);
    return sha256_digest(w.bytes());
}

struct Vote {
    Digest block;
    View view = 0;
    ReplicaId voter = 0;
    Auth auth;

    bool operator==(const Vote&) const = default;

    [[nodiscard]] bool verify() const {
        return verify_auth(auth, voter, vote_signing_digest(block, view));
    }

    [[nodiscard]] Bytes encode() const {
        ByteWriter w;
        w.raw(block.bytes);
        w.u64(view);
        w.u32(voter);
        w.raw(auth.encode());
        return w.take();
    }

    static Vote decode(ByteReader& r) {
        Vote v;
        r.raw(v.block.bytes);
        v.view = r.u64();
        v.voter = r.u32();
        v.auth = Auth::decode(r);
        return v;
    }
};

inline Vote make_vote(ReplicaId voter, const Digest& block, View view) {
    return Vote{block, view, voter, make_auth(voter, vote_signing_digest(block, view))};
}

/// A set of quorum votes on one block from one view; the protocol's
/// ranking unit. Votes are kept sorted by voter so the encoding is
/// canonical. The genesis certificate is the one empty-vote exception,
/// installed at bootstrap on every replica.
struct Certificate {
    Digest block;
    Height height = 0;
    View view = 0;
    std::vector<Vote> votes;  // sorted by voter, distinct

    bool operator==(const Certificate&) const = default;

    [[nodiscard]] Bytes encode() const {
        ByteWriter w;
        w.raw(block.bytes);
        w.u64(height);
        w.u64(view);
        w.u64(votes.size());
        for (const Vote& v : votes) w.raw(v.encode());
        return w.take();
    }

    static Certificate decode(ByteReader& r) {
        Certificate c;
        r.raw(c.block.bytes);
        c.height = r.u64();
        c.view = r.u64();
        const std::uint64_t n = r.u64();
        c.votes.reserve(n);
        for (std::uint64_t i = 0; i < n; ++i) c.votes.push_back(Vote::decode(r));
        return c;
    }
};

inline const Certificate& genesis_certificate() {
    static const Certificate c{genesis_digest(), 0, 0, {}};
    return c;
}

inline bool is_genesis_certificate(const Certificate& cert) {
    return cert == genesis_certificate();
}

/// Protocol-wide parameters fixed for a run.
struct ProtocolConfig {
    std::size_t n = 0;
    Rational q_r;            // replica quorum fraction, in (1/2, 1]
    Time base_timeout = 0;   // view-0 no-progress deadline
    std::int64_t timeout_growth = 2;  // multiplier per view
};

/// Smallest vote count m such that m out of n is strictly more than the
/// fraction q: floor(q*n)+1 when q*n is integral, ceil(q*n) otherwise.
/// The protocol's quorum fractions are "slightly larger than" thresholds,
/// so inclusive rounding at exact boundaries would be off by one.
inline std::size_t quorum_count(std::size_t n, const Rational& q) {
    if (n < 1) throw std::invalid_argument("quorum_count: n must be >= 1");
    if (q <= Rational(0) || q > Rational(1))
        throw std::invalid_argument("quorum_count: fraction must be in (0, 1]");
    const std::int64_t prod = q.num() * static_cast<std::int64_t>(n);
    if (prod % q.den() == 0) return static_cast<std::size_t>(prod / q.den()) + 1;
    return static_cast<std::size_t>((prod + q.den() - 1) / q.den());
}

inline void validate_protocol_config(const ProtocolConfig& cfg) {
    if (cfg.n < 1) throw std::invalid_argument("protocol: n must be >= 1");
    if (!(cfg.q_r > Rational(1, 2)))
        throw std::invalid_argument("protocol: q_r must exceed 1/2");
    if (quorum_count(cfg.n, cfg.q_r) > cfg.n)
        throw std::invalid_argument("protocol: quorum exceeds replica count");
    if (cfg.base_timeout <= 0) throw std::invalid_argument("protocol: base_timeout must be positive");
    if (cfg.timeout_growth < 1) throw std::invalid_argument("protocol: timeout_growth must be >= 1");
}

/// Append-only digest-keyed block map. Each replica owns one; the
/// simulation loop never shares stores across replicas.
class BlockStore {
public:
    BlockStore() { put(genesis_block()); }

    /// Inserts the block keyed by its digest; idempotent.
    const Digest& put(const Block& block) {
        const Digest d = block_digest(block);
        auto [it, inserted] = blocks_.emplace(d, block);
        return it->first;
    }

    [[nodiscard]] bool contains(const Digest& d) const { return blocks_.count(d) > 0; }

    [[nodiscard]] const Block& get(const Digest& d) const {
        const auto it = blocks_.find(d);
        if (it == blocks_.end())
            throw std::out_of_range("block store: unresolved digest " + d.hex());
        return it->second;
    }

    [[nodiscard]] const Block* find(const Digest& d) const {
        const auto it = blocks_.find(d);
        return it == blocks_.end() ? nullptr : &it->second;
    }

    [[nodiscard]] const std::map<Digest, Block>& all() const { return blocks_; }

    /// A block is valid when its parent chain resolves down to genesis
    /// with heights decreasing by exactly one.
    [[nodiscard]] bool chain_resolved(const Digest& d) const {
        const Block* b = find(d);
        while (b != nullptr) {
            if (b->height == 0) return *b == genesis_block();
            const Block* parent = find(b->parent);
            if (parent == nullptr || parent->height + 1 != b->height) return false;
            b = parent;
        }
        return false;
    }

private:
    std::map<Digest, Block> blocks_;
};

/// True iff `ancestor` lies on `descendant`'s parent chain, or the two
/// are equal (a block extends itself for commit-rule purposes).
inline bool extends(const Digest& descendant, const Digest& ancestor, const BlockStore& store) {
    const Block& anc = store.get(ancestor);
    Digest cur = descendant;
    while (true) {
        if (cur == ancestor) return true;
        const Block& b = store.get(cur);
        if (b.height <= anc.height) return false;
        cur = b.parent;
    }
}

/// True iff the blocks are distinct and neither extends the other.
inline bool equivocates(const Digest& a, const Digest& b, const BlockStore& store) {
    if (a == b) return false;
    return !extends(a, b, store) && !extends(b, a, store);
}

/// Certified blocks are ranked first by the view in which they were
/// certified, then by height. Equal (view, height) compare equal even
/// for different blocks; callers break such ties explicitly.
inline std::strong_ordering rank_certificates(const Certificate& a, const Certificate& b) {
    if (auto c = a.view <=> b.view; c != std::strong_ordering::equal) return c;
    return a.height <=> b.height;
}

/// Full certificate check: distinct voters, valid authenticators, all
/// votes on (block, view), and at least quorum_count(n, q_r) of them.
inline bool verify_certificate(const Certificate& cert, const ProtocolConfig& cfg) {
    if (is_genesis_certificate(cert)) return true;
    std::set<ReplicaId> voters;
    for (const Vote& v : cert.votes) {
        if (v.block != cert.block || v.view != cert.view) return false;
        if (!v.verify()) return false;
        if (!voters.insert(v.voter).second) return false;
        if (v.voter >= cfg.n) return false;
    }
    return voters.size() >= quorum_count(cfg.n, cfg.q_r);
}

}  // namespace flexbft
