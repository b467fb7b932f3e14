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

#include <map>

#include "core.hpp"

namespace flexbft {

/// Timestamp of a lock on one block: the moment both the certificate
/// and an in-view successor proposal were known.
struct LockStamp {
    Time time = 0;
    Digest block;

    bool operator==(const LockStamp&) const = default;
};

using HeightView = std::pair<Height, View>;

/// A replica's protocol state as exposed to clients: verifiable vote
/// sets, every certificate it knows, the three timestamp families, and
/// the blocks needed to resolve ancestry. Faulty replicas may distort
/// the timestamp maps and withhold entries, but votes and certificates
/// carry authenticators and cannot be fabricated for other identities.
struct ReplicaReport {
    ReplicaId replica = 0;
    Time time = 0;
    View view = 0;
    std::map<Digest, Block> blocks;
    std::map<std::pair<Digest, View>, std::vector<Vote>> votes;
    std::vector<Certificate> certificates;
    std::map<HeightView, LockStamp> t_lock;
    std::map<HeightView, Time> t_equiv;
    std::map<View, Time> t_viewchange;

    bool operator==(const ReplicaReport&) const = default;

    [[nodiscard]] Bytes encode() const {
        ByteWriter w;
        w.u32(replica);
        w.i64(time);
        w.u64(view);
        w.u64(blocks.size());
        for (const auto& [d, b] : blocks) {
            w.raw(d.bytes);
            w.blob(b.encode());
        }
        w.u64(votes.size());
        for (const auto& [key, vs] : votes) {
            w.raw(key.first.bytes);
            w.u64(key.second);
            w.u64(vs.size());
            for (const Vote& v : vs) w.raw(v.encode());
        }
        w.u64(certificates.size());
        for (const Certificate& c : certificates) w.blob(c.encode());
        w.u64(t_lock.size());
        for (const auto& [key, stamp] : t_lock) {
            w.u64(key.first);
            w.u64(key.second);
            w.i64(stamp.time);
            w.raw(stamp.block.bytes);
        }
        w.u64(t_equiv.size());
        for (const auto& [key, t] : t_equiv) {
            w.u64(key.first);
            w.u64(key.second);
            w.i64(t);
        }
        w.u64(t_viewchange.size());
        for (const auto& [v, t] : t_viewchange) {
            w.u64(v);
            w.i64(t);
        }
        return w.take();
    }

    static ReplicaReport decode(ByteReader& r) {
        ReplicaReport rep;
        rep.replica = r.u32();
        rep.time = r.i64();
        rep.view = r.u64();
        for (std::uint64_t i = r.u64(); i > 0; --i) {
            Digest d;
            r.raw(d.bytes);
            const Bytes raw = r.blob();
            ByteReader br(raw);
            rep.blocks.emplace(d, Block::decode(br));
        }
        for (std::uint64_t i = r.u64(); i > 0; --i) {
            Digest d;
            r.raw(d.bytes);
            const View view = r.u64();
            std::vector<Vote> vs;
            for (std::uint64_t j = r.u64(); j > 0; --j) vs.push_back(Vote::decode(r));
            rep.votes.emplace(std::make_pair(d, view), std::move(vs));
        }
        for (std::uint64_t i = r.u64(); i > 0; --i) {
            const Bytes raw = r.blob();
            ByteReader br(raw);
            rep.certificates.push_back(Certificate::decode(br));
        }
        for (std::uint64_t i = r.u64(); i > 0; --i) {
            const Height h = r.u64();
            const View v = r.u64();
            LockStamp stamp;
            stamp.time = r.i64();
            r.raw(stamp.block.bytes);
            rep.t_lock.emplace(std::make_pair(h, v), stamp);
        }
        for (std::uint64_t i = r.u64(); i > 0; --i) {
            const Height h = r.u64();
            const View v = r.u64();
            rep.t_equiv.emplace(std::make_pair(h, v), r.i64());
        }
        for (std::uint64_t i = r.u64(); i > 0; --i) {
            const View v = r.u64();
            rep.t_viewchange.emplace(v, r.i64());
        }
        return rep;
    }
};

}  // namespace flexbft
