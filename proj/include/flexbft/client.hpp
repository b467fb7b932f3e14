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

#include <span>
#include <sstream>

#include "calculus.hpp"
#include "report.hpp"

namespace flexbft {

enum class CommitRule : std::uint8_t { CR1 = 0, CR2 = 1 };

/// What a client believes about the system. Partial-synchrony clients
/// pick a commit quorum q_c >= q_r; synchrony clients pick a message
/// delay bound. Evaluation never mixes the two.
struct ClientAssumption {
    enum class Mode : std::uint8_t { PartialSync = 0, Sync = 1 };

    Mode mode = Mode::PartialSync;
    Rational q_c;    // PartialSync only
    Time delta = 0;  // Sync only

    static ClientAssumption partial_sync(Rational q_c) {
        return ClientAssumption{Mode::PartialSync, q_c, 0};
    }
    static ClientAssumption sync(Time delta) {
        return ClientAssumption{Mode::Sync, Rational(0), delta};
    }

    bool operator==(const ClientAssumption&) const = default;

    [[nodiscard]] std::string str() const {
        if (mode == Mode::PartialSync) return "cr1 q_c=" + q_c.str();
        return "cr2 delta=" + std::to_string(delta);
    }
};

inline void validate_assumption(const ClientAssumption& a, const ProtocolConfig& cfg) {
    if (a.mode == ClientAssumption::Mode::PartialSync) {
        if (a.q_c < cfg.q_r) throw std::invalid_argument("client: q_c must be >= q_r");
        if (a.q_c > Rational(1)) throw std::invalid_argument("client: q_c must be <= 1");
    } else {
        if (a.delta <= 0) throw std::invalid_argument("client: delta must be positive");
    }
}

/// CR1 evidence: the view and the two vote sets that crossed the client
/// quorum on consecutive heights.
struct Cr1Evidence {
    View view = 0;
    Digest block_l;
    Digest block_l1;
    std::vector<ReplicaId> voters_l;
    std::vector<ReplicaId> voters_l1;

    bool operator==(const Cr1Evidence&) const = default;
};

/// One replica's CR2 attestation: a certified block whose undisturbed
/// window reached 2*delta before the report was emitted.
struct Cr2Attestation {
    ReplicaId replica = 0;
    Digest block;
    Height height = 0;
    View view = 0;
    Time lock_time = 0;
    Time window_end = 0;  // min(report time, t_equiv, t_viewchange)

    bool operator==(const Cr2Attestation&) const = default;
};

struct CommitDecision {
    Digest block;
    Height height = 0;
    CommitRule rule = CommitRule::CR1;
    bool direct = false;
    View view = 0;  // view of the direct evidence this decision rests on
    Time decided_at = 0;
    std::optional<Cr1Evidence> cr1;
    std::vector<Cr2Attestation> cr2;

    bool operator==(const CommitDecision&) const = default;

    [[nodiscard]] Bytes encode() const {
        ByteWriter w;
        w.raw(block.bytes);
        w.u64(height);
        w.u8(static_cast<std::uint8_t>(rule));
        w.u8(direct ? 1 : 0);
        w.u64(view);
        w.i64(decided_at);
        w.u8(cr1.has_value() ? 1 : 0);
        if (cr1) {
            w.u64(cr1->view);
            w.raw(cr1->block_l.bytes);
            w.raw(cr1->block_l1.bytes);
            w.u64(cr1->voters_l.size());
            for (ReplicaId r : cr1->voters_l) w.u32(r);
            w.u64(cr1->voters_l1.size());
            for (ReplicaId r : cr1->voters_l1) w.u32(r);
        }
        w.u64(cr2.size());
        for (const Cr2Attestation& a : cr2) {
            w.u32(a.replica);
            w.raw(a.block.bytes);
            w.u64(a.height);
            w.u64(a.view);
            w.i64(a.lock_time);
            w.i64(a.window_end);
        }
        return w.take();
    }

    static CommitDecision decode(ByteReader& r) {
        CommitDecision d;
        r.raw(d.block.bytes);
        d.height = r.u64();
        d.rule = static_cast<CommitRule>(r.u8());
        d.direct = r.u8() == 1;
        d.view = r.u64();
        d.decided_at = r.i64();
        if (r.u8() == 1) {
            Cr1Evidence ev;
            ev.view = r.u64();
            r.raw(ev.block_l.bytes);
            r.raw(ev.block_l1.bytes);
            for (std::uint64_t i = r.u64(); i > 0; --i) ev.voters_l.push_back(r.u32());
            for (std::uint64_t i = r.u64(); i > 0; --i) ev.voters_l1.push_back(r.u32());
            d.cr1 = std::move(ev);
        }
        for (std::uint64_t i = r.u64(); i > 0; --i) {
            Cr2Attestation a;
            a.replica = r.u32();
            r.raw(a.block.bytes);
            a.height = r.u64();
            a.view = r.u64();
            a.lock_time = r.i64();
            a.window_end = r.i64();
            d.cr2.push_back(a);
        }
        return d;
    }
};

/// Verified material pooled from replica reports: resolved blocks and
/// per-(block, view) voter sets unioned by voter identity. Votes are
/// broadcast and self-authenticating, so a client may assemble a quorum
/// no single replica saw.
struct ReportPool {
    BlockStore blocks;
    std::map<std::pair<Digest, View>, std::map<ReplicaId, Vote>> votes;

    void absorb(const ReplicaReport& rep, std::size_t n) {
        for (const auto& [digest, block] : rep.blocks)
            if (!blocks.contains(digest) && block_digest(block) == digest) blocks.put(block);
        for (const auto& [key, vs] : rep.votes) {
            auto& slot = votes[key];
            for (const Vote& v : vs) {
                if (v.block != key.first || v.view != key.second) continue;
                if (v.voter >= n || slot.count(v.voter) > 0) continue;
                if (!v.verify()) continue;
                slot.emplace(v.voter, v);
            }
        }
    }
};

inline ReportPool build_pool(std::span<const ReplicaReport> reports, const ProtocolConfig& cfg) {
    ReportPool pool;
    for (const ReplicaReport& rep : reports) pool.absorb(rep, cfg.n);
    return pool;
}

namespace detail {

inline std::vector<CommitDecision> with_ancestors(std::vector<CommitDecision> directs,
                                                  const BlockStore& store) {
    std::map<Digest, CommitDecision> all;
    for (const CommitDecision& d : directs) {
        auto existing = all.find(d.block);
        if (existing == all.end() || existing->second.view > d.view) all[d.block] = d;
    }
    for (const CommitDecision& d : directs) {
        Digest cur = store.get(d.block).parent;
        while (true) {
            const Block& b = store.get(cur);
            if (b.height == 0) break;
            if (all.count(cur) == 0) {
                CommitDecision ind = d;
                ind.block = cur;
                ind.height = b.height;
                ind.direct = false;
                all[cur] = ind;
            }
            cur = b.parent;
        }
    }
    std::vector<CommitDecision> out;
    out.reserve(all.size());
    for (auto& [digest, d] : all) out.push_back(std::move(d));
    std::sort(out.begin(), out.end(), [](const CommitDecision& a, const CommitDecision& b) {
        if (a.height != b.height) return a.height < b.height;
        return a.block < b.block;
    });
    return out;
}

inline std::vector<CommitDecision> cr1_from_pool(const ReportPool& pool, const Rational& q_c,
                                                 const ProtocolConfig& cfg, Time now) {
    const std::size_t need =
        std::max(quorum_count(cfg.n, q_c), quorum_count(cfg.n, cfg.q_r));
    std::vector<CommitDecision> directs;
    for (const auto& [key, by_voter] : pool.votes) {
        if (by_voter.size() < need) continue;
        const auto& [child_digest, view] = key;
        const Block* child = pool.blocks.find(child_digest);
        if (child == nullptr || child->height < 2) continue;
        if (!pool.blocks.chain_resolved(child_digest)) continue;
        const Digest parent_digest = child->parent;
        const Block& parent = pool.blocks.get(parent_digest);
        const auto parent_votes = pool.votes.find({parent_digest, view});
        if (parent_votes == pool.votes.end() || parent_votes->second.size() < need) continue;

        CommitDecision d;
        d.block = parent_digest;
        d.height = parent.height;
        d.rule = CommitRule::CR1;
        d.direct = true;
        d.view = view;
        d.decided_at = now;
        Cr1Evidence ev;
        ev.view = view;
        ev.block_l = parent_digest;
        ev.block_l1 = child_digest;
        for (const auto& [voter, vote] : parent_votes->second) ev.voters_l.push_back(voter);
        for (const auto& [voter, vote] : by_voter) ev.voters_l1.push_back(voter);
        d.cr1 = std::move(ev);
        directs.push_back(std::move(d));
    }
    return with_ancestors(std::move(directs), pool.blocks);
}

/// `cert_valid` lets a caller cache certificate verification across
/// probes; certificates are immutable values.
template <typename CertValid>
std::vector<CommitDecision> cr2_from_reports(std::span<const ReplicaReport> reports,
                                             const BlockStore& blocks, Time delta,
                                             const ProtocolConfig& cfg, Time now,
                                             CertValid&& cert_valid) {
    const std::size_t need = quorum_count(cfg.n, cfg.q_r);

    // strongest attestation per (replica, block)
    std::map<std::pair<ReplicaId, Digest>, Cr2Attestation> attested;
    for (const ReplicaReport& rep : reports) {
        for (const Certificate& cert : rep.certificates) {
            if (cert.height == 0) continue;
            const Block* block = blocks.find(cert.block);
            if (block == nullptr || block->height != cert.height) continue;
            const auto lock = rep.t_lock.find({cert.height, cert.view});
            if (lock == rep.t_lock.end() || lock->second.block != cert.block) continue;
            const auto equiv = rep.t_equiv.find({cert.height, cert.view});
            const auto viewchange = rep.t_viewchange.find(cert.view);
            Time window_end = rep.time;
            if (equiv != rep.t_equiv.end()) window_end = std::min(window_end, equiv->second);
            if (viewchange != rep.t_viewchange.end())
                window_end = std::min(window_end, viewchange->second);
            if (window_end - lock->second.time < 2 * delta) continue;
            if (!cert_valid(cert)) continue;
            Cr2Attestation att{rep.replica, cert.block, cert.height, cert.view,
                               lock->second.time, window_end};
            auto [it, inserted] = attested.emplace(std::make_pair(rep.replica, cert.block), att);
            if (!inserted && att.window_end > it->second.window_end) it->second = att;
        }
    }

    std::vector<CommitDecision> directs;
    for (const auto& [digest, block] : blocks.all()) {
        if (block.height == 0) continue;
        if (!blocks.chain_resolved(digest)) continue;
        std::vector<Cr2Attestation> support;
        std::set<ReplicaId> supporters;
        for (const auto& [key, att] : attested) {
            if (!blocks.contains(att.block)) continue;
            if (!extends(att.block, digest, blocks)) continue;
            if (supporters.insert(att.replica).second) support.push_back(att);
        }
        if (supporters.size() < need) continue;
        CommitDecision d;
        d.block = digest;
        d.height = block.height;
        d.rule = CommitRule::CR2;
        d.direct = true;  // maximal commits stay direct; ancestors flip below
        // anchor the decision at the earliest view attesting this block
        // itself, falling back to the earliest supporting view
        d.view = support.front().view;
        bool own = false;
        for (const Cr2Attestation& att : support) {
            if (att.block == digest && (!own || att.view < d.view)) {
                d.view = att.view;
                own = true;
            } else if (!own) {
                d.view = std::min(d.view, att.view);
            }
        }
        d.decided_at = now;
        d.cr2 = std::move(support);
        directs.push_back(std::move(d));
    }

    // only blocks not strictly extended by another committed block are direct
    std::vector<CommitDecision> maximal;
    for (const CommitDecision& d : directs) {
        const bool is_max =
            std::none_of(directs.begin(), directs.end(), [&](const CommitDecision& other) {
                return other.block != d.block && extends(other.block, d.block, blocks);
            });
        if (is_max) maximal.push_back(d);
    }
    return with_ancestors(std::move(maximal), blocks);
}

}  // namespace detail

/// Partially synchronous commit rule. A block commits iff two certified
/// consecutive blocks in one view each gathered at least
/// quorum_count(n, q_c) verified votes across the pooled reports; the
/// base of the pair commits directly, its ancestors indirectly.
inline std::vector<CommitDecision> evaluate_cr1(std::span<const ReplicaReport> reports,
                                                const Rational& q_c, const ProtocolConfig& cfg,
                                                Time now = 0) {
    return detail::cr1_from_pool(build_pool(reports, cfg), q_c, cfg, now);
}

/// Synchronous commit rule with client bound delta. A block commits iff
/// quorum_count(n, q_r) distinct replicas each attest, for some (l, v)
/// of their own, a certified block extending it whose undisturbed
/// window min(report time, t_equiv, t_viewchange) - t_lock reached
/// 2*delta. Absent disturbance entries count as infinity; a missing
/// lock stamp means no attestation.
inline std::vector<CommitDecision> evaluate_cr2(std::span<const ReplicaReport> reports,
                                                Time delta, const ProtocolConfig& cfg,
                                                Time now = 0) {
    const ReportPool pool = build_pool(reports, cfg);
    return detail::cr2_from_reports(reports, pool.blocks, delta, cfg, now,
                                    [&](const Certificate& c) {
                                        return verify_certificate(c, cfg);
                                    });
}

/// A client's committed view of the world. Decisions for a height stay
/// unique unless assumptions were wrong, in which case the conflict
/// flag latches and both branches are retained for audit.
struct ClientState {
    ClientAssumption assumption;
    std::vector<CommitDecision> committed;  // insertion order
    bool conflict_flag = false;

    [[nodiscard]] Height committed_height() const {
        Height h = 0;
        for (const CommitDecision& d : committed) h = std::max(h, d.height);
        return h;
    }

    [[nodiscard]] const CommitDecision* find(Height h, const Digest& block) const {
        for (const CommitDecision& d : committed)
            if (d.height == h && d.block == block) return &d;
        return nullptr;
    }
};

/// Appends fresh decisions; duplicates are idempotent, equivocating
/// decisions latch the conflict flag but are retained.
inline std::vector<CommitDecision> integrate_commits(ClientState& state,
                                                     std::span<const CommitDecision> fresh,
                                                     const BlockStore& blocks) {
    std::vector<CommitDecision> appended;
    for (const CommitDecision& d : fresh) {
        if (state.find(d.height, d.block) != nullptr) continue;  // idempotent
        for (const CommitDecision& existing : state.committed) {
            if (blocks.contains(d.block) && blocks.contains(existing.block) &&
                equivocates(d.block, existing.block, blocks)) {
                state.conflict_flag = true;
                break;
            }
        }
        state.committed.push_back(d);
        appended.push_back(d);
    }
    return appended;
}

enum class ObservedCondition : std::uint8_t { SafetyViolation, NoProgress };

/// Result of a client updating its fault model after observing trouble.
struct Adjustment {
    std::optional<ClientAssumption> next;
    bool switch_rule_family = false;  // no CR1 rule can help; move to CR2
};

/// One replica-step of assumption adjustment. Raising q_c to m/n (m the
/// current quorum count) bumps the required vote count by exactly one;
/// lowering steps down one vote, floored at q_r. A synchrony client
/// that lost safety doubles its delta.
inline Adjustment recommend_adjustment(const ClientAssumption& assumption,
                                       ObservedCondition observed, const ProtocolConfig& cfg) {
    Adjustment adj;
    if (assumption.mode == ClientAssumption::Mode::Sync) {
        if (observed == ObservedCondition::SafetyViolation)
            adj.next = ClientAssumption::sync(assumption.delta * 2);
        else
            adj.next = assumption;  // CR2 liveness does not depend on delta
        return adj;
    }
    const auto n = static_cast<std::int64_t>(cfg.n);
    const auto m = static_cast<std::int64_t>(quorum_count(cfg.n, assumption.q_c));
    if (observed == ObservedCondition::SafetyViolation) {
        if (assumption.q_c == Rational(1)) {
            adj.switch_rule_family = true;  // no stricter CR1 rule exists
            return adj;
        }
        adj.next = ClientAssumption::partial_sync(Rational(m, n));
        return adj;
    }
    // NoProgress: one vote fewer, floored at q_r
    Rational lowered(m - 2, n);
    if (lowered < cfg.q_r) lowered = cfg.q_r;
    adj.next = ClientAssumption::partial_sync(lowered);
    return adj;
}

/// Committed-chain export: one record per decision, ordered by height
/// then digest, tab-separated (height, digest, rule, direct, view).
inline std::string export_committed_chain(const ClientState& state) {
    std::vector<CommitDecision> sorted = state.committed;
    std::sort(sorted.begin(), sorted.end(), [](const CommitDecision& a, const CommitDecision& b) {
        if (a.height != b.height) return a.height < b.height;
        return a.block < b.block;
    });
    std::ostringstream out;
    for (const CommitDecision& d : sorted) {
        out << d.height << '\t' << d.block.hex() << '\t'
            << (d.rule == CommitRule::CR1 ? "CR1" : "CR2") << '\t'
            << (d.direct ? "direct" : "indirect") << '\t' << d.view << '\n';
    }
    return out.str();
}

/// The in-run client driver. Verified votes and blocks accumulate in a
/// pool (vote sets only ever grow), while CR2 windows are re-evaluated
/// against each replica's newest report; commits, once integrated, are
/// never revoked. Distinct clients are fully independent.
class ClientObserver {
public:
    ClientObserver(ClientAssumption assumption, ProtocolConfig cfg) : cfg_(cfg) {
        state_.assumption = assumption;
    }

    /// Feeds one probe's worth of reports; returns newly appended
    /// decisions.
    std::vector<CommitDecision> observe(std::span<const ReplicaReport> fresh, Time now) {
        for (const ReplicaReport& rep : fresh) {
            pool_.absorb(rep, cfg_.n);
            auto [it, inserted] = latest_.emplace(rep.replica, rep);
            if (!inserted && rep.time >= it->second.time) it->second = rep;
        }
        std::vector<CommitDecision> decisions;
        if (state_.assumption.mode == ClientAssumption::Mode::PartialSync) {
            decisions = detail::cr1_from_pool(pool_, state_.assumption.q_c, cfg_, now);
        } else {
            std::vector<ReplicaReport> reports;
            reports.reserve(latest_.size());
            for (const auto& [id, rep] : latest_) reports.push_back(rep);
            decisions = detail::cr2_from_reports(
                reports, pool_.blocks, state_.assumption.delta, cfg_, now,
                [&](const Certificate& c) { return cert_valid_cached(c); });
        }
        return integrate_commits(state_, decisions, pool_.blocks);
    }

    [[nodiscard]] const ClientState& state() const { return state_; }
    [[nodiscard]] const ReportPool& pool() const { return pool_; }

private:
    bool cert_valid_cached(const Certificate& cert) {
        const Bytes enc = cert.encode();
        const Digest key = sha256_digest(enc);
        const auto it = cert_cache_.find(key);
        if (it != cert_cache_.end()) return it->second;
        const bool ok = verify_certificate(cert, cfg_);
        cert_cache_.emplace(key, ok);
        return ok;
    }

    ProtocolConfig cfg_;
    ClientState state_;
    ReportPool pool_;
    std::map<ReplicaId, ReplicaReport> latest_;
    std::map<Digest, bool> cert_cache_;
};

}  // namespace flexbft
