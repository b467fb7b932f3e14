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

#include <deque>

#include "netsim.hpp"
#include "report.hpp"

namespace flexbft {

constexpr std::uint64_t kTimerStart = std::uint64_t{1} << 56;
constexpr std::uint64_t kTimerViewDeadline = std::uint64_t{2} << 56;
constexpr std::uint64_t kTimerTagMask = ~((std::uint64_t{0xff}) << 56);

inline std::uint64_t view_deadline_tag(View v) { return kTimerViewDeadline | v; }

inline Bytes make_payload(Height height, View view, ReplicaId leader) {
    return to_bytes("h" + std::to_string(height) + "/v" + std::to_string(view) + "/L" +
                    std::to_string(leader));
}

/// The replica state machine. Runs at network speed: a handler never
/// waits and never consults a synchrony bound. Each handler is a
/// deterministic function of (state, event, now) returning the messages
/// and timers it wants scheduled; the simulation loop owns all I/O.
///
/// Committing is not done here at all. Replicas only certify blocks and
/// record the vote counts and timestamps that clients later interpret
/// under their own assumptions.
class Replica {
public:
    Replica(ReplicaId id, ProtocolConfig cfg, Height propose_limit)
        : id_(id),
          cfg_(cfg),
          quorum_(quorum_count(cfg.n, cfg.q_r)),
          propose_limit_(propose_limit) {
        certs_.emplace(std::make_pair(genesis_digest(), View{0}), genesis_certificate());
        highest_cert_ = genesis_certificate();
    }

    [[nodiscard]] ReplicaId id() const { return id_; }
    [[nodiscard]] View view() const { return view_; }
    [[nodiscard]] ReplicaId leader_of(View v) const {
        return static_cast<ReplicaId>(v % cfg_.n);
    }
    [[nodiscard]] const Certificate& highest_cert() const { return highest_cert_; }
    [[nodiscard]] const BlockStore& store() const { return store_; }
    [[nodiscard]] const std::map<HeightView, LockStamp>& lock_times() const { return t_lock_; }
    [[nodiscard]] const std::map<HeightView, Time>& equiv_times() const { return t_equiv_; }
    [[nodiscard]] const std::map<View, Time>& viewchange_times() const { return t_viewchange_; }
    [[nodiscard]] bool has_blamed(View v) const { return blamed_.count(v) > 0; }
    [[nodiscard]] const std::map<std::pair<Digest, View>, Certificate>& certificates() const {
        return certs_;
    }

    /// Entry point for every event addressed to this replica.
    std::vector<Outbound> handle(const Event& event, Time now) {
        std::vector<Outbound> out;
        if (const auto* deliver = std::get_if<DeliverEvent>(&event.body)) {
            dispatch(deliver->message, now, out);
        } else if (const auto* timer = std::get_if<TimerEvent>(&event.body)) {
            on_timer(timer->tag, now, out);
        }
        return out;
    }

    /// Read-only snapshot of everything a client commit rule consumes.
    [[nodiscard]] ReplicaReport report_snapshot(Time now) const {
        ReplicaReport rep;
        rep.replica = id_;
        rep.time = now;
        rep.view = view_;
        rep.blocks = store_.all();
        for (const auto& [key, by_voter] : votes_) {
            std::vector<Vote> vs;
            vs.reserve(by_voter.size());
            for (const auto& [voter, vote] : by_voter) vs.push_back(vote);
            rep.votes.emplace(key, std::move(vs));
        }
        for (const auto& [key, cert] : certs_) rep.certificates.push_back(cert);
        rep.t_lock = t_lock_;
        rep.t_equiv = t_equiv_;
        rep.t_viewchange = t_viewchange_;
        return rep;
    }

private:
    friend class ReplicaInspector;

    void dispatch(const Message& msg, Time now, std::vector<Outbound>& out) {
        if (const auto* p = std::get_if<ProposalMsg>(&msg)) {
            on_proposal(*p, now, out);
        } else if (const auto* v = std::get_if<VoteMsg>(&msg)) {
            on_vote(*v, now, out);
        } else if (const auto* b = std::get_if<BlameMsg>(&msg)) {
            on_blame(*b, now, out);
        } else if (const auto* bc = std::get_if<BlameCertMsg>(&msg)) {
            on_blame_cert(*bc, now, out);
        } else if (const auto* s = std::get_if<StatusMsg>(&msg)) {
            on_status(*s, now, out);
        }
    }

    // ---- proposals ----

    void on_proposal(const ProposalMsg& p, Time now, std::vector<Outbound>& out) {
        if (!valid_proposal_signature(p)) return;  // dropped
        if (p.view > view_) {
            future_.emplace_back(p.view, Message{p});
            return;
        }
        if (p.view < view_) return;  // stale
        try_accept_proposal(p, now, out);
    }

    [[nodiscard]] bool valid_proposal_signature(const ProposalMsg& p) const {
        if (p.proposer != leader_of(p.view)) return false;
        if (p.block.height == 0) return false;
        return verify_auth(p.auth, p.proposer, p.signing_digest());
    }

    void try_accept_proposal(const ProposalMsg& p, Time now, std::vector<Outbound>& out) {
        const Digest digest = block_digest(p.block);
        if (proposals_seen_.count(digest) > 0) return;

        // Blocks carried inside the status set may be the only source of
        // the parent's content right after a view change.
        if (p.status) {
            for (const StatusMsg& s : p.status->statuses) {
                if (block_digest(s.locked_block) != s.cert.block) continue;
                const Digest d = store_.put(s.locked_block);
                resolve_pending(d, now, out);
            }
        }
        adopt_certificate(p.prev_cert, now, out);

        if (!store_.contains(p.block.parent)) {
            const auto range = parked_.equal_range(p.block.parent);
            const bool already = std::any_of(range.first, range.second, [&](const auto& entry) {
                return block_digest(entry.second.block) == digest;
            });
            if (!already) parked_.emplace(p.block.parent, p);
            return;
        }
        const Block& parent = store_.get(p.block.parent);
        if (parent.height + 1 != p.block.height) return;  // malformed, dropped
        if (p.prev_cert.block != p.block.parent) return;
        if (!verify_certificate(p.prev_cert, cfg_)) return;

        store_.put(p.block);
        proposals_seen_.emplace(digest, p);
        resolve_pending(digest, now, out);
        record_leader_block(p, digest, now, out);

        if (p.view != view_) return;

        maybe_vote(p, digest, now, out);

        // the parent may have been waiting for an in-view successor
        try_record_lock(p.block.parent, p.view, now);

        // unpark children now that this block resolves
        auto range = parked_.equal_range(digest);
        std::vector<ProposalMsg> children;
        for (auto it = range.first; it != range.second; ++it) children.push_back(it->second);
        parked_.erase(range.first, range.second);
        for (const ProposalMsg& child : children) {
            if (child.view == view_) try_accept_proposal(child, now, out);
        }
    }

    void maybe_vote(const ProposalMsg& p, const Digest& digest, Time now,
                    std::vector<Outbound>& out) {
        if (blamed_.count(view_) > 0) return;
        if (voted_heights_[view_].count(p.block.height) > 0) return;

        bool eligible = false;
        const auto first = first_accepted_.find(view_);
        if (first == first_accepted_.end()) {
            eligible = first_of_view_acceptable(p);
        } else {
            const auto tip = accepted_tip_.find(view_);
            eligible = tip != accepted_tip_.end() && p.block.parent == tip->second;
        }
        if (!eligible) return;

        if (first == first_accepted_.end()) first_accepted_.emplace(view_, digest);
        accepted_tip_[view_] = digest;
        child_accepted_[view_].emplace(p.block.parent, now);
        voted_heights_[view_].insert(p.block.height);
        last_progress_ = now;

        VoteMsg vm{make_vote(id_, digest, view_), p};
        out.push_back(BroadcastOut{Message{vm}});
    }

    /// Condition (i): the first proposal of a view must extend the
    /// highest certified block in the attached status set (or extend
    /// genesis in the bootstrap view, which has no status).
    [[nodiscard]] bool first_of_view_acceptable(const ProposalMsg& p) const {
        if (p.view == 0) {
            return !p.status.has_value() && p.block.parent == genesis_digest() &&
                   is_genesis_certificate(p.prev_cert);
        }
        if (!p.status.has_value()) return false;
        const StatusSet& set = *p.status;
        std::set<ReplicaId> senders;
        for (const StatusMsg& s : set.statuses) {
            if (s.view != p.view) return false;
            if (s.sender >= cfg_.n || !senders.insert(s.sender).second) return false;
            if (!verify_auth(s.auth, s.sender, s.signing_digest())) return false;
            if (block_digest(s.locked_block) != s.cert.block) return false;
            if (s.cert.height != s.locked_block.height) return false;
            if (!verify_certificate(s.cert, cfg_)) return false;
        }
        if (senders.size() < quorum_) return false;
        // the proposal's parent certificate must rank at least as high as
        // everything reported in the status set
        for (const StatusMsg& s : set.statuses) {
            if (rank_certificates(p.prev_cert, s.cert) == std::strong_ordering::less)
                return false;
        }
        return true;
    }

    void record_leader_block(const ProposalMsg& p, const Digest& digest, Time now,
                             std::vector<Outbound>& out) {
        auto& seen = leader_blocks_[p.view];
        if (std::find(seen.begin(), seen.end(), digest) != seen.end()) return;
        for (const Digest& other : seen) {
            if (!equivocates(digest, other, store_)) continue;
            const Height h_new = p.block.height;
            const Height h_old = store_.get(other).height;
            t_equiv_.try_emplace({h_old, p.view}, now);
            t_equiv_.try_emplace({h_new, p.view}, now);
            if (p.view == view_ && blamed_.count(view_) == 0) {
                auto evidence = std::make_pair(proposals_seen_.at(other), p);
                blamed_.insert(view_);
                out.push_back(BroadcastOut{Message{make_blame(id_, view_, std::move(evidence))}});
            }
        }
        seen.push_back(digest);
    }

    // ---- votes ----

    void on_vote(const VoteMsg& vm, Time now, std::vector<Outbound>& out) {
        if (!vm.vote.verify() || vm.vote.voter >= cfg_.n) return;
        if (vm.vote.view > view_) {
            future_.emplace_back(vm.vote.view, Message{vm});
            return;
        }
        if (vm.proposal && vm.vote.view == view_) {
            if (valid_proposal_signature(*vm.proposal) && vm.proposal->view == view_)
                try_accept_proposal(*vm.proposal, now, out);
        }
        // counts are retained for every view so client reports can carry
        // full verifiable vote sets, but only current-view votes drive
        // new certificates
        votes_[{vm.vote.block, vm.vote.view}].emplace(vm.vote.voter, vm.vote);
        if (vm.vote.view == view_) try_assemble(vm.vote.block, vm.vote.view, now, out);
    }

    void try_assemble(const Digest& block, View view, Time now, std::vector<Outbound>& out) {
        if (certs_.count({block, view}) > 0) return;
        const auto it = votes_.find({block, view});
        if (it == votes_.end() || it->second.size() < quorum_) return;
        if (!store_.contains(block)) return;  // height unknown until the block resolves
        Certificate cert;
        cert.block = block;
        cert.height = store_.get(block).height;
        cert.view = view;
        for (const auto& [voter, vote] : it->second) cert.votes.push_back(vote);
        adopt_certificate(cert, now, out);
    }

    void adopt_certificate(const Certificate& cert, Time now, std::vector<Outbound>& out) {
        if (certs_.count({cert.block, cert.view}) > 0) return;
        if (!verify_certificate(cert, cfg_)) return;
        if (!store_.contains(cert.block)) {
            pending_certs_.emplace(cert.block, cert);
            return;
        }
        if (store_.get(cert.block).height != cert.height) return;
        certs_.emplace(std::make_pair(cert.block, cert.view), cert);
        if (rank_certificates(cert, highest_cert_) == std::strong_ordering::greater)
            highest_cert_ = cert;
        try_record_lock(cert.block, cert.view, now);
        maybe_propose_next(now, out);
    }

    void resolve_pending(const Digest& digest, Time now, std::vector<Outbound>& out) {
        auto range = pending_certs_.equal_range(digest);
        std::vector<Certificate> ready;
        for (auto it = range.first; it != range.second; ++it) ready.push_back(it->second);
        pending_certs_.erase(range.first, range.second);
        for (const Certificate& cert : ready) adopt_certificate(cert, now, out);
        for (const auto& [key, by_voter] : votes_) {
            if (key.first == digest && key.second == view_ && by_voter.size() >= quorum_)
                try_assemble(digest, key.second, now, out);
        }
    }

    /// A block is locked at (height, view) once a certificate for it
    /// from that view is known AND a successor proposal has been
    /// accepted in the same view; the stamp is taken when the second of
    /// the two becomes known. First completion per key wins.
    void try_record_lock(const Digest& block, View view, Time now) {
        if (t_lock_.count({height_of(block), view}) > 0) return;
        if (certs_.count({block, view}) == 0) return;
        const auto children = child_accepted_.find(view);
        if (children == child_accepted_.end() || children->second.count(block) == 0) return;
        t_lock_.emplace(std::make_pair(height_of(block), view), LockStamp{now, block});
    }

    [[nodiscard]] Height height_of(const Digest& d) const { return store_.get(d).height; }

    // ---- leader side ----

    void maybe_propose_next(Time now, std::vector<Outbound>& out) {
        if (leader_of(view_) != id_ || !proposed_in_view_) return;
        if (blamed_.count(view_) > 0) return;
        const auto tip = my_tip_.find(view_);
        if (tip == my_tip_.end()) return;
        const auto cert = certs_.find({tip->second, view_});
        if (cert == certs_.end()) return;
        const Block& tip_block = store_.get(tip->second);
        if (tip_block.height >= propose_limit_) return;
        propose(tip_block, cert->second, std::nullopt, now, out);
    }

    void propose(const Block& parent, const Certificate& prev_cert,
                 std::optional<StatusSet> status, Time now, std::vector<Outbound>& out) {
        Block block;
        block.height = parent.height + 1;
        block.parent = block_digest(parent);
        block.payload = make_payload(block.height, view_, id_);
        ProposalMsg p = make_proposal(id_, block, view_, prev_cert, std::move(status));
        my_tip_[view_] = block_digest(block);
        proposed_in_view_ = true;
        out.push_back(BroadcastOut{Message{p}});
    }

    // ---- blames and view change ----

    void on_blame(const BlameMsg& blame, Time now, std::vector<Outbound>& out) {
        if (blame.blamer >= cfg_.n) return;
        if (!verify_auth(blame.auth, blame.blamer, blame.signing_digest())) return;
        if (blame.evidence && !process_blame_evidence(blame, now, out)) return;
        if (blame.view > view_) {
            future_.emplace_back(blame.view, Message{blame});
            return;
        }
        if (blame.view < view_) return;
        blames_[blame.view].emplace(blame.blamer, blame);
        check_blame_quorum(now, out);
    }

    bool process_blame_evidence(const BlameMsg& blame, Time now, std::vector<Outbound>& out) {
        const auto& [a, b] = *blame.evidence;
        if (a.view != blame.view || b.view != blame.view) return false;
        if (!valid_proposal_signature(a) || !valid_proposal_signature(b)) return false;
        if (block_digest(a.block) == block_digest(b.block)) return false;
        // seeing the evidence is seeing the equivocation
        if (blame.view == view_) {
            try_accept_proposal(a, now, out);
            try_accept_proposal(b, now, out);
        }
        return true;
    }

    void on_blame_cert(const BlameCertMsg& cert, Time now, std::vector<Outbound>& out) {
        if (cert.view < view_) return;
        std::set<ReplicaId> blamers;
        for (const BlameMsg& b : cert.blames) {
            if (b.view != cert.view || b.blamer >= cfg_.n) return;
            if (!verify_auth(b.auth, b.blamer, b.signing_digest())) return;
            if (!blamers.insert(b.blamer).second) return;
        }
        if (blamers.size() < quorum_) return;  // malformed, dropped
        if (cert.view > view_) {
            future_.emplace_back(cert.view, Message{cert});
            return;
        }
        for (const BlameMsg& b : cert.blames) blames_[cert.view].emplace(b.blamer, b);
        check_blame_quorum(now, out);
    }

    void check_blame_quorum(Time now, std::vector<Outbound>& out) {
        while (true) {
            const auto it = blames_.find(view_);
            if (it == blames_.end() || it->second.size() < quorum_) return;
            t_viewchange_.try_emplace(view_, now);
            if (blame_cert_sent_.insert(view_).second) {
                BlameCertMsg cert;
                cert.view = view_;
                for (const auto& [blamer, blame] : it->second) cert.blames.push_back(blame);
                out.push_back(BroadcastOut{Message{cert}});
            }
            enter_view(view_ + 1, now, out);
        }
    }

    void enter_view(View next, Time now, std::vector<Outbound>& out) {
        view_ = next;
        view_entry_ = now;
        last_progress_ = now;
        proposed_in_view_ = false;
        const Block& locked = store_.get(highest_cert_.block);
        out.push_back(SendOut{leader_of(next),
                              Message{make_status(id_, next, locked, highest_cert_)},
                              std::nullopt});
        out.push_back(TimerOut{deadline_from(now), view_deadline_tag(next)});
        drain_future(now, out);
    }

    void drain_future(Time now, std::vector<Outbound>& out) {
        bool progressed = true;
        while (progressed) {
            progressed = false;
            for (auto it = future_.begin(); it != future_.end(); ++it) {
                if (it->first != view_) continue;
                const Message msg = std::move(it->second);
                future_.erase(it);
                dispatch(msg, now, out);
                progressed = true;
                break;  // iterator invalidated; rescan in arrival order
            }
        }
    }

    // ---- status / new leader ----

    void on_status(const StatusMsg& s, Time now, std::vector<Outbound>& out) {
        if (s.sender >= cfg_.n) return;
        if (!verify_auth(s.auth, s.sender, s.signing_digest())) return;
        if (block_digest(s.locked_block) != s.cert.block) return;
        if (s.cert.height != s.locked_block.height) return;
        if (!verify_certificate(s.cert, cfg_)) return;
        const Digest locked = store_.put(s.locked_block);
        resolve_pending(locked, now, out);
        adopt_certificate(s.cert, now, out);
        if (s.view > view_) {
            future_.emplace_back(s.view, Message{s});
            return;
        }
        if (s.view < view_ || leader_of(s.view) != id_ || proposed_in_view_) return;
        auto& pending = statuses_[s.view];
        pending.emplace(s.sender, s);
        if (pending.size() < quorum_) return;

        StatusSet set;
        for (const auto& [sender, status] : pending) {
            set.statuses.push_back(status);
            if (set.statuses.size() == quorum_) break;
        }
        // the first proposal of the view extends the highest-ranked
        // certificate in the status set; ties broken by lowest digest
        const StatusMsg* best = &set.statuses.front();
        for (const StatusMsg& cand : set.statuses) {
            const auto order = rank_certificates(cand.cert, best->cert);
            if (order == std::strong_ordering::greater ||
                (order == std::strong_ordering::equal && cand.cert.block < best->cert.block))
                best = &cand;
        }
        if (blamed_.count(view_) > 0) return;
        if (best->locked_block.height >= propose_limit_) return;
        propose(best->locked_block, best->cert, set, now, out);
    }

    // ---- timers ----

    void on_timer(std::uint64_t tag, Time now, std::vector<Outbound>& out) {
        if (tag == kTimerStart) {
            out.push_back(TimerOut{deadline_from(now), view_deadline_tag(0)});
            if (leader_of(0) == id_ && propose_limit_ >= 1)
                propose(genesis_block(), genesis_certificate(), std::nullopt, now, out);
            return;
        }
        if ((tag & ~kTimerTagMask) == kTimerViewDeadline) {
            const View v = tag & kTimerTagMask;
            if (v != view_ || blamed_.count(v) > 0) return;
            if (now > last_progress_ + timeout_for(v)) {
                blamed_.insert(v);
                out.push_back(BroadcastOut{Message{make_blame(id_, v, std::nullopt)}});
                return;
            }
            out.push_back(TimerOut{deadline_from(last_progress_), view_deadline_tag(v)});
        }
    }

    [[nodiscard]] Time timeout_for(View v) const {
        __int128 t = cfg_.base_timeout;
        for (View i = 0; i < v && i < 48; ++i) {
            t *= cfg_.timeout_growth;
            if (t > kTimeInfinity / 4) return kTimeInfinity / 4;
        }
        return static_cast<Time>(t);
    }

    [[nodiscard]] Time deadline_from(Time marker) const {
        return marker + timeout_for(view_) + 1;
    }

    // ---- state ----

    ReplicaId id_;
    ProtocolConfig cfg_;
    std::size_t quorum_;
    Height propose_limit_;

    View view_ = 0;
    Time view_entry_ = 0;
    Time last_progress_ = 0;
    bool proposed_in_view_ = false;

    BlockStore store_;
    std::map<std::pair<Digest, View>, std::map<ReplicaId, Vote>> votes_;
    std::map<std::pair<Digest, View>, Certificate> certs_;
    std::multimap<Digest, Certificate> pending_certs_;
    Certificate highest_cert_;

    std::map<HeightView, LockStamp> t_lock_;
    std::map<HeightView, Time> t_equiv_;
    std::map<View, Time> t_viewchange_;

    std::map<View, std::vector<Digest>> leader_blocks_;
    std::map<Digest, ProposalMsg> proposals_seen_;
    std::multimap<Digest, ProposalMsg> parked_;
    std::map<View, std::set<Height>> voted_heights_;
    std::map<View, Digest> first_accepted_;
    std::map<View, Digest> accepted_tip_;
    std::map<View, std::map<Digest, Time>> child_accepted_;
    std::map<View, Digest> my_tip_;

    std::set<View> blamed_;
    std::map<View, std::map<ReplicaId, BlameMsg>> blames_;
    std::set<View> blame_cert_sent_;
    std::map<View, std::map<ReplicaId, StatusMsg>> statuses_;

    std::deque<std::pair<View, Message>> future_;
};

}  // namespace flexbft
