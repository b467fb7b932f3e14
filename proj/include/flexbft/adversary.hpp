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

#include "world.hpp"

namespace flexbft {

/// Scripted fault behaviors. Every strategy is a deterministic reactive
/// script, not a search: the same scenario and seed produce the same
/// run. Faulty replicas may sign anything as themselves, reorder and
/// delay traffic within the delay model, and misreport their own
/// timestamp maps, but can never mint another replica's authenticator.
///
/// Each attack checks its precondition up front; a configuration that
/// cannot break the declared victim refuses to arm and the run
/// degenerates to an honest (live) execution. This is the
/// alive-but-corrupt contract: attack only where safety is actually
/// breakable, help liveness everywhere else.

/// Byzantine replicas drop every outbound message and answer probes
/// with empty reports; a-b-c replicas in the same scenario stay on the
/// honest shim. Exercises timeout, blame, and view change paths.
class SilentStrategy : public Strategy {
public:
    explicit SilentStrategy(ScenarioConfig cfg) : cfg_(std::move(cfg)) {}

    [[nodiscard]] std::string name() const override { return "silent"; }

    void filter_outbound(ReplicaId id, std::vector<Outbound>& out, Time, World&) override {
        if (cfg_.byzantine.count(id) == 0) return;  // a-b-c: honest shim
        std::erase_if(out, [](const Outbound& o) {
            return !std::holds_alternative<TimerOut>(o);
        });
    }

    ReplicaReport report(ReplicaId id, ReplicaReport honest, Time now, World&) override {
        if (cfg_.byzantine.count(id) == 0) return honest;
        ReplicaReport mute;
        mute.replica = id;
        mute.time = now;
        return mute;
    }

private:
    ScenarioConfig cfg_;
};

/// A Byzantine leader sends its proposal to one partition and a
/// conflicting same-height proposal to the complement. With the faulty
/// fraction below 2*q_r - 1 at most one branch can certify; honest
/// replicas detect the fork through forwarded votes, blame with
/// evidence, and change views.
class EquivocateStrategy : public Strategy {
public:
    explicit EquivocateStrategy(ScenarioConfig cfg) : cfg_(std::move(cfg)) {
        const auto it = cfg_.strategy_params.find("partition");
        if (it == cfg_.strategy_params.end()) return;
        for (const std::string& word : detail::split_ws(it->second))
            partition_.insert(static_cast<ReplicaId>(detail::parse_int(word, "strategy.partition")));
        armed_ = true;
    }

    [[nodiscard]] std::string name() const override { return "equivocate"; }
    [[nodiscard]] bool armed() const override { return armed_; }

    void filter_outbound(ReplicaId id, std::vector<Outbound>& out, Time, World&) override {
        if (cfg_.byzantine.count(id) == 0) return;
        std::vector<Outbound> rewritten;
        for (Outbound& o : out) {
            auto* b = std::get_if<BroadcastOut>(&o);
            if (b == nullptr || !std::holds_alternative<ProposalMsg>(b->message)) {
                rewritten.push_back(std::move(o));
                continue;
            }
            const auto& p = std::get<ProposalMsg>(b->message);
            Block alt_block = p.block;
            alt_block.payload.push_back('\'');
            const ProposalMsg alt = make_proposal(id, alt_block, p.view, p.prev_cert, p.status);
            for (ReplicaId to = 0; to < cfg_.protocol.n; ++to) {
                const bool branch_a = partition_.count(to) > 0;
                rewritten.push_back(SendOut{to, branch_a ? Message{p} : Message{alt}, std::nullopt});
            }
        }
        out = std::move(rewritten);
    }

private:
    ScenarioConfig cfg_;
    std::set<ReplicaId> partition_;
    bool armed_ = false;
};

/// The CR1 separation attack. A Byzantine leader grows branch X shown
/// only to a minority slice of honest replicas; the faulty replicas
/// double-vote so branch X reaches the victim's quorum q_c but not a
/// stronger client's. The starved slice times out, the faulty replicas
/// join the blame quorum, and the (Byzantine) next leader builds its
/// status set purely from stale locks, so every honest replica votes a
/// fresh branch Y. The victim commits both branches; clients above the
/// q_c + q_r - 1 fault line only ever commit Y.
class DoubleCommitStrategy : public Strategy {
public:
    explicit DoubleCommitStrategy(ScenarioConfig cfg) : cfg_(std::move(cfg)) {
        const auto qc = cfg_.strategy_params.find("victim_qc");
        if (qc == cfg_.strategy_params.end()) return;
        try {
            victim_qc_ = Rational::parse(qc->second);
        } catch (const std::exception&) {
            return;
        }
        const std::size_t n = cfg_.protocol.n;
        for (ReplicaId id = 0; id < n; ++id)
            if (cfg_.is_faulty(id)) faulty_.insert(id);
        const std::size_t m_v = quorum_count(n, victim_qc_);
        const std::size_t m_r = quorum_count(n, cfg_.protocol.q_r);

        // the a-b-c contract: arm only if the victim's rule is actually
        // breakable by this fault budget
        if (faulty_.size() + n < m_v + m_r) return;
        const bool victim_present = std::any_of(
            cfg_.clients.begin(), cfg_.clients.end(), [&](const ClientAssumption& a) {
                return a.mode == ClientAssumption::Mode::PartialSync && a.q_c == victim_qc_;
            });
        if (!victim_present) return;
        // the script drives views 0 and 1 through Byzantine leaders
        if (cfg_.byzantine.count(0) == 0 || cfg_.byzantine.count(1 % n) == 0) return;
        if (cfg_.delay.kind != DelayKind::PartialSynchrony) return;
        if (cfg_.delay.min_delay != 1) return;
        if (cfg_.delay.gst < 2 * cfg_.protocol.base_timeout + 150) return;

        const std::size_t h_x_size = m_v - faulty_.size();
        std::vector<ReplicaId> honest;
        for (ReplicaId id = 0; id < n; ++id)
            if (!cfg_.is_faulty(id)) honest.push_back(id);
        const std::size_t h_y_need = m_r > faulty_.size() ? m_r - faulty_.size() : 0;
        if (honest.size() < h_x_size + h_y_need) return;
        for (std::size_t i = 0; i < honest.size(); ++i)
            (i < h_x_size ? h_x_ : h_y_).insert(honest[i]);

        t_blame_ = cfg_.protocol.base_timeout + 1;
        t_late_ = cfg_.delay.gst - 10;
        armed_ = true;
    }

    [[nodiscard]] std::string name() const override { return "abc_double_commit"; }
    [[nodiscard]] bool armed() const override { return armed_; }

    void on_start(World& w) override {
        for (const ReplicaId f : faulty_) w.schedule_strategy_timer(f, t_blame_, kTagBlame);
    }

    bool on_event(ReplicaId id, const Event& ev, Time, World& w) override {
        const auto* timer = std::get_if<TimerEvent>(&ev.body);
        if (timer == nullptr || timer->tag != (kTimerStrategy | kTagBlame)) return false;
        w.broadcast_as(id, Message{make_blame(id, 0, std::nullopt)}, std::nullopt);
        return true;
    }

    void filter_outbound(ReplicaId id, std::vector<Outbound>& out, Time, World&) override {
        for (Outbound& o : out) {
            // track branch-X blocks as the view-0 leader emits them
            if (id == 0) {
                if (const auto* b = std::get_if<BroadcastOut>(&o)) {
                    if (const auto* p = std::get_if<ProposalMsg>(&b->message); p && p->view == 0)
                        x_blocks_.insert(block_digest(p->block));
                }
            }
            // every faulty replica reports a stale (genesis) lock to the
            // view-1 leader, hiding branch X from the status set
            if (faulty_.count(id) > 0) {
                if (auto* s = std::get_if<SendOut>(&o)) {
                    if (const auto* st = std::get_if<StatusMsg>(&s->message);
                        st && st->view == 1) {
                        s->message =
                            Message{make_status(id, 1, genesis_block(), genesis_certificate())};
                    }
                }
            }
        }
    }

    std::optional<Time> route(ReplicaId sender, ReplicaId recipient, const Message& msg,
                              Time now, World&) override {
        if (now >= cfg_.delay.gst) return std::nullopt;
        if (references(msg, x_blocks_) && h_y_.count(recipient) > 0)
            return std::max(t_late_, now + 1);
        if (const auto* st = std::get_if<StatusMsg>(&msg);
            st && st->view == 1 && h_x_.count(sender) > 0)
            return now + kStatusSlow;
        return now + 1;
    }

    static bool references(const Message& msg, const std::set<Digest>& blocks) {
        if (const auto* p = std::get_if<ProposalMsg>(&msg))
            return blocks.count(block_digest(p->block)) > 0;
        if (const auto* v = std::get_if<VoteMsg>(&msg)) return blocks.count(v->vote.block) > 0;
        return false;
    }

private:
    static constexpr std::uint64_t kTagBlame = 1;
    static constexpr Time kStatusSlow = 60;

    ScenarioConfig cfg_;
    Rational victim_qc_;
    std::set<ReplicaId> faulty_;
    std::set<ReplicaId> h_x_;  // honest slice fed branch X
    std::set<ReplicaId> h_y_;  // honest slice starved in view 0
    std::set<Digest> x_blocks_;
    Time t_blame_ = 0;
    Time t_late_ = 0;
    bool armed_ = false;
};

/// The CR2 delay attack. The Byzantine slice is large enough to certify
/// two equivocating view-0 branches across two honest partitions while
/// the cross-branch traffic rides the network's full (legal) delay. A
/// client whose delta undershoots the real bound sees an undisturbed
/// window on each branch and commits both; a client with a correct
/// delta never sees a window reach 2*delta. Faulty replicas attest
/// branch A in early probes and flip their fabricated lock state to
/// branch B afterwards.
class Cr2DelayStrategy : public Strategy {
public:
    explicit Cr2DelayStrategy(ScenarioConfig cfg) : cfg_(std::move(cfg)) {
        const auto vd = cfg_.strategy_params.find("victim_delta");
        if (vd == cfg_.strategy_params.end()) return;
        try {
            victim_delta_ = detail::parse_int(vd->second, "strategy.victim_delta");
        } catch (const std::exception&) {
            return;
        }
        const std::size_t n = cfg_.protocol.n;
        const std::size_t m_r = quorum_count(n, cfg_.protocol.q_r);
        if (cfg_.delay.kind != DelayKind::Synchronous) return;
        // refused when the model caps delays at or below the victim's bound
        if (victim_delta_ >= cfg_.delay.actual_delta) return;
        if (cfg_.delay.min_delay != 1) return;
        const bool victim_present = std::any_of(
            cfg_.clients.begin(), cfg_.clients.end(), [&](const ClientAssumption& a) {
                return a.mode == ClientAssumption::Mode::Sync && a.delta == victim_delta_;
            });
        if (!victim_present) return;
        if (!cfg_.abc.empty()) return;  // script owns the whole faulty set
        if (cfg_.byzantine.count(0) == 0) return;
        // double certification needs byz >= 2*m_r - n
        if (cfg_.byzantine.size() + n < 2 * m_r) return;
        const std::size_t part = m_r - cfg_.byzantine.size();
        std::vector<ReplicaId> honest;
        for (ReplicaId id = 0; id < n; ++id)
            if (!cfg_.is_faulty(id)) honest.push_back(id);
        if (honest.size() < 2 * part) return;
        for (std::size_t i = 0; i < honest.size(); ++i)
            (i < part ? h_a_ : h_b_).insert(honest[i]);
        // a probe must land inside the victim's window but before the
        // fork becomes visible at the real network bound
        const Time base_need = 2 * victim_delta_ + 4;
        const Time first_usable =
            ((base_need + cfg_.probe_cadence - 1) / cfg_.probe_cadence) * cfg_.probe_cadence;
        if (first_usable > cfg_.delay.actual_delta) return;
        t_flip_ = cfg_.delay.actual_delta;
        armed_ = true;
    }

    [[nodiscard]] std::string name() const override { return "cr2_delay"; }
    [[nodiscard]] bool armed() const override { return armed_; }

    void on_start(World& w) override {
        const Time d = cfg_.delay.actual_delta;
        // branch B root, signed by the view-0 leader
        Block b1;
        b1.height = 1;
        b1.payload = to_bytes("h1/v0/L0'b");
        b1.parent = genesis_digest();
        b1_ = b1;
        b1_digest_ = block_digest(b1);
        b_blocks_.insert(b1_digest_);
        const ProposalMsg p1 = make_proposal(0, b1, 0, genesis_certificate(), std::nullopt);
        for (const ReplicaId r : h_b_) w.send_as(0, r, Message{p1}, 1);
        for (const ReplicaId r : h_a_) w.send_as(0, r, Message{p1}, d);
        // the faulty replicas double-vote: their branch-B votes are
        // minted here, their branch-A votes come from the honest shim
        for (const ReplicaId f : cfg_.byzantine) {
            const Vote vote = make_vote(f, b1_digest_, 0);
            b_votes_[f] = vote;
            const VoteMsg vm{vote, p1};
            for (const ReplicaId r : h_b_) w.send_as(f, r, Message{vm}, 2);
            for (const ReplicaId r : h_a_) w.send_as(f, r, Message{vm}, d);
        }
        w.schedule_strategy_timer(0, 3, kTagProposeB2);
        for (const ReplicaId f : cfg_.byzantine)
            w.schedule_strategy_timer(f, d + 1, kTagBlame);
    }

    bool on_event(ReplicaId id, const Event& ev, Time now, World& w) override {
        if (const auto* timer = std::get_if<TimerEvent>(&ev.body)) {
            if (timer->tag == (kTimerStrategy | kTagProposeB2)) {
                propose_b2(now, w);
                return true;
            }
            if (timer->tag == (kTimerStrategy | kTagBlame)) {
                w.broadcast_as(id, Message{make_blame(id, 0, std::nullopt)}, std::nullopt);
                return true;
            }
            return false;
        }
        // keep branch B away from the faulty replicas' honest state so
        // their own records stay clean branch-A evidence
        if (const auto* deliver = std::get_if<DeliverEvent>(&ev.body)) {
            if (DoubleCommitStrategy::references(deliver->message, b_blocks_)) {
                if (const auto* vm = std::get_if<VoteMsg>(&deliver->message);
                    vm && vm->vote.block == b1_digest_ && vm->vote.verify())
                    b_votes_.emplace(vm->vote.voter, vm->vote);
                return true;
            }
        }
        return false;
    }

    void propose_b2(Time now, World& w) {
        const Time d = cfg_.delay.actual_delta;
        cert_b1_.block = b1_digest_;
        cert_b1_.height = 1;
        cert_b1_.view = 0;
        for (const auto& [voter, vote] : b_votes_) cert_b1_.votes.push_back(vote);
        Block b2;
        b2.height = 2;
        b2.payload = to_bytes("h2/v0/L0'b");
        b2.parent = b1_digest_;
        b2_ = b2;
        b_blocks_.insert(block_digest(b2));
        const ProposalMsg p2 = make_proposal(0, b2, 0, cert_b1_, std::nullopt);
        for (const ReplicaId r : h_b_) w.send_as(0, r, Message{p2}, now + 1);
        for (const ReplicaId r : h_a_) w.send_as(0, r, Message{p2}, now + d - 3);
    }

    void filter_outbound(ReplicaId id, std::vector<Outbound>& out, Time, World& w) override {
        if (cfg_.byzantine.count(id) == 0) return;
        std::erase_if(out, [&](const Outbound& o) {
            const auto* b = std::get_if<BroadcastOut>(&o);
            if (b == nullptr) return false;
            const auto* p = std::get_if<ProposalMsg>(&b->message);
            if (p == nullptr) return false;
            // cap branch A so the post-recovery chain still has room to
            // grow toward the target under the honest view-4 leader
            if (id == 0 && p->view == 0 && p->block.height > kBranchACap) return true;
            // Byzantine leaders of the recovery views stay silent
            return p->view >= 1 && p->view <= 3;
        });
        if (id == 0)
            for (const Outbound& o : out)
                if (const auto* b = std::get_if<BroadcastOut>(&o))
                    if (const auto* p = std::get_if<ProposalMsg>(&b->message); p && p->view == 0)
                        a_blocks_.insert(block_digest(p->block));
    }

    ReplicaReport report(ReplicaId id, ReplicaReport honest, Time now, World&) override {
        if (cfg_.byzantine.count(id) == 0 || now < t_flip_) return honest;
        // fabricated lock state: swing the height-1 lock to branch B and
        // surface its genuine certificate; everything else stays honest
        honest.t_lock[{1, 0}] = LockStamp{4, b1_digest_};
        honest.blocks.emplace(b1_digest_, b1_);
        honest.blocks.emplace(block_digest(b2_), b2_);
        if (std::find(honest.certificates.begin(), honest.certificates.end(), cert_b1_) ==
            honest.certificates.end())
            honest.certificates.push_back(cert_b1_);
        return honest;
    }

    std::optional<Time> route(ReplicaId, ReplicaId recipient, const Message& msg, Time now,
                              World&) override {
        const Time d = cfg_.delay.actual_delta;
        if (DoubleCommitStrategy::references(msg, b_blocks_))
            return h_a_.count(recipient) > 0 ? now + d : now + 1;
        if (DoubleCommitStrategy::references(msg, a_blocks_))
            return h_b_.count(recipient) > 0 ? now + d : now + 1;
        return std::nullopt;
    }

private:
    static constexpr std::uint64_t kTagProposeB2 = 1;
    static constexpr std::uint64_t kTagBlame = 2;
    static constexpr Height kBranchACap = 6;

    ScenarioConfig cfg_;
    Time victim_delta_ = 0;
    Time t_flip_ = 0;
    std::set<ReplicaId> h_a_;
    std::set<ReplicaId> h_b_;
    std::set<Digest> a_blocks_;
    std::set<Digest> b_blocks_;
    std::map<ReplicaId, Vote> b_votes_;
    Block b1_;
    Block b2_;
    Digest b1_digest_;
    Certificate cert_b1_;
    bool armed_ = false;
};

struct StrategyPlan {
    std::shared_ptr<Strategy> strategy;  // null: every replica honest
    bool attack_refused = false;
};

/// Builds the strategy a scenario names. An attack whose precondition
/// fails is refused: the plan carries a null strategy and the run
/// proceeds fully honest (the a-b-c contract).
inline StrategyPlan make_strategy(const ScenarioConfig& cfg) {
    if (cfg.strategy == "none") return {nullptr, false};
    if (cfg.strategy == "silent") return {std::make_shared<SilentStrategy>(cfg), false};
    std::shared_ptr<Strategy> s;
    if (cfg.strategy == "equivocate") s = std::make_shared<EquivocateStrategy>(cfg);
    else if (cfg.strategy == "abc_double_commit") s = std::make_shared<DoubleCommitStrategy>(cfg);
    else if (cfg.strategy == "cr2_delay") s = std::make_shared<Cr2DelayStrategy>(cfg);
    else throw ScenarioError(ScenarioErrorCode::UnknownStrategy, "strategy", cfg.strategy);
    if (!s->armed()) return {nullptr, true};
    return {s, false};
}

}  // namespace flexbft
