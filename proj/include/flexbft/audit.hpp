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

#include "client.hpp"
#include "scenario.hpp"
#include "transcript.hpp"

namespace flexbft {

/// Transcript audit: independent re-derivation of protocol facts from
/// the recorded byte stream, with no access to live replica state. The
/// scans here back the replica-level invariants (vote uniqueness, no
/// post-blame participation, certificate uniqueness), the direct-commit
/// ranking property, the authenticator boundary, and the delay-model
/// bounds.

struct ParsedDelivery {
    Time time = 0;
    std::uint64_t seq = 0;
    ReplicaId sender = 0;
    ReplicaId target = 0;
    Time sent_at = 0;
    Message message;
};

struct ParsedSend {
    Time sent = 0;
    std::uint64_t seq = 0;
    ReplicaId sender = 0;
    ReplicaId to = 0;
    Time deliver_at = 0;
    Message message;
};

struct ParsedCommit {
    Time time = 0;
    std::uint32_t client = 0;
    CommitDecision decision;
};

struct ParsedTranscript {
    ScenarioConfig scenario;
    std::vector<ParsedDelivery> deliveries;  // processed events
    std::vector<ParsedSend> sends;           // scheduled emissions
    std::vector<ParsedCommit> commits;
    BlockStore blocks;  // every block observed in any recorded message
    // distinct votes observed anywhere, with the earliest emission seq
    std::map<std::pair<Digest, View>, std::map<ReplicaId, std::uint64_t>> votes;
};

namespace audit_detail {

inline void collect_blocks(const Message& msg, BlockStore& blocks);

inline void collect_blocks(const ProposalMsg& p, BlockStore& blocks) {
    blocks.put(p.block);
    if (p.status)
        for (const StatusMsg& s : p.status->statuses) blocks.put(s.locked_block);
}

inline void collect_blocks(const Message& msg, BlockStore& blocks) {
    if (const auto* p = std::get_if<ProposalMsg>(&msg)) {
        collect_blocks(*p, blocks);
    } else if (const auto* v = std::get_if<VoteMsg>(&msg)) {
        if (v->proposal) collect_blocks(*v->proposal, blocks);
    } else if (const auto* b = std::get_if<BlameMsg>(&msg)) {
        if (b->evidence) {
            collect_blocks(b->evidence->first, blocks);
            collect_blocks(b->evidence->second, blocks);
        }
    } else if (const auto* bc = std::get_if<BlameCertMsg>(&msg)) {
        for (const BlameMsg& blame : bc->blames)
            if (blame.evidence) {
                collect_blocks(blame.evidence->first, blocks);
                collect_blocks(blame.evidence->second, blocks);
            }
    } else if (const auto* s = std::get_if<StatusMsg>(&msg)) {
        blocks.put(s->locked_block);
    }
}

inline void collect_certs(const Message& msg, std::vector<Certificate>& out) {
    if (const auto* p = std::get_if<ProposalMsg>(&msg)) {
        out.push_back(p->prev_cert);
        if (p->status)
            for (const StatusMsg& s : p->status->statuses) out.push_back(s.cert);
    } else if (const auto* v = std::get_if<VoteMsg>(&msg)) {
        if (v->proposal) collect_certs(Message{*v->proposal}, out);
    } else if (const auto* s = std::get_if<StatusMsg>(&msg)) {
        out.push_back(s->cert);
    }
}

inline void collect_votes(const Message& msg,
                          std::vector<std::pair<Vote, const ProposalMsg*>>& out) {
    if (const auto* v = std::get_if<VoteMsg>(&msg)) {
        out.emplace_back(v->vote, v->proposal ? &*v->proposal : nullptr);
    } else if (const auto* p = std::get_if<ProposalMsg>(&msg)) {
        for (const Vote& vote : p->prev_cert.votes) out.emplace_back(vote, nullptr);
        if (p->status)
            for (const StatusMsg& s : p->status->statuses)
                for (const Vote& vote : s.cert.votes) out.emplace_back(vote, nullptr);
    } else if (const auto* s = std::get_if<StatusMsg>(&msg)) {
        for (const Vote& vote : s->cert.votes) out.emplace_back(vote, nullptr);
    }
}

}  // namespace audit_detail

inline ParsedTranscript parse_transcript(const Transcript& t) {
    ParsedTranscript pt;
    pt.scenario = parse_scenario(t.scenario_text);
    for (const TranscriptRecord& rec : t.records) {
        ByteReader r(rec.payload);
        if (rec.kind == RecordKind::Event) {
            if (r.u8() != 0) continue;  // timers and probes carry no messages
            ParsedDelivery d;
            d.time = rec.time;
            d.seq = rec.seq;
            d.sender = r.u32();
            d.target = r.u32();
            d.sent_at = r.i64();
            const Bytes raw = r.blob();
            ByteReader br(raw);
            d.message = decode_message(br);
            pt.deliveries.push_back(std::move(d));
        } else if (rec.kind == RecordKind::Emit) {
            if (r.u8() != 0) continue;
            ParsedSend s;
            s.sent = rec.time;
            s.seq = rec.seq;
            s.sender = r.u32();
            s.to = r.u32();
            s.deliver_at = r.i64();
            const Bytes raw = r.blob();
            ByteReader br(raw);
            s.message = decode_message(br);
            pt.sends.push_back(std::move(s));
        } else if (rec.kind == RecordKind::Commit) {
            ParsedCommit c;
            c.time = rec.time;
            c.client = rec.actor;
            c.decision = CommitDecision::decode(r);
            pt.commits.push_back(std::move(c));
        }
    }
    for (const ParsedSend& s : pt.sends) audit_detail::collect_blocks(s.message, pt.blocks);
    for (const ParsedSend& s : pt.sends) {
        std::vector<std::pair<Vote, const ProposalMsg*>> vs;
        audit_detail::collect_votes(s.message, vs);
        for (const auto& [vote, proposal] : vs) {
            if (!vote.verify()) continue;
            auto& slot = pt.votes[{vote.block, vote.view}];
            slot.emplace(vote.voter, s.seq);
        }
    }
    return pt;
}

/// Certificates derivable from the recorded vote tallies: any (block,
/// view) with a replica quorum of distinct verified votes.
struct DerivedCert {
    Digest block;
    Height height = 0;
    View view = 0;
    std::size_t vote_count = 0;
};

inline std::vector<DerivedCert> derived_certificates(const ParsedTranscript& pt) {
    const std::size_t need = quorum_count(pt.scenario.protocol.n, pt.scenario.protocol.q_r);
    std::vector<DerivedCert> out;
    for (const auto& [key, voters] : pt.votes) {
        if (voters.size() < need) continue;
        const Block* b = pt.blocks.find(key.first);
        if (b == nullptr) continue;
        out.push_back(DerivedCert{key.first, b->height, key.second, voters.size()});
    }
    return out;
}

/// Per-view vote uniqueness: an honest replica emits at most one vote
/// per (height, view).
inline std::vector<std::string> audit_vote_uniqueness(const ParsedTranscript& pt) {
    std::vector<std::string> problems;
    std::map<std::tuple<ReplicaId, View, Height>, std::set<Digest>> seen;
    for (const ParsedSend& s : pt.sends) {
        const auto* vm = std::get_if<VoteMsg>(&s.message);
        if (vm == nullptr || s.sender != vm->vote.voter) continue;
        if (pt.scenario.is_faulty(s.sender)) continue;
        const Block* b = pt.blocks.find(vm->vote.block);
        if (b == nullptr) continue;
        auto& digests = seen[{vm->vote.voter, vm->vote.view, b->height}];
        digests.insert(vm->vote.block);
        if (digests.size() > 1)
            problems.push_back("replica " + std::to_string(vm->vote.voter) +
                               " voted twice at height " + std::to_string(b->height) +
                               " in view " + std::to_string(vm->vote.view));
    }
    return problems;
}

/// No honest vote or proposal may appear in a view after that replica
/// blamed the view.
inline std::vector<std::string> audit_no_post_blame(const ParsedTranscript& pt) {
    std::vector<std::string> problems;
    std::map<std::pair<ReplicaId, View>, std::uint64_t> first_blame;
    for (const ParsedSend& s : pt.sends) {
        const auto* b = std::get_if<BlameMsg>(&s.message);
        if (b == nullptr || s.sender != b->blamer || pt.scenario.is_faulty(s.sender)) continue;
        auto [it, inserted] = first_blame.emplace(std::make_pair(b->blamer, b->view), s.seq);
        if (!inserted) it->second = std::min(it->second, s.seq);
    }
    for (const ParsedSend& s : pt.sends) {
        if (pt.scenario.is_faulty(s.sender)) continue;
        View view = 0;
        bool participation = false;
        if (const auto* vm = std::get_if<VoteMsg>(&s.message);
            vm != nullptr && vm->vote.voter == s.sender) {
            view = vm->vote.view;
            participation = true;
        } else if (const auto* p = std::get_if<ProposalMsg>(&s.message);
                   p != nullptr && p->proposer == s.sender) {
            view = p->view;
            participation = true;
        }
        if (!participation) continue;
        const auto it = first_blame.find({s.sender, view});
        if (it != first_blame.end() && s.seq > it->second)
            problems.push_back("replica " + std::to_string(s.sender) +
                               " participated in view " + std::to_string(view) +
                               " after blaming it");
    }
    return problems;
}

/// Under the flexible-quorum intersection bound (faulty < 2*q_r - 1) no
/// two equivocating blocks can both gather certificates in one view.
inline std::vector<std::string> audit_certificate_uniqueness(const ParsedTranscript& pt) {
    std::vector<std::string> problems;
    const Rational bound =
        pt.scenario.protocol.q_r + pt.scenario.protocol.q_r - Rational(1);
    if (!(pt.scenario.faulty_fraction() < bound)) return problems;  // bound not in force
    const std::vector<DerivedCert> certs = derived_certificates(pt);
    for (std::size_t i = 0; i < certs.size(); ++i) {
        for (std::size_t j = i + 1; j < certs.size(); ++j) {
            if (certs[i].view != certs[j].view || certs[i].block == certs[j].block) continue;
            if (equivocates(certs[i].block, certs[j].block, pt.blocks))
                problems.push_back("equivocating certificates in view " +
                                   std::to_string(certs[i].view));
        }
    }
    return problems;
}

/// Direct-commit ranking: when a client with a correct rule
/// commits B_l directly in view v, every derived certificate ranking no
/// lower than (v, l) is for a block equal to or extending B_l.
inline std::vector<std::string> audit_direct_commit_ranking(const ParsedTranscript& pt) {
    std::vector<std::string> problems;
    const std::vector<DerivedCert> certs = derived_certificates(pt);
    for (const ParsedCommit& c : pt.commits) {
        if (!c.decision.direct) continue;
        if (c.client >= pt.scenario.clients.size()) continue;
        if (!pt.scenario.assumption_correct(pt.scenario.clients[c.client])) continue;
        if (!pt.blocks.contains(c.decision.block)) continue;
        for (const DerivedCert& cert : certs) {
            const bool no_lower = cert.view > c.decision.view ||
                                  (cert.view == c.decision.view &&
                                   cert.height >= c.decision.height);
            if (!no_lower) continue;
            if (!extends(cert.block, c.decision.block, pt.blocks))
                problems.push_back("certificate at (view " + std::to_string(cert.view) +
                                   ", height " + std::to_string(cert.height) +
                                   ") does not extend direct commit at height " +
                                   std::to_string(c.decision.height));
        }
    }
    return problems;
}

/// Authenticator boundary: any vote attributed to an honest replica
/// anywhere in the transcript must have been emitted by that replica.
inline std::vector<std::string> audit_authenticator_boundary(const ParsedTranscript& pt) {
    std::vector<std::string> problems;
    std::set<std::tuple<ReplicaId, Digest, View>> emitted;
    for (const ParsedSend& s : pt.sends) {
        const auto* vm = std::get_if<VoteMsg>(&s.message);
        if (vm != nullptr && vm->vote.voter == s.sender)
            emitted.insert({vm->vote.voter, vm->vote.block, vm->vote.view});
    }
    for (const ParsedSend& s : pt.sends) {
        std::vector<std::pair<Vote, const ProposalMsg*>> vs;
        audit_detail::collect_votes(s.message, vs);
        for (const auto& [vote, proposal] : vs) {
            if (pt.scenario.is_faulty(vote.voter)) continue;
            if (!vote.verify()) {
                problems.push_back("unverifiable vote attributed to honest replica " +
                                   std::to_string(vote.voter));
                continue;
            }
            if (emitted.count({vote.voter, vote.block, vote.view}) == 0)
                problems.push_back("vote by honest replica " + std::to_string(vote.voter) +
                                   " appears without a matching emission");
        }
    }
    return problems;
}

/// Causality and delay-bound compliance for every recorded delivery.
inline std::vector<std::string> audit_delivery_bounds(const ParsedTranscript& pt) {
    std::vector<std::string> problems;
    const DelayModel& m = pt.scenario.delay;
    for (const ParsedDelivery& d : pt.deliveries) {
        const Time delay = d.time - d.sent_at;
        if (delay < m.min_delay) {
            problems.push_back("delivery below min_delay at t=" + std::to_string(d.time));
            continue;
        }
        const bool bounded =
            m.kind == DelayKind::Synchronous ||
            (m.kind == DelayKind::PartialSynchrony && d.sent_at >= m.gst);
        if (bounded && d.sender != d.target && delay > m.actual_delta)
            problems.push_back("delivery beyond the delay bound at t=" + std::to_string(d.time));
    }
    return problems;
}

/// All transcript-level audits in one pass.
inline std::vector<std::string> audit_all(const ParsedTranscript& pt) {
    std::vector<std::string> problems;
    for (auto&& chunk :
         {audit_vote_uniqueness(pt), audit_no_post_blame(pt), audit_certificate_uniqueness(pt),
          audit_direct_commit_ranking(pt), audit_authenticator_boundary(pt),
          audit_delivery_bounds(pt)})
        problems.insert(problems.end(), chunk.begin(), chunk.end());
    return problems;
}

}  // namespace flexbft
