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

#include "adversary.hpp"
#include "audit.hpp"

namespace flexbft {

struct ClientReport {
    std::string assumption;
    Height committed_height = 0;
    bool conflict = false;
    Time first_commit_latency = -1;  // proposal of a block to its first direct commit
    std::string chain_export;

    bool operator==(const ClientReport&) const = default;
};

/// Everything a run produces beyond the transcript itself. Every number
/// here is recomputable from the transcript alone; compute_metrics is
/// that independent recomputation.
struct RunReport {
    std::string scenario;
    std::uint64_t seed = 0;
    StopReason stop = StopReason::TimeBound;
    bool attack_refused = false;
    bool liveness_asserted = false;
    bool liveness_ok = true;
    std::uint64_t view_changes = 0;
    std::uint64_t messages_total = 0;
    std::uint64_t messages_per_height_max = 0;
    std::string determinism_digest;
    std::vector<ClientReport> clients;

    [[nodiscard]] std::string text() const {
        std::ostringstream out;
        out << "scenario = " << scenario << '\n';
        out << "seed = " << seed << '\n';
        out << "stop = "
            << (stop == StopReason::TargetReached  ? "target"
                : stop == StopReason::QueueExhausted ? "queue"
                                                     : "time")
            << '\n';
        out << "attack_refused = " << (attack_refused ? "true" : "false") << '\n';
        out << "liveness = "
            << (!liveness_asserted ? "unasserted" : liveness_ok ? "ok" : "LIVENESS_FAIL") << '\n';
        out << "view_changes = " << view_changes << '\n';
        out << "messages_total = " << messages_total << '\n';
        out << "messages_per_height_max = " << messages_per_height_max << '\n';
        out << "determinism = " << determinism_digest << '\n';
        for (std::size_t i = 0; i < clients.size(); ++i) {
            const ClientReport& c = clients[i];
            out << "client " << i << " assumption = " << c.assumption << '\n';
            out << "client " << i << " committed_height = " << c.committed_height << '\n';
            out << "client " << i << " conflict = " << (c.conflict ? "true" : "false") << '\n';
            out << "client " << i << " first_commit_latency = " << c.first_commit_latency << '\n';
        }
        return out.str();
    }
};

/// Transcript-only metrics: message totals, per-height counts, view
/// changes and commit latencies, all derived from the recorded stream.
struct TranscriptMetrics {
    std::uint64_t messages_total = 0;
    std::map<Height, std::uint64_t> messages_per_height;  // proposal + vote traffic
    std::uint64_t view_changes = 0;
    std::map<Digest, Time> first_proposal_emit;  // block digest -> first emission time
    // per client: (height -> first direct-commit time)
    std::map<std::uint32_t, std::map<Height, Time>> direct_commit_times;
    std::map<std::uint32_t, std::map<Height, Time>> commit_times;

    /// Earliest time at which `need` distinct voters' votes for some
    /// (block, view) have all been delivered somewhere.
    [[nodiscard]] static std::optional<Time> quorum_formed_at(const ParsedTranscript& pt,
                                                              const Digest& block, View view,
                                                              std::size_t need) {
        std::map<ReplicaId, Time> earliest;
        for (const ParsedDelivery& d : pt.deliveries) {
            const auto* vm = std::get_if<VoteMsg>(&d.message);
            if (vm == nullptr || vm->vote.block != block || vm->vote.view != view) continue;
            auto [it, inserted] = earliest.emplace(vm->vote.voter, d.time);
            if (!inserted) it->second = std::min(it->second, d.time);
        }
        if (earliest.size() < need) return std::nullopt;
        std::vector<Time> times;
        times.reserve(earliest.size());
        for (const auto& [voter, t] : earliest) times.push_back(t);
        std::sort(times.begin(), times.end());
        return times[need - 1];
    }
};

inline TranscriptMetrics compute_metrics(const ParsedTranscript& pt) {
    TranscriptMetrics m;
    m.messages_total = pt.sends.size();
    std::set<View> changed_views;
    for (const ParsedSend& s : pt.sends) {
        if (const auto* p = std::get_if<ProposalMsg>(&s.message)) {
            m.messages_per_height[p->block.height] += 1;
            const Digest d = block_digest(p->block);
            auto [it, inserted] = m.first_proposal_emit.emplace(d, s.sent);
            if (!inserted) it->second = std::min(it->second, s.sent);
        } else if (const auto* v = std::get_if<VoteMsg>(&s.message)) {
            if (const Block* b = pt.blocks.find(v->vote.block))
                m.messages_per_height[b->height] += 1;
        } else if (const auto* bc = std::get_if<BlameCertMsg>(&s.message)) {
            changed_views.insert(bc->view);
        }
    }
    m.view_changes = changed_views.size();
    for (const ParsedCommit& c : pt.commits) {
        auto& all = m.commit_times[c.client];
        if (all.count(c.decision.height) == 0) all[c.decision.height] = c.time;
        if (c.decision.direct) {
            auto& direct = m.direct_commit_times[c.client];
            if (direct.count(c.decision.height) == 0) direct[c.decision.height] = c.time;
        }
    }
    return m;
}

struct RunOutput {
    Transcript transcript;
    RunReport report;
    std::vector<ClientState> client_states;
    StopReason stop = StopReason::TimeBound;
};

/// Builds the world for a scenario, runs it to its bound, and derives
/// the report from the transcript plus final client states.
inline RunOutput run_scenario(const ScenarioConfig& cfg) {
    const StrategyPlan plan = make_strategy(cfg);
    World world(cfg, plan.strategy);
    world.run();

    RunOutput out;
    out.transcript = world.transcript();
    out.stop = world.stop_reason();

    RunReport& report = out.report;
    report.scenario = cfg.name;
    report.seed = cfg.seed;
    report.stop = world.stop_reason();
    report.attack_refused = plan.attack_refused;
    report.liveness_asserted = cfg.assert_liveness;
    report.determinism_digest = out.transcript.determinism_digest().hex();

    const ParsedTranscript pt = parse_transcript(out.transcript);
    const TranscriptMetrics metrics = compute_metrics(pt);
    report.view_changes = metrics.view_changes;
    report.messages_total = metrics.messages_total;
    for (const auto& [height, count] : metrics.messages_per_height)
        report.messages_per_height_max = std::max(report.messages_per_height_max, count);

    for (std::uint32_t c = 0; c < world.clients().size(); ++c) {
        const ClientObserver& obs = world.clients()[c];
        out.client_states.push_back(obs.state());
        ClientReport cr;
        cr.assumption = obs.state().assumption.str();
        cr.committed_height = obs.state().committed_height();
        cr.conflict = obs.state().conflict_flag;
        cr.chain_export = export_committed_chain(obs.state());
        const auto directs = metrics.direct_commit_times.find(c);
        if (directs != metrics.direct_commit_times.end() && !directs->second.empty()) {
            // the first directly committed block, by commit time
            Height h = directs->second.begin()->first;
            Time committed = directs->second.begin()->second;
            for (const auto& [height, t] : directs->second)
                if (t < committed || (t == committed && height < h)) {
                    h = height;
                    committed = t;
                }
            for (const ParsedCommit& pc : pt.commits) {
                if (pc.client != c || !pc.decision.direct || pc.decision.height != h) continue;
                const auto prop = metrics.first_proposal_emit.find(pc.decision.block);
                if (prop != metrics.first_proposal_emit.end())
                    cr.first_commit_latency = committed - prop->second;
                break;
            }
        }
        report.clients.push_back(std::move(cr));
    }
    report.liveness_ok =
        !cfg.assert_liveness || world.stop_reason() == StopReason::TargetReached;
    return out;
}

enum class ReplayStatus : std::uint8_t { Pass, Diverged, AuditFailed };

struct ReplayResult {
    ReplayStatus status = ReplayStatus::Pass;
    Time divergence_time = 0;
    std::uint64_t divergence_seq = 0;
    std::string detail;
    std::vector<std::string> audit_problems;

    [[nodiscard]] bool ok() const { return status == ReplayStatus::Pass; }
};

/// Re-executes the embedded scenario deterministically and confirms the
/// recorded byte stream matches record for record, then re-checks the
/// transcript-level invariants and the lock-maximality replay assertion.
inline ReplayResult replay(const Transcript& recorded) {
    ReplayResult result;
    const ScenarioConfig cfg = parse_scenario(recorded.scenario_text);
    if (cfg.seed != recorded.seed) {
        result.status = ReplayStatus::Diverged;
        result.detail = "seed mismatch between header and scenario";
        return result;
    }
    const StrategyPlan plan = make_strategy(cfg);
    World world(cfg, plan.strategy);
    world.run();
    const Transcript& fresh = world.transcript();

    const std::size_t common = std::min(fresh.records.size(), recorded.records.size());
    for (std::size_t i = 0; i < common; ++i) {
        const Bytes a = fresh.records[i].encode();
        const Bytes b = recorded.records[i].encode();
        if (a != b) {
            result.status = ReplayStatus::Diverged;
            result.divergence_time = recorded.records[i].time;
            result.divergence_seq = recorded.records[i].seq;
            result.detail = "record " + std::to_string(i) + " differs";
            return result;
        }
    }
    if (fresh.records.size() != recorded.records.size()) {
        result.status = ReplayStatus::Diverged;
        const std::size_t i = std::min(common, recorded.records.size() - 1);
        result.divergence_time = recorded.records.empty() ? 0 : recorded.records[i].time;
        result.divergence_seq = recorded.records.empty() ? 0 : recorded.records[i].seq;
        result.detail = "record count differs";
        return result;
    }

    const ParsedTranscript pt = parse_transcript(recorded);
    result.audit_problems = audit_all(pt);

    // lock maximality: at every delivery, the target's lock must rank at
    // least as high as any certificate the message carried; since the
    // re-run matched byte for byte, the fresh world's end state is the
    // recorded run's end state and the strongest certificate any honest
    // replica ever received must not outrank its final lock
    for (ReplicaId id = 0; id < cfg.protocol.n; ++id) {
        if (cfg.is_faulty(id)) continue;
        const Certificate& lock = world.replica(id).highest_cert();
        for (const ParsedDelivery& d : pt.deliveries) {
            if (d.target != id) continue;
            std::vector<Certificate> carried;
            audit_detail::collect_certs(d.message, carried);
            for (const Certificate& cert : carried) {
                if (!verify_certificate(cert, cfg.protocol)) continue;
                if (rank_certificates(cert, lock) == std::strong_ordering::greater)
                    result.audit_problems.push_back(
                        "replica " + std::to_string(id) +
                        " lock ranks below a delivered certificate");
            }
        }
    }
    if (!result.audit_problems.empty()) result.status = ReplayStatus::AuditFailed;
    return result;
}

inline ReplayResult replay_file(const std::string& path) {
    return replay(Transcript::load(path));
}

}  // namespace flexbft
