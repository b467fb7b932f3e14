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

#include <memory>

#include "replica.hpp"
#include "scenario.hpp"
#include "transcript.hpp"

namespace flexbft {

class World;

/// Hook points the simulation loop offers a fault strategy. A strategy
/// only ever acts for replicas in the scenario's fault sets; everything
/// it emits is authenticated as one of those replicas. Routing may
/// lengthen any link's delay within the delay model's bounds (the
/// adversary owns the network) but can never shorten one below the
/// model minimum or forge traffic.
class Strategy {
public:
    virtual ~Strategy() = default;

    [[nodiscard]] virtual std::string name() const = 0;

    /// Whether the scenario satisfies the strategy's attack
    /// precondition. A refused attack degrades every faulty replica to
    /// the honest shim so the run stays live.
    [[nodiscard]] virtual bool armed() const { return true; }

    /// Called once before the loop starts; may schedule strategy timers.
    virtual void on_start(World&) {}

    /// Observe (and optionally consume) an event addressed to a faulty
    /// replica. Returning true skips the honest handler.
    virtual bool on_event(ReplicaId, const Event&, Time, World&) { return false; }

    /// Rewrite what a faulty replica's honest logic just emitted.
    virtual void filter_outbound(ReplicaId, std::vector<Outbound>&, Time, World&) {}

    /// Distort the report a faulty replica hands to a probe.
    virtual ReplicaReport report(ReplicaId, ReplicaReport honest, Time, World&) {
        return honest;
    }

    /// Adversarial routing: an override for the delivery time of any
    /// message in flight, validated against the delay model.
    virtual std::optional<Time> route(ReplicaId /*sender*/, ReplicaId /*recipient*/,
                                      const Message&, Time /*now*/, World&) {
        return std::nullopt;
    }
};

/// Reserved strategy-timer tag space (kept clear of replica tags).
constexpr std::uint64_t kTimerStrategy = std::uint64_t{3} << 56;

enum class StopReason : std::uint8_t {
    TargetReached = 0,  // every client committed heights_target
    QueueExhausted = 1,
    TimeBound = 2,
};

/// One simulation run: replicas, clients, the adversary and the delay
/// model around a single event loop. Strictly single-threaded; the
/// transcript bytes are a pure function of (scenario, seed).
class World {
public:
    World(ScenarioConfig cfg, std::shared_ptr<Strategy> strategy)
        : cfg_(std::move(cfg)), strategy_(std::move(strategy)) {
        validate_protocol_config(cfg_.protocol);
        cfg_.delay.rng_seed = cfg_.seed;
        transcript_.seed = cfg_.seed;
        transcript_.scenario_text = cfg_.raw_text;
        replicas_.reserve(cfg_.protocol.n);
        for (ReplicaId id = 0; id < cfg_.protocol.n; ++id)
            replicas_.emplace_back(id, cfg_.protocol, cfg_.heights_target + 2);
        for (const ClientAssumption& a : cfg_.clients)
            clients_.emplace_back(a, cfg_.protocol);
    }

    [[nodiscard]] const ScenarioConfig& scenario() const { return cfg_; }
    [[nodiscard]] Time now() const { return now_; }
    [[nodiscard]] const Transcript& transcript() const { return transcript_; }
    [[nodiscard]] const std::vector<ClientObserver>& clients() const { return clients_; }
    [[nodiscard]] const Replica& replica(ReplicaId id) const { return replicas_.at(id); }
    [[nodiscard]] StopReason stop_reason() const { return stop_reason_; }

    // ---- strategy-facing surface ----

    /// Sends a message authenticated as `sender` (which must be faulty
    /// unless the loop itself is emitting) with an optional delivery
    /// override.
    void send_as(ReplicaId sender, ReplicaId to, const Message& msg,
                 std::optional<Time> deliver_at) {
        schedule_delivery(sender, to, msg, deliver_at);
    }

    void broadcast_as(ReplicaId sender, const Message& msg, std::optional<Time> deliver_at) {
        for (ReplicaId to = 0; to < cfg_.protocol.n; ++to)
            schedule_delivery(sender, to, msg, deliver_at);
    }

    void schedule_strategy_timer(ReplicaId replica, Time at, std::uint64_t tag) {
        if (at > cfg_.max_time) return;
        queue_.push(at, TimerEvent{replica, kTimerStrategy | tag});
    }

    /// Honest view of a faulty replica's own state (strategies may read
    /// their own replicas, e.g. to reuse genuinely assembled
    /// certificates).
    [[nodiscard]] const Replica& inspect(ReplicaId id) const { return replicas_.at(id); }

    // ---- run loop ----

    void run() {
        bootstrap();
        if (strategy_) strategy_->on_start(*this);
        while (!queue_.empty()) {
            const Event ev = queue_.pop();
            if (ev.time > cfg_.max_time) {
                stop_reason_ = StopReason::TimeBound;
                break;
            }
            now_ = std::max(now_, ev.time);
            process(ev);
            if (all_clients_done()) {
                stop_reason_ = StopReason::TargetReached;
                break;
            }
        }
        if (queue_.empty() && stop_reason_ == StopReason::TimeBound && now_ < cfg_.max_time)
            stop_reason_ = StopReason::QueueExhausted;
        final_probe();
    }

private:
    void bootstrap() {
        stop_reason_ = StopReason::TimeBound;
        for (ReplicaId id = 0; id < cfg_.protocol.n; ++id)
            queue_.push(0, TimerEvent{id, kTimerStart});
        for (std::uint32_t c = 0; c < clients_.size(); ++c)
            queue_.push(cfg_.probe_cadence, ProbeEvent{c});
    }

    [[nodiscard]] bool all_clients_done() const {
        for (const ClientObserver& c : clients_)
            if (c.state().committed_height() < cfg_.heights_target) return false;
        return true;
    }

    void process(const Event& ev) {
        record_event(ev);
        if (const auto* probe = std::get_if<ProbeEvent>(&ev.body)) {
            run_probe(probe->client, ev.time);
            const Time next = ev.time + cfg_.probe_cadence;
            if (next <= cfg_.max_time) queue_.push(next, ProbeEvent{probe->client});
            return;
        }
        const ReplicaId target = std::visit(
            [](const auto& body) -> ReplicaId {
                using T = std::decay_t<decltype(body)>;
                if constexpr (std::is_same_v<T, DeliverEvent>) return body.target;
                else if constexpr (std::is_same_v<T, TimerEvent>) return body.replica;
                else return 0;
            },
            ev.body);

        std::vector<Outbound> out;
        bool consumed = false;
        if (strategy_ && cfg_.is_faulty(target))
            consumed = strategy_->on_event(target, ev, ev.time, *this);
        if (!consumed) {
            // strategy timers are meaningless to the honest handler
            if (const auto* timer = std::get_if<TimerEvent>(&ev.body);
                timer != nullptr && (timer->tag & kTimerStrategy) == kTimerStrategy)
                return;
            out = replicas_[target].handle(ev, ev.time);
        }
        if (strategy_ && cfg_.is_faulty(target))
            strategy_->filter_outbound(target, out, ev.time, *this);
        for (const Outbound& o : out) dispatch_outbound(target, o, ev.time);
    }

    void dispatch_outbound(ReplicaId sender, const Outbound& o, Time now) {
        if (const auto* b = std::get_if<BroadcastOut>(&o)) {
            for (ReplicaId to = 0; to < cfg_.protocol.n; ++to)
                schedule_delivery(sender, to, b->message, std::nullopt);
        } else if (const auto* s = std::get_if<SendOut>(&o)) {
            schedule_delivery(sender, s->to, s->message, s->deliver_at);
        } else if (const auto* t = std::get_if<TimerOut>(&o)) {
            if (t->at > cfg_.max_time) return;
            const std::uint64_t seq = queue_.push(t->at, TimerEvent{sender, t->tag});
            record_emit_timer(sender, t->at, t->tag, seq);
        }
    }

    void schedule_delivery(ReplicaId sender, ReplicaId to, const Message& msg,
                           std::optional<Time> deliver_at) {
        const Time now = now_;
        Time at;
        if (deliver_at) {
            at = *deliver_at;
        } else {
            std::optional<Time> routed;
            if (strategy_) routed = strategy_->route(sender, to, msg, now, *this);
            at = routed ? *routed : delivery_time(cfg_.delay, sender, to, message_digest(msg), now);
        }
        if (sender != to && !delay_within_bounds(cfg_.delay, now, at))
            throw std::runtime_error("scripted delay violates the delay model bounds");
        if (at < now + cfg_.delay.min_delay) at = now + cfg_.delay.min_delay;
        if (at > cfg_.max_time) return;  // never processed; keep the queue finite
        const std::uint64_t seq = queue_.push(at, DeliverEvent{sender, to, now, msg});
        record_emit_delivery(sender, to, now, at, msg, seq);
    }

    // ---- probes ----

    void run_probe(std::uint32_t client, Time now) {
        std::vector<ReplicaReport> reports;
        reports.reserve(cfg_.protocol.n);
        for (ReplicaId id = 0; id < cfg_.protocol.n; ++id) {
            ReplicaReport rep = replicas_[id].report_snapshot(now);
            if (strategy_ && cfg_.is_faulty(id))
                rep = strategy_->report(id, std::move(rep), now, *this);
            record_emit_report(client, rep);
            reports.push_back(std::move(rep));
        }
        const std::vector<CommitDecision> fresh = clients_[client].observe(reports, now);
        for (const CommitDecision& d : fresh) record_commit(client, d, now);
    }

    /// One last evaluation for every client at the stop time, so end
    /// state is observable regardless of probe phase.
    void final_probe() {
        for (std::uint32_t c = 0; c < clients_.size(); ++c) {
            const std::uint64_t seq = queue_.push(now_, ProbeEvent{c});
            record_event(Event{now_, seq, ProbeEvent{c}});
            run_probe(c, now_);
        }
    }

    // ---- transcript records ----

    void record_event(const Event& ev) {
        TranscriptRecord rec;
        rec.kind = RecordKind::Event;
        rec.time = ev.time;
        rec.seq = ev.seq;
        ByteWriter w;
        if (const auto* d = std::get_if<DeliverEvent>(&ev.body)) {
            rec.actor = d->target;
            w.u8(0);
            w.u32(d->sender);
            w.u32(d->target);
            w.i64(d->sent_at);
            w.blob(encode_message(d->message));
        } else if (const auto* t = std::get_if<TimerEvent>(&ev.body)) {
            rec.actor = t->replica;
            w.u8(1);
            w.u32(t->replica);
            w.u64(t->tag);
        } else if (const auto* p = std::get_if<ProbeEvent>(&ev.body)) {
            rec.actor = p->client;
            w.u8(2);
            w.u32(p->client);
        }
        rec.payload = w.take();
        transcript_.records.push_back(std::move(rec));
    }

    void record_emit_delivery(ReplicaId sender, ReplicaId to, Time sent, Time at,
                              const Message& msg, std::uint64_t seq) {
        TranscriptRecord rec;
        rec.kind = RecordKind::Emit;
        rec.time = sent;
        rec.seq = seq;
        rec.actor = sender;
        ByteWriter w;
        w.u8(0);
        w.u32(sender);
        w.u32(to);
        w.i64(at);
        w.blob(encode_message(msg));
        rec.payload = w.take();
        transcript_.records.push_back(std::move(rec));
    }

    void record_emit_timer(ReplicaId replica, Time at, std::uint64_t tag, std::uint64_t seq) {
        TranscriptRecord rec;
        rec.kind = RecordKind::Emit;
        rec.time = now_;
        rec.seq = seq;
        rec.actor = replica;
        ByteWriter w;
        w.u8(1);
        w.u32(replica);
        w.i64(at);
        w.u64(tag);
        rec.payload = w.take();
        transcript_.records.push_back(std::move(rec));
    }

    void record_emit_report(std::uint32_t client, const ReplicaReport& rep) {
        TranscriptRecord rec;
        rec.kind = RecordKind::Emit;
        rec.time = rep.time;
        rec.seq = 0;
        rec.actor = rep.replica;
        ByteWriter w;
        w.u8(2);
        w.u32(client);
        w.u32(rep.replica);
        const Bytes enc = rep.encode();
        w.raw(sha256_digest(enc).bytes);
        rec.payload = w.take();
        transcript_.records.push_back(std::move(rec));
    }

    void record_commit(std::uint32_t client, const CommitDecision& d, Time now) {
        TranscriptRecord rec;
        rec.kind = RecordKind::Commit;
        rec.time = now;
        rec.seq = 0;
        rec.actor = client;
        rec.payload = d.encode();
        transcript_.records.push_back(std::move(rec));
    }

    ScenarioConfig cfg_;
    std::shared_ptr<Strategy> strategy_;
    std::vector<Replica> replicas_;
    std::vector<ClientObserver> clients_;
    EventQueue queue_;
    Transcript transcript_;
    Time now_ = 0;
    StopReason stop_reason_ = StopReason::TimeBound;
};

}  // namespace flexbft
