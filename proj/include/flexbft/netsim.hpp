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

#include <queue>
#include <variant>

#include "messages.hpp"

namespace flexbft {

enum class DelayKind : std::uint8_t {
    Synchronous,       // every message delivered within actual_delta
    PartialSynchrony,  // bounded only after GST
};

/// Link-delay model. Sampling is hash-based over (seed, sender,
/// recipient, message digest, send time) so inserting one message never
/// perturbs the delays of unrelated messages.
struct DelayModel {
    DelayKind kind = DelayKind::Synchronous;
    Time actual_delta = 10;  // synchronous bound, or post-GST bound
    Time gst = 0;            // partial synchrony only
    Time min_delay = 1;
    std::uint64_t rng_seed = 0;
};

inline void validate_delay_model(const DelayModel& m) {
    if (m.min_delay < 1) throw std::invalid_argument("delay model: min_delay must be >= 1");
    if (m.actual_delta < m.min_delay)
        throw std::invalid_argument("delay model: bound below min_delay");
    if (m.kind == DelayKind::PartialSynchrony && m.gst < 0)
        throw std::invalid_argument("delay model: negative gst");
}

/// Deterministic draw in [lo, hi] from the hash of the sampling tuple.
inline Time sample_in_range(Time lo, Time hi, std::uint64_t seed, ReplicaId sender,
                            ReplicaId recipient, const Digest& msg, Time now) {
    if (hi <= lo) return lo;
    ByteWriter w;
    w.str("fbft-delay");
    w.u64(seed);
    w.u32(sender);
    w.u32(recipient);
    w.raw(msg.bytes);
    w.i64(now);
    const Digest h = sha256_digest(w.bytes());
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x |= std::uint64_t(h.bytes[i]) << (8 * i);
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<Time>(x % span);
}

/// Delivery time for a message sent at `now`. Under partial synchrony a
/// pre-GST message lands at gst plus a post-GST sample, unless a
/// scripted override (validated elsewhere) replaces it.
inline Time delivery_time(const DelayModel& m, ReplicaId sender, ReplicaId recipient,
                          const Digest& msg, Time now) {
    if (sender == recipient) return now + m.min_delay;  // loopback
    switch (m.kind) {
        case DelayKind::Synchronous:
            return now + sample_in_range(m.min_delay, m.actual_delta, m.rng_seed, sender,
                                         recipient, msg, now);
        case DelayKind::PartialSynchrony: {
            const Time base = now >= m.gst ? now : m.gst;
            return base + sample_in_range(m.min_delay, m.actual_delta, m.rng_seed, sender,
                                          recipient, msg, now);
        }
    }
    return now + m.min_delay;
}

/// True iff delivering at `at` a message sent at `now` stays within the
/// model's bounds; scripted/adversarial delays must satisfy this.
inline bool delay_within_bounds(const DelayModel& m, Time now, Time at) {
    if (at < now + m.min_delay) return false;
    switch (m.kind) {
        case DelayKind::Synchronous: return at <= now + m.actual_delta;
        case DelayKind::PartialSynchrony:
            if (now >= m.gst) return at <= now + m.actual_delta;
            return true;  // pre-GST delays are arbitrary but finite
    }
    return false;
}

struct DeliverEvent {
    ReplicaId sender = 0;
    ReplicaId target = 0;
    Time sent_at = 0;
    Message message;
};

struct TimerEvent {
    ReplicaId replica = 0;
    std::uint64_t tag = 0;
};

struct ProbeEvent {
    std::uint32_t client = 0;
};

struct Event {
    Time time = 0;
    std::uint64_t seq = 0;  // monotone tiebreaker, unique per run
    std::variant<DeliverEvent, TimerEvent, ProbeEvent> body;
};

/// Strict (time, seq) priority queue; seq is assigned at scheduling
/// time, so processing order is a pure function of the schedule.
class EventQueue {
public:
    std::uint64_t push(Time time, std::variant<DeliverEvent, TimerEvent, ProbeEvent> body) {
        const std::uint64_t seq = next_seq_++;
        queue_.push(Event{time, seq, std::move(body)});
        return seq;
    }

    [[nodiscard]] bool empty() const { return queue_.empty(); }
    [[nodiscard]] std::size_t size() const { return queue_.size(); }
    [[nodiscard]] const Event& top() const { return queue_.top(); }

    Event pop() {
        Event e = queue_.top();
        queue_.pop();
        return e;
    }

private:
    struct Later {
        bool operator()(const Event& a, const Event& b) const {
            if (a.time != b.time) return a.time > b.time;
            return a.seq > b.seq;
        }
    };

    std::priority_queue<Event, std::vector<Event>, Later> queue_;
    std::uint64_t next_seq_ = 0;
};

/// What a handler hands back to the simulation loop.
struct BroadcastOut {
    Message message;
};
struct SendOut {
    ReplicaId to = 0;
    Message message;
    std::optional<Time> deliver_at;  // adversarial/scripted override
};
struct TimerOut {
    Time at = 0;
    std::uint64_t tag = 0;
};
using Outbound = std::variant<BroadcastOut, SendOut, TimerOut>;

}  // namespace flexbft
