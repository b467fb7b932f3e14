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
#include <optional>
#include <variant>

#include "core.hpp"

namespace flexbft {

struct ProposalMsg;

/// Status of a replica's locked (highest certified) block, sent to the
/// leader of a new view.
struct StatusMsg {
    View view = 0;  // the new view this status is for
    Block locked_block;
    Certificate cert;  // certifies locked_block, from some older view
    ReplicaId sender = 0;
    Auth auth;

    bool operator==(const StatusMsg&) const = default;

    [[nodiscard]] Digest signing_digest() const {
        ByteWriter w;
        w.str("fbft-status");
        w.u64(view);
        w.blob(locked_block.encode());
        w.blob(cert.encode());
        w.u32(sender);
        return sha256_digest(w.bytes());
    }

    [[nodiscard]] Bytes encode() const {
        ByteWriter w;
        w.u64(view);
        w.blob(locked_block.encode());
        w.blob(cert.encode());
        w.u32(sender);
        w.raw(auth.encode());
        return w.take();
    }

    static StatusMsg decode(ByteReader& r) {
        StatusMsg s;
        s.view = r.u64();
        {
            const Bytes raw = r.blob();
            ByteReader br(raw);
            s.locked_block = Block::decode(br);
        }
        {
            const Bytes raw = r.blob();
            ByteReader br(raw);
            s.cert = Certificate::decode(br);
        }
        s.sender = r.u32();
        s.auth = Auth::decode(r);
        return s;
    }
};

inline StatusMsg make_status(ReplicaId sender, View view, const Block& locked,
                             const Certificate& cert) {
    StatusMsg s{view, locked, cert, sender, {}};
    s.auth = make_auth(sender, s.signing_digest());
    return s;
}

/// A quorum of status messages for the same new view; attached to the
/// first proposal of the view so every replica can check the leader
/// extended the highest certified block reported to it.
struct StatusSet {
    std::vector<StatusMsg> statuses;  // sorted by sender, distinct

    bool operator==(const StatusSet&) const = default;

    [[nodiscard]] Bytes encode() const {
        ByteWriter w;
        w.u64(statuses.size());
        for (const StatusMsg& s : statuses) w.blob(s.encode());
        return w.take();
    }

    static StatusSet decode(ByteReader& r) {
        StatusSet set;
        const std::uint64_t n = r.u64();
        for (std::uint64_t i = 0; i < n; ++i) {
            const Bytes raw = r.blob();
            ByteReader br(raw);
            set.statuses.push_back(StatusMsg::decode(br));
        }
        return set;
    }
};

struct ProposalMsg {
    Block block;
    View view = 0;
    Certificate prev_cert;  // certifies block.parent
    std::optional<StatusSet> status;  // present iff first proposal of the view
    ReplicaId proposer = 0;
    Auth auth;

    bool operator==(const ProposalMsg&) const = default;

    [[nodiscard]] Digest signing_digest() const {
        ByteWriter w;
        w.str("fbft-propose");
        w.blob(block.encode());
        w.u64(view);
        w.blob(prev_cert.encode());
        w.u8(status.has_value() ? 1 : 0);
        if (status) w.blob(status->encode());
        w.u32(proposer);
        return sha256_digest(w.bytes());
    }

    [[nodiscard]] Bytes encode() const {
        ByteWriter w;
        w.blob(block.encode());
        w.u64(view);
        w.blob(prev_cert.encode());
        w.u8(status.has_value() ? 1 : 0);
        if (status) w.blob(status->encode());
        w.u32(proposer);
        w.raw(auth.encode());
        return w.take();
    }

    static ProposalMsg decode(ByteReader& r) {
        ProposalMsg p;
        {
            const Bytes raw = r.blob();
            ByteReader br(raw);
            p.block = Block::decode(br);
        }
        p.view = r.u64();
        {
            const Bytes raw = r.blob();
            ByteReader br(raw);
            p.prev_cert = Certificate::decode(br);
        }
        if (r.u8() == 1) {
            const Bytes raw = r.blob();
            ByteReader br(raw);
            p.status = StatusSet::decode(br);
        }
        p.proposer = r.u32();
        p.auth = Auth::decode(r);
        return p;
    }
};

inline ProposalMsg make_proposal(ReplicaId proposer, Block block, View view,
                                 Certificate prev_cert, std::optional<StatusSet> status) {
    ProposalMsg p{std::move(block), view, std::move(prev_cert), std::move(status), proposer, {}};
    p.auth = make_auth(proposer, p.signing_digest());
    return p;
}

/// A vote doubles as the re-broadcast of the proposal it endorses, so
/// equivocation can be observed "through a vote".
struct VoteMsg {
    Vote vote;
    std::optional<ProposalMsg> proposal;  // the proposal being voted on

    bool operator==(const VoteMsg&) const = default;

    [[nodiscard]] Bytes encode() const {
        ByteWriter w;
        w.raw(vote.encode());
        w.u8(proposal.has_value() ? 1 : 0);
        if (proposal) w.blob(proposal->encode());
        return w.take();
    }

    static VoteMsg decode(ByteReader& r) {
        VoteMsg v;
        v.vote = Vote::decode(r);
        if (r.u8() == 1) {
            const Bytes raw = r.blob();
            ByteReader br(raw);
            v.proposal = ProposalMsg::decode(br);
        }
        return v;
    }
};

/// Complaint against the leader of a view: either a no-progress timeout
/// or provable equivocation, in which case the two conflicting signed
/// proposals ride along as evidence.
struct BlameMsg {
    View view = 0;
    ReplicaId blamer = 0;
    std::optional<std::pair<ProposalMsg, ProposalMsg>> evidence;
    Auth auth;

    bool operator==(const BlameMsg&) const = default;

    [[nodiscard]] Digest signing_digest() const {
        ByteWriter w;
        w.str("fbft-blame");
        w.u64(view);
        w.u32(blamer);
        return sha256_digest(w.bytes());
    }

    [[nodiscard]] Bytes encode() const {
        ByteWriter w;
        w.u64(view);
        w.u32(blamer);
        w.u8(evidence.has_value() ? 1 : 0);
        if (evidence) {
            w.blob(evidence->first.encode());
            w.blob(evidence->second.encode());
        }
        w.raw(auth.encode());
        return w.take();
    }

    static BlameMsg decode(ByteReader& r) {
        BlameMsg b;
        b.view = r.u64();
        b.blamer = r.u32();
        if (r.u8() == 1) {
            const Bytes raw1 = r.blob();
            ByteReader br1(raw1);
            ProposalMsg p1 = ProposalMsg::decode(br1);
            const Bytes raw2 = r.blob();
            ByteReader br2(raw2);
            ProposalMsg p2 = ProposalMsg::decode(br2);
            b.evidence = std::make_pair(std::move(p1), std::move(p2));
        }
        b.auth = Auth::decode(r);
        return b;
    }
};

inline BlameMsg make_blame(ReplicaId blamer, View view,
                           std::optional<std::pair<ProposalMsg, ProposalMsg>> evidence) {
    BlameMsg b{view, blamer, std::move(evidence), {}};
    b.auth = make_auth(blamer, b.signing_digest());
    return b;
}

/// A quorum of blames for one view; receiving it is equivalent to
/// having gathered the blames individually.
struct BlameCertMsg {
    View view = 0;
    std::vector<BlameMsg> blames;  // sorted by blamer, distinct

    bool operator==(const BlameCertMsg&) const = default;

    [[nodiscard]] Bytes encode() const {
        ByteWriter w;
        w.u64(view);
        w.u64(blames.size());
        for (const BlameMsg& b : blames) w.blob(b.encode());
        return w.take();
    }

    static BlameCertMsg decode(ByteReader& r) {
        BlameCertMsg c;
        c.view = r.u64();
        const std::uint64_t n = r.u64();
        for (std::uint64_t i = 0; i < n; ++i) {
            const Bytes raw = r.blob();
            ByteReader br(raw);
            c.blames.push_back(BlameMsg::decode(br));
        }
        return c;
    }
};

using Message = std::variant<ProposalMsg, VoteMsg, BlameMsg, BlameCertMsg, StatusMsg>;

enum class MessageKind : std::uint8_t {
    Proposal = 0,
    Vote = 1,
    Blame = 2,
    BlameCert = 3,
    Status = 4,
};

inline MessageKind message_kind(const Message& m) {
    return static_cast<MessageKind>(m.index());
}

inline const char* message_kind_name(MessageKind k) {
    switch (k) {
        case MessageKind::Proposal: return "propose";
        case MessageKind::Vote: return "vote";
        case MessageKind::Blame: return "blame";
        case MessageKind::BlameCert: return "blame-cert";
        case MessageKind::Status: return "status";
    }
    return "?";
}

inline Bytes encode_message(const Message& m) {
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(m.index()));
    std::visit([&](const auto& msg) { w.blob(msg.encode()); }, m);
    return w.take();
}

inline Message decode_message(ByteReader& r) {
    const auto kind = static_cast<MessageKind>(r.u8());
    const Bytes raw = r.blob();
    ByteReader br(raw);
    switch (kind) {
        case MessageKind::Proposal: return ProposalMsg::decode(br);
        case MessageKind::Vote: return VoteMsg::decode(br);
        case MessageKind::Blame: return BlameMsg::decode(br);
        case MessageKind::BlameCert: return BlameCertMsg::decode(br);
        case MessageKind::Status: return StatusMsg::decode(br);
    }
    throw std::runtime_error("decode: unknown message kind");
}

inline Digest message_digest(const Message& m) {
    const Bytes enc = encode_message(m);
    return sha256_digest(enc);
}

}  // namespace flexbft
