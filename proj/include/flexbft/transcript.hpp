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

#include <fstream>
#include <sstream>

#include "netsim.hpp"

namespace flexbft {

/// Transcript file layout: magic "FBFT", one format version byte, a
/// code version word, the seed, the full scenario text, then
/// length-prefixed records. Each record is (kind, time, seq, actor,
/// payload digest, payload bytes). The byte stream is a pure function
/// of (scenario, seed); the determinism digest is the SHA-256 of the
/// whole file.
constexpr std::uint8_t kTranscriptVersion = 1;
constexpr std::uint32_t kCodeVersion = 0x00010000;

enum class RecordKind : std::uint8_t {
    Event = 0,   // a handler invocation (delivery, timer, probe)
    Emit = 1,    // something the handler produced
    Commit = 2,  // a client commit decision at a probe
};

struct TranscriptRecord {
    RecordKind kind = RecordKind::Event;
    Time time = 0;
    std::uint64_t seq = 0;
    std::uint32_t actor = 0;  // replica id, or client index for probe records
    Bytes payload;

    [[nodiscard]] Bytes encode() const {
        ByteWriter w;
        w.u8(static_cast<std::uint8_t>(kind));
        w.i64(time);
        w.u64(seq);
        w.u32(actor);
        const Digest payload_digest = sha256_digest(payload);
        w.raw(payload_digest.bytes);
        w.blob(payload);
        return w.take();
    }

    static TranscriptRecord decode(ByteReader& r) {
        TranscriptRecord rec;
        rec.kind = static_cast<RecordKind>(r.u8());
        rec.time = r.i64();
        rec.seq = r.u64();
        rec.actor = r.u32();
        Digest claimed;
        r.raw(claimed.bytes);
        rec.payload = r.blob();
        if (sha256_digest(rec.payload) != claimed)
            throw std::runtime_error("transcript: payload digest mismatch");
        return rec;
    }
};

struct Transcript {
    std::uint8_t version = kTranscriptVersion;
    std::uint32_t code_version = kCodeVersion;
    std::uint64_t seed = 0;
    std::string scenario_text;
    std::vector<TranscriptRecord> records;

    [[nodiscard]] Bytes encode() const {
        ByteWriter w;
        w.raw(to_bytes("FBFT"));
        w.u8(version);
        w.u32(code_version);
        w.u64(seed);
        w.str(scenario_text);
        w.u64(records.size());
        for (const TranscriptRecord& rec : records) w.blob(rec.encode());
        return w.take();
    }

    static Transcript decode(std::span<const std::uint8_t> data) {
        ByteReader r(data);
        std::array<std::uint8_t, 4> magic{};
        r.raw(magic);
        if (to_string(magic) != "FBFT") throw std::runtime_error("transcript: bad magic");
        Transcript t;
        t.version = r.u8();
        if (t.version != kTranscriptVersion)
            throw std::runtime_error("transcript: format version mismatch");
        t.code_version = r.u32();
        if (t.code_version != kCodeVersion)
            throw std::runtime_error("transcript: code version mismatch");
        t.seed = r.u64();
        t.scenario_text = r.str();
        const std::uint64_t n = r.u64();
        t.records.reserve(n);
        for (std::uint64_t i = 0; i < n; ++i) {
            const Bytes raw = r.blob();
            ByteReader br(raw);
            t.records.push_back(TranscriptRecord::decode(br));
        }
        if (!r.done()) throw std::runtime_error("transcript: trailing bytes");
        return t;
    }

    [[nodiscard]] Digest determinism_digest() const {
        const Bytes enc = encode();
        return sha256_digest(enc);
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("transcript: cannot open " + path);
        const Bytes enc = encode();
        out.write(reinterpret_cast<const char*>(enc.data()),
                  static_cast<std::streamsize>(enc.size()));
    }

    static Transcript load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("transcript: cannot open " + path);
        Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return decode(data);
    }
};

/// Human-readable projection of a transcript for diffing; one line per
/// record, stable field order.
inline std::string transcript_to_text(const Transcript& t) {
    std::ostringstream out;
    out << "version=" << int(t.version) << " code=" << t.code_version << " seed=" << t.seed
        << '\n';
    for (const TranscriptRecord& rec : t.records) {
        const char* kind = rec.kind == RecordKind::Event  ? "event"
                           : rec.kind == RecordKind::Emit ? "emit"
                                                          : "commit";
        out << rec.time << ' ' << rec.seq << ' ' << kind << " actor=" << rec.actor
            << " payload=" << hex_encode(rec.payload).substr(0, 24)
            << " digest=" << sha256_digest(rec.payload).hex().substr(0, 16) << '\n';
    }
    return out.str();
}

}  // namespace flexbft
