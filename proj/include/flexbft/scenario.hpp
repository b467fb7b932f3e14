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

#include "client.hpp"
#include "netsim.hpp"

namespace flexbft {

enum class ScenarioErrorCode : std::uint8_t {
    Io = 1,
    BadField = 2,
    QrRange = 3,
    FaultOverlap = 4,
    UnknownStrategy = 5,
    BadClient = 6,
    BadDelay = 7,
    QuorumUnavailable = 8,
};

class ScenarioError : public std::runtime_error {
public:
    ScenarioError(ScenarioErrorCode code, std::string field, const std::string& message)
        : std::runtime_error("scenario error [" + std::string(code_name(code)) + "] field '" +
                             field + "': " + message),
          code_(code),
          field_(std::move(field)) {}

    [[nodiscard]] ScenarioErrorCode code() const { return code_; }
    [[nodiscard]] const std::string& field() const { return field_; }

    static const char* code_name(ScenarioErrorCode code) {
        switch (code) {
            case ScenarioErrorCode::Io: return "E_IO";
            case ScenarioErrorCode::BadField: return "E_BAD_FIELD";
            case ScenarioErrorCode::QrRange: return "E_QR_RANGE";
            case ScenarioErrorCode::FaultOverlap: return "E_FAULT_OVERLAP";
            case ScenarioErrorCode::UnknownStrategy: return "E_UNKNOWN_STRATEGY";
            case ScenarioErrorCode::BadClient: return "E_BAD_CLIENT";
            case ScenarioErrorCode::BadDelay: return "E_BAD_DELAY";
            case ScenarioErrorCode::QuorumUnavailable: return "E_QUORUM_UNAVAILABLE";
        }
        return "E_UNKNOWN";
    }

private:
    ScenarioErrorCode code_;
    std::string field_;
};

inline const std::vector<std::string>& known_strategies() {
    static const std::vector<std::string> names = {
        "none", "silent", "equivocate", "abc_double_commit", "cr2_delay",
    };
    return names;
}

/// Everything one experiment needs: protocol parameters, fault sets and
/// strategy, the delay model, the client population, and run bounds.
struct ScenarioConfig {
    std::string name = "unnamed";
    std::uint64_t seed = 0;
    ProtocolConfig protocol;
    std::set<ReplicaId> byzantine;
    std::set<ReplicaId> abc;
    std::string strategy = "none";
    std::map<std::string, std::string> strategy_params;
    DelayModel delay;
    std::vector<ClientAssumption> clients;
    Height heights_target = 10;
    Time probe_cadence = 50;
    Time max_time = 1'000'000;
    bool assert_liveness = true;
    std::set<std::size_t> expect_conflict;  // client indexes expected to trip
    std::string raw_text;

    [[nodiscard]] bool is_faulty(ReplicaId id) const {
        return byzantine.count(id) > 0 || abc.count(id) > 0;
    }

    [[nodiscard]] Rational faulty_fraction() const {
        return Rational(static_cast<std::int64_t>(byzantine.size() + abc.size()),
                        static_cast<std::int64_t>(protocol.n));
    }

    [[nodiscard]] Rational byzantine_fraction() const {
        return Rational(static_cast<std::int64_t>(byzantine.size()),
                        static_cast<std::int64_t>(protocol.n));
    }

    /// Whether a client assumption is correct for this scenario's fault
    /// budget and actual network bound, per the tolerance calculus.
    [[nodiscard]] bool assumption_correct(const ClientAssumption& a) const {
        if (a.mode == ClientAssumption::Mode::PartialSync) {
            const calculus::Tolerance tol = calculus::cr1_tolerance(protocol.q_r, a.q_c);
            return faulty_fraction() < tol.safety_total &&
                   byzantine_fraction() <= tol.liveness_byz;
        }
        const calculus::Tolerance tol = calculus::cr2_tolerance(protocol.q_r);
        return faulty_fraction() < tol.safety_total &&
               byzantine_fraction() <= tol.liveness_byz &&
               (delay.kind == DelayKind::Synchronous && a.delta >= delay.actual_delta);
    }
};

namespace detail {

inline std::vector<std::string> split_ws(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> out;
    std::string word;
    while (in >> word) out.push_back(word);
    return out;
}

inline std::int64_t parse_int(const std::string& text, const std::string& field) {
    try {
        std::size_t used = 0;
        const std::int64_t v = std::stoll(text, &used);
        if (used != text.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ScenarioError(ScenarioErrorCode::BadField, field, "expected integer, got '" + text + "'");
    }
}

inline Rational parse_rational(const std::string& text, const std::string& field) {
    try {
        return Rational::parse(text);
    } catch (const std::exception&) {
        throw ScenarioError(ScenarioErrorCode::BadField, field, "expected rational, got '" + text + "'");
    }
}

}  // namespace detail

/// Parses the scenario text format: '#' comments, 'key = value' lines,
/// repeated 'client = cr1 <q_c>' / 'client = cr2 <delta>' lines, and
/// dotted 'strategy.<param>' keys. Validates all cross-field invariants.
inline ScenarioConfig parse_scenario(const std::string& text) {
    ScenarioConfig cfg;
    cfg.raw_text = text;
    cfg.protocol.n = 4;
    cfg.protocol.q_r = Rational(2, 3);
    cfg.protocol.base_timeout = 400;

    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            if (!detail::split_ws(line).empty())
                throw ScenarioError(ScenarioErrorCode::BadField,
                                    "line " + std::to_string(line_no), "expected 'key = value'");
            continue;
        }
        auto trim = [](std::string s) {
            const auto begin = s.find_first_not_of(" \t\r");
            const auto end = s.find_last_not_of(" \t\r");
            return begin == std::string::npos ? std::string{} : s.substr(begin, end - begin + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        if (key == "name") {
            cfg.name = value;
        } else if (key == "seed") {
            cfg.seed = static_cast<std::uint64_t>(detail::parse_int(value, key));
        } else if (key == "n") {
            cfg.protocol.n = static_cast<std::size_t>(detail::parse_int(value, key));
        } else if (key == "q_r") {
            cfg.protocol.q_r = detail::parse_rational(value, key);
        } else if (key == "base_timeout") {
            cfg.protocol.base_timeout = detail::parse_int(value, key);
        } else if (key == "timeout_growth") {
            cfg.protocol.timeout_growth = detail::parse_int(value, key);
        } else if (key == "heights_target") {
            cfg.heights_target = static_cast<Height>(detail::parse_int(value, key));
        } else if (key == "probe_cadence") {
            cfg.probe_cadence = detail::parse_int(value, key);
        } else if (key == "max_time") {
            cfg.max_time = detail::parse_int(value, key);
        } else if (key == "byzantine" || key == "abc") {
            auto& target = key == "byzantine" ? cfg.byzantine : cfg.abc;
            for (const std::string& id : detail::split_ws(value))
                target.insert(static_cast<ReplicaId>(detail::parse_int(id, key)));
        } else if (key == "strategy") {
            cfg.strategy = value;
        } else if (key.rfind("strategy.", 0) == 0) {
            cfg.strategy_params[key.substr(9)] = value;
        } else if (key == "delay_kind") {
            if (value == "synchronous") cfg.delay.kind = DelayKind::Synchronous;
            else if (value == "partial_synchrony") cfg.delay.kind = DelayKind::PartialSynchrony;
            else throw ScenarioError(ScenarioErrorCode::BadDelay, key, "unknown delay kind '" + value + "'");
        } else if (key == "delay_actual") {
            cfg.delay.actual_delta = detail::parse_int(value, key);
        } else if (key == "delay_min") {
            cfg.delay.min_delay = detail::parse_int(value, key);
        } else if (key == "gst") {
            cfg.delay.gst = detail::parse_int(value, key);
        } else if (key == "client") {
            const auto words = detail::split_ws(value);
            if (words.size() != 2)
                throw ScenarioError(ScenarioErrorCode::BadClient, key,
                                    "expected 'cr1 <q_c>' or 'cr2 <delta>'");
            if (words[0] == "cr1")
                cfg.clients.push_back(
                    ClientAssumption::partial_sync(detail::parse_rational(words[1], key)));
            else if (words[0] == "cr2")
                cfg.clients.push_back(
                    ClientAssumption::sync(detail::parse_int(words[1], key)));
            else
                throw ScenarioError(ScenarioErrorCode::BadClient, key,
                                    "unknown rule '" + words[0] + "'");
        } else if (key == "assert_liveness") {
            if (value == "true") cfg.assert_liveness = true;
            else if (value == "false") cfg.assert_liveness = false;
            else throw ScenarioError(ScenarioErrorCode::BadField, key, "expected true/false");
        } else if (key == "expect_conflict") {
            for (const std::string& idx : detail::split_ws(value))
                cfg.expect_conflict.insert(static_cast<std::size_t>(detail::parse_int(idx, key)));
        } else {
            throw ScenarioError(ScenarioErrorCode::BadField, key, "unknown field");
        }
    }

    // cross-field validation
    if (cfg.protocol.n < 1)
        throw ScenarioError(ScenarioErrorCode::BadField, "n", "replica count must be >= 1");
    if (!(cfg.protocol.q_r > Rational(1, 2)) || cfg.protocol.q_r > Rational(1))
        throw ScenarioError(ScenarioErrorCode::QrRange, "q_r", "q_r must exceed 1/2 and be <= 1");
    if (quorum_count(cfg.protocol.n, cfg.protocol.q_r) > cfg.protocol.n)
        throw ScenarioError(ScenarioErrorCode::QrRange, "q_r",
                            "quorum exceeds replica count at this q_r");
    if (cfg.protocol.base_timeout <= 0)
        throw ScenarioError(ScenarioErrorCode::BadField, "base_timeout", "must be positive");
    for (const ReplicaId id : cfg.byzantine)
        if (id >= cfg.protocol.n)
            throw ScenarioError(ScenarioErrorCode::BadField, "byzantine",
                                "replica id " + std::to_string(id) + " out of range");
    for (const ReplicaId id : cfg.abc)
        if (id >= cfg.protocol.n)
            throw ScenarioError(ScenarioErrorCode::BadField, "abc",
                                "replica id " + std::to_string(id) + " out of range");
    for (const ReplicaId id : cfg.byzantine)
        if (cfg.abc.count(id) > 0)
            throw ScenarioError(ScenarioErrorCode::FaultOverlap, "byzantine/abc",
                                "replica " + std::to_string(id) + " in both fault sets");
    if (std::find(known_strategies().begin(), known_strategies().end(), cfg.strategy) ==
        known_strategies().end())
        throw ScenarioError(ScenarioErrorCode::UnknownStrategy, "strategy",
                            "unknown strategy '" + cfg.strategy + "'");
    if (cfg.clients.empty())
        throw ScenarioError(ScenarioErrorCode::BadClient, "client", "at least one client required");
    for (const ClientAssumption& a : cfg.clients) {
        try {
            validate_assumption(a, cfg.protocol);
        } catch (const std::exception& e) {
            throw ScenarioError(ScenarioErrorCode::BadClient, "client", e.what());
        }
    }
    try {
        validate_delay_model(cfg.delay);
    } catch (const std::exception& e) {
        throw ScenarioError(ScenarioErrorCode::BadDelay, "delay", e.what());
    }
    if (cfg.probe_cadence <= 0)
        throw ScenarioError(ScenarioErrorCode::BadField, "probe_cadence", "must be positive");
    if (cfg.assert_liveness &&
        quorum_count(cfg.protocol.n, cfg.protocol.q_r) > cfg.protocol.n - cfg.byzantine.size())
        throw ScenarioError(ScenarioErrorCode::QuorumUnavailable, "byzantine",
                            "liveness asserted but byzantine set can starve the quorum");
    return cfg;
}

inline ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ScenarioError(ScenarioErrorCode::Io, "path", "cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

}  // namespace flexbft
