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

// Acceptance suite: drives the full scenario corpus and checks the
// protocol-level guarantees end to end, printing one line per
// criterion. Exit status is zero only if every criterion passes.

#include <chrono>
#include <filesystem>
#include <iostream>

#include <flexbft/flexbft.hpp>

using namespace flexbft;

namespace {

struct Criterion {
    std::string name;
    bool pass = true;
    std::vector<std::string> notes;

    void expect(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            notes.push_back(what);
        }
    }
};

std::vector<Criterion> g_criteria;

Criterion& criterion(const std::string& name) {
    g_criteria.push_back(Criterion{name});
    return g_criteria.back();
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration_cast<std::chrono::duration<double>>(
               std::chrono::steady_clock::now() - start)
        .count();
}

struct CorpusRun {
    ScenarioConfig cfg;
    RunOutput out;
    ParsedTranscript parsed;
};

std::vector<CorpusRun> run_corpus(double* elapsed_run_seconds) {
    namespace fs = std::filesystem;
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(FLEXBFT_SCENARIO_DIR))
        if (entry.path().extension() == ".scn") paths.push_back(entry.path().string());
    std::sort(paths.begin(), paths.end());

    std::vector<CorpusRun> runs;
    const auto start = std::chrono::steady_clock::now();
    for (const std::string& path : paths) {
        CorpusRun run;
        run.cfg = load_scenario(path);
        run.out = run_scenario(run.cfg);
        runs.push_back(std::move(run));
    }
    *elapsed_run_seconds = seconds_since(start);
    for (CorpusRun& run : runs) run.parsed = parse_transcript(run.out.transcript);
    return runs;
}

std::map<Height, std::set<Digest>> chain_of(const ClientState& state) {
    std::map<Height, std::set<Digest>> out;
    for (const CommitDecision& d : state.committed) out[d.height].insert(d.block);
    return out;
}

// ---- criterion 1: exact quorum calculus ----

void check_calculus() {
    Criterion& c = criterion("criterion-1 calculus exactness");
    const auto start = std::chrono::steady_clock::now();
    using namespace calculus;

    const Tolerance classic = cr1_tolerance(Rational(2, 3), Rational(2, 3));
    c.expect(classic.safety_total == Rational(1, 3) && classic.liveness_byz == Rational(1, 3),
             "cr1(2/3, 2/3) must be exactly (1/3, 1/3)");

    const Tolerance mixed = cr1_tolerance(Rational(7, 10), Rational(4, 5));
    c.expect(mixed.safety_total == Rational(1, 2) && mixed.liveness_byz == Rational(1, 5),
             "cr1(0.7, 0.8) must be exactly (1/2, 1/5)");

    const Tolerance sync = cr2_tolerance(Rational(2, 3));
    c.expect(sync.safety_total == Rational(2, 3) && sync.liveness_byz == Rational(1, 3),
             "cr2(2/3) must be exactly (2/3, 1/3)");

    const RegionBoundary b = region_boundary(Rational(2, 3));
    c.expect(b.cr1_low.byz == Rational(1, 3) && b.cr1_low.total == Rational(1, 3),
             "CR1 segment endpoint must be (1/3, 1/3)");
    c.expect(b.cr1_high.byz == Rational(0) && b.cr1_high.total == Rational(2, 3),
             "CR1 segment endpoint must be (0, 2/3)");

    c.expect(seconds_since(start) < 1.0, "calculus checks must finish under one second");
}

// ---- criterion 2: safety across diverse correct clients ----

void check_safety(const std::vector<CorpusRun>& runs, double corpus_seconds) {
    Criterion& c = criterion("criterion-2 safety across diverse correct clients");
    c.expect(runs.size() >= 30, "corpus must have at least 30 scenarios");
    std::set<std::size_t> sizes;
    for (const CorpusRun& run : runs) sizes.insert(run.cfg.protocol.n);
    for (const std::size_t n : {4, 10, 20, 30})
        c.expect(sizes.count(n) == 1, "corpus must cover n = " + std::to_string(n));

    for (const CorpusRun& run : runs) {
        std::vector<std::size_t> correct;
        for (std::size_t i = 0; i < run.cfg.clients.size(); ++i)
            if (run.cfg.assumption_correct(run.cfg.clients[i])) correct.push_back(i);

        for (const std::size_t i : correct) {
            c.expect(!run.out.client_states[i].conflict_flag,
                     run.cfg.name + ": correct client " + std::to_string(i) +
                         " raised a conflict flag");
            const auto chain = chain_of(run.out.client_states[i]);
            for (const auto& [height, digests] : chain)
                c.expect(digests.size() == 1, run.cfg.name + ": correct client " +
                                                  std::to_string(i) +
                                                  " committed two blocks at one height");
        }
        // pairwise prefix consistency over common heights
        for (std::size_t a = 0; a < correct.size(); ++a) {
            for (std::size_t b = a + 1; b < correct.size(); ++b) {
                const auto ca = chain_of(run.out.client_states[correct[a]]);
                const auto cb = chain_of(run.out.client_states[correct[b]]);
                for (const auto& [height, digests] : ca) {
                    const auto other = cb.find(height);
                    if (other == cb.end()) continue;
                    c.expect(digests == other->second,
                             run.cfg.name + ": clients " + std::to_string(correct[a]) + "/" +
                                 std::to_string(correct[b]) + " disagree at height " +
                                 std::to_string(height));
                }
            }
        }
        // transcript-level safety invariants
        for (const std::string& problem : audit_certificate_uniqueness(run.parsed))
            c.expect(false, run.cfg.name + ": " + problem);
        for (const std::string& problem : audit_direct_commit_ranking(run.parsed))
            c.expect(false, run.cfg.name + ": " + problem);
    }
    c.expect(corpus_seconds <= 60.0, "corpus runtime exceeded 60 s: " +
                                         std::to_string(corpus_seconds));
}

// ---- criterion 3: diversity attack separation ----

const CorpusRun* find_run(const std::vector<CorpusRun>& runs, const std::string& name) {
    for (const CorpusRun& run : runs)
        if (run.cfg.name == name) return &run;
    return nullptr;
}

void check_attacks(const std::vector<CorpusRun>& runs) {
    Criterion& c = criterion("criterion-3 diversity attack separation");

    const auto start = std::chrono::steady_clock::now();
    const CorpusRun* cr1 = find_run(runs, "attack-double-commit");
    c.expect(cr1 != nullptr, "attack-double-commit scenario missing");
    if (cr1 != nullptr) {
        c.expect(!cr1->out.report.attack_refused, "double-commit attack refused to arm");
        c.expect(cr1->out.client_states[0].conflict_flag,
                 "CR1(3/5) victim must trip its conflict flag");
        c.expect(!cr1->out.client_states[1].conflict_flag,
                 "CR1(4/5) client must stay clean");
        const auto strong = chain_of(cr1->out.client_states[1]);
        for (const auto& [height, digests] : strong)
            c.expect(digests.size() == 1, "CR1(4/5) client must commit a single chain");
        // determinism per seed
        const RunOutput again = run_scenario(cr1->cfg);
        c.expect(again.transcript.encode() == cr1->out.transcript.encode(),
                 "double-commit attack must be deterministic per seed");
    }

    const CorpusRun* cr2 = find_run(runs, "attack-cr2-delay");
    c.expect(cr2 != nullptr, "attack-cr2-delay scenario missing");
    if (cr2 != nullptr) {
        c.expect(!cr2->out.report.attack_refused, "cr2-delay attack refused to arm");
        c.expect(cr2->out.client_states[0].conflict_flag,
                 "CR2(small delta) victim must trip its conflict flag");
        c.expect(!cr2->out.client_states[1].conflict_flag,
                 "CR2(correct delta) client must stay clean");
        const RunOutput again = run_scenario(cr2->cfg);
        c.expect(again.transcript.encode() == cr2->out.transcript.encode(),
                 "cr2-delay attack must be deterministic per seed");
    }
    c.expect(seconds_since(start) <= 10.0, "attack scenarios exceeded their time budget");
}

// ---- criterion 4: liveness ----

void check_liveness(const std::vector<CorpusRun>& runs) {
    Criterion& c = criterion("criterion-4 liveness");
    for (const CorpusRun& run : runs) {
        if (!run.cfg.assert_liveness) continue;
        // the fault budget of every liveness scenario keeps Byzantine
        // replicas within 1 - q_r and a-b-c replicas on the honest shim
        c.expect(run.cfg.byzantine_fraction() <= Rational(1) - run.cfg.protocol.q_r,
                 run.cfg.name + ": byzantine fraction too large for a liveness assertion");
        c.expect(run.out.stop == StopReason::TargetReached,
                 run.cfg.name + ": correct clients failed to reach the height target");
        c.expect(run.out.report.liveness_ok, run.cfg.name + ": liveness flagged failed");

        // committed height strictly increases across every window of n
        // consecutive views entered after GST
        const Time gst = run.cfg.delay.kind == DelayKind::PartialSynchrony ? run.cfg.delay.gst : 0;
        std::map<View, Time> entry;  // view v entered when the blame cert for v-1 first ships
        entry[0] = 0;
        for (const ParsedSend& s : run.parsed.sends)
            if (const auto* bc = std::get_if<BlameCertMsg>(&s.message))
                if (entry.count(bc->view + 1) == 0 || s.sent < entry[bc->view + 1])
                    entry[bc->view + 1] = s.sent;
        const std::size_t n = run.cfg.protocol.n;
        for (const auto& [view, t_enter] : entry) {
            const auto later = entry.find(view + n);
            if (later == entry.end() || t_enter < gst) continue;
            for (std::size_t i = 0; i < run.cfg.clients.size(); ++i) {
                if (!run.cfg.assumption_correct(run.cfg.clients[i])) continue;
                Height at_start = 0, at_end = 0;
                for (const ParsedCommit& pc : run.parsed.commits) {
                    if (pc.client != i) continue;
                    if (pc.time <= t_enter) at_start = std::max(at_start, pc.decision.height);
                    if (pc.time <= later->second) at_end = std::max(at_end, pc.decision.height);
                }
                c.expect(at_end > at_start,
                         run.cfg.name + ": client " + std::to_string(i) +
                             " made no progress across views " + std::to_string(view) + ".." +
                             std::to_string(view + n));
            }
        }
    }

    // silent-leader recovery: once the blame quorum preceding the first
    // honest leader's view forms, certificates resume within one timeout
    // period of that view
    for (const CorpusRun& run : runs) {
        if (run.cfg.strategy != "silent" || run.cfg.byzantine.count(0) == 0) continue;
        View honest_view = 1;
        while (run.cfg.byzantine.count(
                   static_cast<ReplicaId>(honest_view % run.cfg.protocol.n)) > 0)
            ++honest_view;
        Time quorum_at = kTimeInfinity;
        for (const ParsedSend& s : run.parsed.sends)
            if (const auto* bc = std::get_if<BlameCertMsg>(&s.message))
                if (bc->view + 1 == honest_view) quorum_at = std::min(quorum_at, s.sent);
        c.expect(quorum_at < kTimeInfinity, run.cfg.name + ": no blame quorum recorded");

        const std::size_t m_r = quorum_count(run.cfg.protocol.n, run.cfg.protocol.q_r);
        Time first_new_cert = kTimeInfinity;
        for (const auto& [key, voters] : run.parsed.votes) {
            if (key.second != honest_view || voters.size() < m_r) continue;
            const auto formed =
                TranscriptMetrics::quorum_formed_at(run.parsed, key.first, key.second, m_r);
            if (formed) first_new_cert = std::min(first_new_cert, *formed);
        }
        Time budget = run.cfg.protocol.base_timeout;
        for (View v = 0; v < honest_view; ++v) budget *= run.cfg.protocol.timeout_growth;
        c.expect(first_new_cert <= quorum_at + budget,
                 run.cfg.name + ": first certificate of view " + std::to_string(honest_view) +
                     " came later than one timeout after the blame quorum");
    }
}

// ---- criterion 5: latency claims ----

void check_latency(const std::vector<CorpusRun>& runs) {
    Criterion& c = criterion("criterion-5 latency claims");
    for (const std::string& name : {"ideal-n4-s1", "ideal-n10-s1"}) {
        const CorpusRun* run = find_run(runs, name);
        c.expect(run != nullptr, std::string(name) + " missing");
        if (run == nullptr) continue;
        const Time d = run->cfg.delay.actual_delta;
        const TranscriptMetrics m = compute_metrics(run->parsed);
        const std::size_t m_r = quorum_count(run->cfg.protocol.n, run->cfg.protocol.q_r);

        // parent -> child links of the single ideal chain
        std::map<Height, std::pair<Digest, Digest>> pairs;
        for (const auto& [digest, block] : run->parsed.blocks.all()) {
            if (block.height == 0) continue;
            if (const Block* parent = run->parsed.blocks.find(block.parent);
                parent != nullptr && parent->height >= 1)
                pairs[parent->height] = {block.parent, digest};
        }

        // CR1: a block is committable exactly two voting rounds (four
        // uniform hops) after its proposal
        for (const auto& [height, pair] : pairs) {
            if (height + 1 >= run->cfg.heights_target) continue;
            const auto ready = TranscriptMetrics::quorum_formed_at(run->parsed, pair.second, 0, m_r);
            c.expect(ready.has_value(), name + ": missing successor quorum");
            if (!ready) continue;
            const Time proposed = m.first_proposal_emit.at(pair.first);
            c.expect(*ready - proposed == 4 * d,
                     name + ": CR1 readiness at height " + std::to_string(height) + " is " +
                         std::to_string(*ready - proposed) + ", expected " +
                         std::to_string(4 * d));
        }

        // client-observed commits: CR1 within the readiness plus one
        // probe; CR2 within 2*delta + 3 hops plus one probe
        for (std::size_t i = 0; i < run->cfg.clients.size(); ++i) {
            const ClientAssumption& a = run->cfg.clients[i];
            const auto commits = m.commit_times.find(i);
            if (commits == m.commit_times.end()) continue;
            for (const auto& [height, committed_at] : commits->second) {
                const auto pair = pairs.find(height);
                if (pair == pairs.end()) continue;
                const Time proposed = m.first_proposal_emit.at(pair->second.first);
                const Time bound =
                    a.mode == ClientAssumption::Mode::PartialSync
                        ? proposed + 4 * d + run->cfg.probe_cadence
                        : proposed + 2 * a.delta + 3 * d + run->cfg.probe_cadence;
                c.expect(committed_at <= bound,
                         name + ": client " + std::to_string(i) + " commit of height " +
                             std::to_string(height) + " at " + std::to_string(committed_at) +
                             " exceeds bound " + std::to_string(bound));
            }
        }
    }
}

// ---- criterion 6: communication complexity ----

void check_complexity(const std::vector<CorpusRun>& runs) {
    Criterion& c = criterion("criterion-6 quadratic message complexity");
    // pinned regression: ideal per-height traffic is exactly n^2 + n
    // sends (one proposal broadcast, n vote broadcasts), so the single
    // constant c = 2 covers every size
    for (const std::string& name : {"ideal-n4-s1", "ideal-n10-s1", "ideal-n20-s1"}) {
        const CorpusRun* run = find_run(runs, name);
        c.expect(run != nullptr, std::string(name) + " missing");
        if (run == nullptr) continue;
        const std::uint64_t n = run->cfg.protocol.n;
        const TranscriptMetrics m = compute_metrics(run->parsed);
        for (Height h = 1; h + 1 < run->cfg.heights_target; ++h) {
            const auto count = m.messages_per_height.find(h);
            c.expect(count != m.messages_per_height.end() && count->second == n * n + n,
                     name + ": height " + std::to_string(h) + " traffic deviates from n^2 + n");
            if (count != m.messages_per_height.end())
                c.expect(count->second <= 2 * n * n,
                         name + ": height traffic exceeds 2 n^2");
        }
    }
}

// ---- criterion 8: determinism and replay ----

void check_determinism(const std::vector<CorpusRun>& runs) {
    Criterion& c = criterion("criterion-8 determinism and replay");
    for (const CorpusRun& run : runs) {
        const RunOutput second = run_scenario(run.cfg);
        c.expect(second.transcript.encode() == run.out.transcript.encode(),
                 run.cfg.name + ": repeated run diverged");
        const ReplayResult rep = replay(run.out.transcript);
        c.expect(rep.ok(), run.cfg.name + ": replay failed (" + rep.detail + ")");
        for (const std::string& problem : rep.audit_problems)
            c.expect(false, run.cfg.name + ": audit: " + problem);
    }
}

}  // namespace

int main() {
    double corpus_seconds = 0.0;
    const std::vector<CorpusRun> runs = run_corpus(&corpus_seconds);

    check_calculus();
    check_safety(runs, corpus_seconds);
    check_attacks(runs);
    check_liveness(runs);
    check_latency(runs);
    check_complexity(runs);
    check_determinism(runs);

    bool all_pass = true;
    for (const Criterion& c : g_criteria) {
        std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << '\n';
        for (const std::string& note : c.notes) std::cout << "     - " << note << '\n';
        all_pass &= c.pass;
    }
    std::cout << "corpus: " << runs.size() << " scenarios in " << corpus_seconds << " s\n";
    return all_pass ? 0 : 1;
}
