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

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include <flexbft/flexbft.hpp>

using namespace flexbft;

namespace {

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << content;
}

int cmd_run(const std::string& scenario_path, std::optional<std::uint64_t> seed,
            const std::string& out_dir) {
    std::ifstream in(scenario_path);
    if (!in) {
        std::cerr << "error: cannot open " << scenario_path << '\n';
        return 2;
    }
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (seed) text += "\nseed = " + std::to_string(*seed) + "\n";
    const ScenarioConfig cfg = parse_scenario(text);

    const RunOutput out = run_scenario(cfg);
    std::cout << out.report.text();

    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const std::string stem =
        out_dir + "/" + cfg.name + "-" + std::to_string(cfg.seed);
    out.transcript.save(stem + ".transcript");
    write_file(stem + ".report.txt", out.report.text());
    for (std::size_t i = 0; i < out.client_states.size(); ++i)
        write_file(stem + ".client" + std::to_string(i) + ".chain",
                   export_committed_chain(out.client_states[i]));
    std::cout << "wrote " << stem << ".transcript\n";

    // declared assertions decide the exit code
    bool ok = out.report.liveness_ok;
    for (std::size_t i = 0; i < out.client_states.size(); ++i) {
        const bool expected = cfg.expect_conflict.count(i) > 0;
        if (out.client_states[i].conflict_flag != expected) {
            std::cerr << "assertion failed: client " << i
                      << (expected ? " expected a conflict" : " unexpectedly conflicted")
                      << '\n';
            ok = false;
        }
    }
    if (!out.report.liveness_ok) std::cerr << "assertion failed: liveness\n";
    return ok ? 0 : 1;
}

int cmd_replay(const std::string& transcript_path) {
    const ReplayResult result = replay_file(transcript_path);
    switch (result.status) {
        case ReplayStatus::Pass:
            std::cout << "PASS replay " << transcript_path << '\n';
            return 0;
        case ReplayStatus::Diverged:
            std::cout << "FAIL replay diverged at time=" << result.divergence_time
                      << " seq=" << result.divergence_seq << ": " << result.detail << '\n';
            return 1;
        case ReplayStatus::AuditFailed:
            std::cout << "FAIL replay audit:\n";
            for (const std::string& p : result.audit_problems) std::cout << "  " << p << '\n';
            return 1;
    }
    return 1;
}

int cmd_region(const std::string& qr, const std::string& step, const std::string& out_path) {
    const calculus::RegionGrid grid =
        calculus::region_grid(Rational::parse(qr), Rational::parse(step));
    const std::string csv = calculus::region_csv(grid);
    if (out_path.empty()) {
        std::cout << csv;
    } else {
        write_file(out_path, csv);
        std::cout << "wrote " << out_path << " (" << grid.points.size() << " points)\n";
    }
    return 0;
}

int cmd_compare(const std::vector<std::string>& qr_values, const std::string& step) {
    std::vector<Rational> list;
    list.reserve(qr_values.size());
    for (const std::string& q : qr_values) list.push_back(Rational::parse(q));
    std::cout << calculus::compare_qr_text(calculus::compare_qr(list, Rational::parse(step)));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"flexbft: deterministic flexible-quorum BFT simulator and quorum calculus"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir = "out";
    auto* run = app.add_subcommand("run", "run a scenario and write transcript + reports");
    run->add_option("scenario", scenario_path, "scenario file")->required();
    run->add_option("--seed", seed, "override the scenario seed");
    run->add_option("--out", out_dir, "output directory (default: out)");

    std::string transcript_path;
    auto* rep = app.add_subcommand("replay", "re-execute and verify a recorded transcript");
    rep->add_option("transcript", transcript_path, "transcript file")->required();

    std::string qr = "2/3", step = "1/20", region_out;
    auto* region = app.add_subcommand("region", "export the supported-client region as CSV");
    region->add_option("--qr", qr, "replica quorum fraction p/q")->required();
    region->add_option("--step", step, "lattice step p/q (default 1/20)");
    region->add_option("--out", region_out, "output file (default: stdout)");

    std::vector<std::string> qr_list;
    std::string compare_step = "1/20";
    auto* compare = app.add_subcommand("compare-qr", "compare CR1 regions across q_r values");
    compare->add_option("qr", qr_list, "two or more q_r values p/q")->required()->expected(2, -1);
    compare->add_option("--step", compare_step, "lattice step p/q (default 1/20)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(scenario_path, seed, out_dir);
        if (rep->parsed()) return cmd_replay(transcript_path);
        if (region->parsed()) return cmd_region(qr, step, region_out);
        if (compare->parsed()) return cmd_compare(qr_list, compare_step);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 2;
}
