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

#ifndef FLEXBFT_FLEXBFT_HPP
#define FLEXBFT_FLEXBFT_HPP

// Umbrella header for the whole library: a deterministic, seedable
// simulator for a flexible-quorum BFT protocol (network-speed replicas,
// diverse client commit rules, scripted adversaries) plus the exact
// rational quorum calculus behind it.

#include "adversary.hpp"
#include "audit.hpp"
#include "calculus.hpp"
#include "client.hpp"
#include "core.hpp"
#include "harness.hpp"
#include "messages.hpp"
#include "netsim.hpp"
#include "rational.hpp"
#include "replica.hpp"
#include "report.hpp"
#include "scenario.hpp"
#include "sha256.hpp"
#include "transcript.hpp"
#include "world.hpp"

#endif  // FLEXBFT_FLEXBFT_HPP
