// Copyright 2026 The mielearn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mie/nn_core.hpp"
#include "mie/quantum_sim.hpp"
#include "mie/training.hpp"

namespace mie {

using Json = nlohmann::ordered_json;

Json to_json(const CircuitSpec &spec);
/// Missing probe fields default to the geometry's probe placement.
CircuitSpec circuit_from_json(const Json &j);

Json to_json(const ModelConfig &config);
/// Either {"preset": name} with optional overrides, or explicit dimensions.
ModelConfig model_config_from_json(const Json &j);

Json to_json(const TrainConfig &config);
/// Overrides fields present in `j` on top of `base`.
TrainConfig train_config_from_json(const Json &j, TrainConfig base = {});

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

/// Base64 of the little-endian IEEE-754 bytes.
std::string encode_doubles(std::span<const double> values);
std::vector<double> decode_doubles(std::string_view encoded);

/// %.17g, the shortest form that round-trips every double.
std::string format_double(double v);

/// Seeds do not fit a JSON double; they are stored as decimal strings.
std::string seed_to_string(uint64_t seed);
uint64_t seed_from_json(const Json &j);

}  // namespace mie
