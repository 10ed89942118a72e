// Copyright 2026 The fedtopo Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Canonical structured-text encoding shared by the wire format and the
// repository. Objects serialize with sorted keys and doubles in shortest
// round-trip form (nlohmann::json's default dump). Readers are strict:
// missing fields, wrong types and non-finite numbers raise protocol errors.

#include <string>

#include "json.hpp"

#include "fedtopo/model.hpp"
#include "fedtopo/strategy.hpp"
#include "fedtopo/transport/envelope.hpp"

namespace fedtopo {

using Json = nlohmann::json;

namespace jsonio {

const Json& field(const Json& obj, const char* key);
std::uint64_t get_u64(const Json& obj, const char* key);
std::int64_t get_i64(const Json& obj, const char* key);
double get_f64(const Json& obj, const char* key);
bool get_bool(const Json& obj, const char* key);
std::string get_str(const Json& obj, const char* key);
std::vector<std::string> get_str_list(const Json& obj, const char* key);

// Finite-checked number writer.
Json number(double v);

}  // namespace jsonio

Json to_json(const ModelParams& p);
ModelParams model_params_from_json(const Json& j);

Json to_json(const Hyperparams& h);
Hyperparams hyperparams_from_json(const Json& j);

Json to_json(const Envelope& env);
Envelope envelope_from_json(const Json& j);

// Compact canonical text.
std::string canonical_dump(const Json& j);

}  // namespace fedtopo
