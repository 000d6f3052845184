#pragma once

#include "pminv/kvfile.hpp"
#include "pminv/model.hpp"

#include <string>

namespace pminv {

/// Writes all 18 coordinates under their field names (omega1..nu).
void put_params(KeyValues& kv, const ModelParams& p, const std::string& prefix = "");
/// Reads fields present in `kv`; missing fields keep their value in `base`.
ModelParams get_params(const KeyValues& kv, const ModelParams& base = ModelParams::defaults(),
                       const std::string& prefix = "");

void write_params_file(const std::string& path, const ModelParams& p);
/// Every field must be present.
ModelParams read_params_file(const std::string& path);

}  // namespace pminv
