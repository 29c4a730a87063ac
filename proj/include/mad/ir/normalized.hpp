#pragma once

#include "mad/ir/types.hpp"

#include <json.hpp>

#include <string_view>

namespace mad::ir {

/// Parses a fullnode normalized-module document (see
/// docs/normalized-module-schema.md). Object key order is declaration order.
/// Throws SchemaError(path) on missing or mistyped fields.
ModuleIR parse_normalized_doc(const nlohmann::ordered_json& doc);
ModuleIR parse_normalized(std::string_view json_text);

/// Inverse of parse_normalized, used by the service cache and fixtures.
nlohmann::ordered_json to_normalized(const ModuleIR& module);

} // namespace mad::ir
