#pragma once

#include "hi/params.hpp"
#include "hi/vectors.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace hi::io {

inline constexpr int kSchemaVersion = 1;

// Every document carries "schema_version" and "kind"; numbers are decimal strings.
nlohmann::json params_to_json(const ParameterSystem& p);
ParameterSystem params_from_json(const nlohmann::json& j);

nlohmann::json vector_to_json(const SparseVector& x);
SparseVector vector_from_json(const nlohmann::json& j);

nlohmann::json sqrt_vector_to_json(const SqrtVector& x);
SqrtVector sqrt_vector_from_json(const nlohmann::json& j);

// Accepts either kind; a rational vector becomes a square-root vector.
SqrtVector any_vector_from_json(const nlohmann::json& j);

nlohmann::json blocks_to_json(const std::vector<SqrtVector>& blocks);
std::vector<SqrtVector> blocks_from_json(const nlohmann::json& j);

// Throws Error on unreadable or malformed files.
nlohmann::json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

// Stable serialization used for outputs and digests.
std::string dump(const nlohmann::json& j);

void require_kind(const nlohmann::json& j, const std::string& kind);

}  // namespace hi::io
