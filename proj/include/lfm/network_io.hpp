#pragma once

#include <filesystem>

#include <json.hpp>

#include "lfm/grid_model.hpp"

namespace lfm {

/// Malformed input document. The message names the offending field.
class SchemaError : public Error {
  public:
    using Error::Error;
};

/// Parses the network document without validating it. Lines may give either
/// impedance (r, x) or admittance (g, b); shunts are a number (both ends) or a
/// [from, to] pair and default to zero.
[[nodiscard]] Network parse_network(const nlohmann::json& doc, const std::string& where = "network");

/// Reads, parses and validates. Structural problems surface as NetworkError.
[[nodiscard]] Network load_network(const std::filesystem::path& path);

[[nodiscard]] nlohmann::json network_to_json(const Network& net);

[[nodiscard]] nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace lfm
