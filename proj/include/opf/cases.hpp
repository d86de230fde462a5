#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "opf/netmodel.hpp"

namespace opf {

struct CasePreset {
  std::string id;
  std::string description;
  std::string document;  // case schema JSON
};

const std::vector<CasePreset>& builtin_cases();

/// Built-in document text for `id`, if one exists.
std::optional<std::string> builtin_case_document(std::string_view id);

/// Resolves a built-in id or a filesystem path.
NetworkCase resolve_case(const std::string& id_or_path);

}  // namespace opf
