#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "deskmate/memory.hpp"

namespace deskmate::memory {

inline constexpr int kScenarioSchemaVersion = 1;

class ScenarioError : public Error {
 public:
  // `path` is a JSON pointer to the offending field.
  ScenarioError(std::string path, const std::string& message)
      : Error(path + ": " + message), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

struct ItemKindInfo {
  // Words in a request that refer to this kind ("print" for "printer").
  std::vector<std::string> keywords;
  // Non-portable kinds (a printer) are used in place, never handed over.
  bool portable = true;
};

struct FileSpec {
  std::string id;
  EntityId holder;
};

// A parsed scenario. `truth` carries every ownership edge; `known` is the
// initial long-term memory and only holds the edges flagged as known.
struct Scenario {
  std::string name;
  TopoGraph truth;
  TopoGraph known;
  std::vector<ChatGroup> groups;
  std::map<std::string, ItemKindInfo> item_kinds;
  std::vector<FileSpec> files;
  EntityId robot_home;
  std::map<EntityId, std::string> location_types;

  // Request keywords for an item kind: the kind itself plus configured aliases.
  std::vector<std::string> keywords_for(const std::string& kind) const;
  const ChatGroup* find_group(std::string_view id_or_name) const;
};

Scenario parse_scenario(const nlohmann::json& doc);
Scenario load_scenario_file(const std::filesystem::path& path);

}  // namespace deskmate::memory
