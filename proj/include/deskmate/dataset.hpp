#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "deskmate/actions.hpp"
#include "deskmate/memory.hpp"
#include "deskmate/scenario.hpp"

namespace deskmate::dataset {

using memory::EntityId;

inline constexpr int kDatasetSchemaVersion = 1;

enum class Level { L1, L2, L3 };
std::string_view to_string(Level level);
Level parse_level(std::string_view text);

// Level plus achievability, the four rows of the dataset summary.
enum class Category { l1, l2, l3_achievable, l3_unachievable };
std::string_view to_string(Category category);
Level level_of(Category category);
bool achievable(Category category);

// A participant of a task. Fixed roles name one person; capability roles
// accept anyone who owns an item of `kind`, preferring `preferred`.
struct Role {
  std::string name;
  std::optional<EntityId> person;
  std::optional<std::string> kind;
  std::optional<EntityId> preferred;
  // Fixed roles the robot only messages (never meets) ignore availability.
  bool needs_presence = true;

  bool capability() const { return kind.has_value(); }
  bool operator==(const Role&) const = default;
};

struct Slot {
  enum class Type { any, person, place, group, contains, equals };
  Type type = Type::any;
  // person/place: "@role" or an entity id; group: group id; equals: literal.
  std::string ref;
  // contains: any one of these words, case-insensitive.
  std::vector<std::string> words;

  bool operator==(const Slot&) const = default;
};
std::string_view to_string(Slot::Type type);

// Slot keys are parameter names; "text" stands for content or question.
struct Template {
  std::vector<actions::ActionKind> kinds;
  std::map<std::string, Slot> slots;
  // Ordered groups are matched in ascending order; 0 matches anywhere.
  int order = 0;
  bool required = true;

  bool operator==(const Template&) const = default;
};

struct GoldSpec {
  std::vector<Role> roles;
  std::vector<Template> templates;

  const Role* find_role(std::string_view name) const;
  bool operator==(const GoldSpec&) const = default;
};

struct TaskEntry {
  std::string id;
  std::string base_id;
  std::string family;
  std::string instruction;
  EntityId requester;
  std::map<EntityId, bool> availability;
  Level level = Level::L1;
  bool achievable = true;
  GoldSpec gold;

  Category category() const;
  bool operator==(const TaskEntry&) const = default;
};

// --- gold resolution --------------------------------------------------------

// A template with every role reference replaced by an entity.
struct ConcreteTemplate {
  std::vector<actions::ActionKind> kinds;
  std::map<std::string, Slot> slots;  // refs are entity or group ids
  int order = 0;
  bool required = true;
  std::string label;

  bool operator==(const ConcreteTemplate&) const = default;
};

struct AdmissibleSet {
  std::map<std::string, EntityId> binding;
  std::vector<ConcreteTemplate> templates;

  int required_count() const;
  bool operator==(const AdmissibleSet&) const = default;
};

class GoldError : public Error {
 public:
  using Error::Error;
};

// Pure in (gold, availability, scenario).
Category classify(const GoldSpec& gold, const EntityId& requester, const std::map<EntityId, bool>& availability,
                  const memory::Scenario& scenario);

// Achievable entries: one set per binding of capability roles. Unachievable
// entries: a single set whose only required template is Stop(unachievable).
std::vector<AdmissibleSet> resolve_gold(const TaskEntry& entry, const memory::Scenario& scenario);

// Whether `action` satisfies the template's kind and slot constraints.
bool matches(const ConcreteTemplate& tmpl, const actions::Action& action, const memory::Scenario& scenario);

// --- generation, io, stats -------------------------------------------------------

struct BaseSpec {
  std::string id;
  std::string family;
  std::string instruction;
  EntityId requester;
  GoldSpec gold;
  // Categories of the six variants, in order.
  std::vector<Category> plan;
};

std::vector<BaseSpec> default_bases();
std::vector<TaskEntry> generate(const std::vector<BaseSpec>& bases, const memory::Scenario& scenario);

nlohmann::json to_json(const std::vector<TaskEntry>& entries, std::string_view scenario_name);
std::vector<TaskEntry> from_json(const nlohmann::json& doc, const memory::Scenario& scenario);
// An empty file yields no entries; strict mode rejects that.
std::vector<TaskEntry> load(const std::filesystem::path& path, const memory::Scenario& scenario, bool strict = false);
void save(const std::filesystem::path& path, const std::vector<TaskEntry>& entries, std::string_view scenario_name);

struct DatasetStats {
  std::map<Category, int> counts;
  int total = 0;
  int bases = 0;

  // Whole percent of the total, 0 for an empty dataset.
  int percent(Category c) const;
};

DatasetStats stats(const std::vector<TaskEntry>& entries);
std::string render_stats(const DatasetStats& stats);

}  // namespace deskmate::dataset
