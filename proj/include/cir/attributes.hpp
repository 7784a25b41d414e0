#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cir/util.hpp"

namespace cir {

// group -> values. Empty groups are never stored.
using AttributeSet = std::map<std::string, std::set<std::string>>;

// Lowercased, whitespace-trimmed label.
std::string normalize_label(const std::string& s);

// Deterministic key: "group=v1,v2;group2=v3".
std::string canonical_key(const AttributeSet& attrs);

struct AttributeSchema {
  std::map<std::string, std::vector<std::string>> groups;

  bool allows(const std::string& group, const std::string& value) const;
};

AttributeSchema load_schema(const fs::path& path);
void save_schema(const AttributeSchema& schema, const fs::path& path);

class AttributeCatalog {
 public:
  AttributeCatalog() = default;
  explicit AttributeCatalog(std::optional<AttributeSchema> schema)
      : schema_(std::move(schema)) {}

  // Labels are normalized; with a schema, unknown groups or values are a data
  // error. Duplicate ids are a data error.
  void add(const std::string& image_id, const AttributeSet& attrs);

  const std::map<std::string, AttributeSet>& items() const { return items_; }
  const AttributeSet& attributes(const std::string& image_id) const;
  bool contains(const std::string& image_id) const {
    return items_.contains(image_id);
  }
  std::size_t size() const { return items_.size(); }
  const std::optional<AttributeSchema>& schema() const { return schema_; }

 private:
  std::optional<AttributeSchema> schema_;
  std::map<std::string, AttributeSet> items_;
};

// JSON lines {"image_id": str, "attributes": {group: [values...]}}.
AttributeCatalog load_catalog(const fs::path& path,
                              std::optional<AttributeSchema> schema = std::nullopt);
void save_catalog(const AttributeCatalog& catalog, const fs::path& path);

Json attributes_to_json(const AttributeSet& attrs);
AttributeSet attributes_from_json(const Json& j);

enum class ChangeKind { kSwap, kAdd, kRemove };

// One-label edit of an attribute set: swap(group: from -> to), add(group: to),
// remove(group: from).
struct Change {
  ChangeKind kind = ChangeKind::kSwap;
  std::string group;
  std::string from;
  std::string to;

  static Change swap(std::string group, std::string from, std::string to);
  static Change add(std::string group, std::string to);
  static Change remove(std::string group, std::string from);

  bool operator==(const Change&) const = default;
};

Json change_to_json(const Change& c);
Change change_from_json(const Json& j);
std::string to_string(const Change& c);

// Throws a data error when the change does not apply (value to remove is
// absent, or value to add is already present).
AttributeSet apply_change(const AttributeSet& attrs, const Change& change);

// Labels as (group, value) pairs in a and not b, or b and not a.
std::set<std::pair<std::string, std::string>> symmetric_difference(
    const AttributeSet& a, const AttributeSet& b);

enum class PairMode {
  kSwap,    // one value replaced by another within one group
  kToggle,  // one label added or removed
};

PairMode parse_pair_mode(const std::string& s);

// Inverted index from canonical attribute-set key to image ids, plus the
// observed value vocabulary per group.
class AttributeIndex {
 public:
  static AttributeIndex build(const AttributeCatalog& catalog);

  const std::vector<std::string>& item_ids() const { return item_ids_; }
  const AttributeSet& attributes(const std::string& image_id) const;
  const std::string& key_of(const std::string& image_id) const;
  // Empty when nothing carries that key. Ids are sorted.
  const std::vector<std::string>& ids_for_key(const std::string& key) const;
  std::size_t key_count() const { return by_key_.size(); }
  const std::map<std::string, std::vector<std::string>>& group_values() const {
    return group_values_;
  }

  // Every one-label edit of attrs whose values come from the observed
  // vocabulary, in a fixed order.
  std::vector<Change> applicable_changes(const AttributeSet& attrs,
                                         PairMode mode) const;

 private:
  std::vector<std::string> item_ids_;
  std::map<std::string, AttributeSet> attrs_;
  std::map<std::string, std::string> key_of_;
  std::map<std::string, std::vector<std::string>> by_key_;
  std::map<std::string, std::vector<std::string>> group_values_;
};

}  // namespace cir
