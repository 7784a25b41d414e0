#include "cir/attributes.hpp"

#include <algorithm>
#include <cctype>

#include "cir/error.hpp"

namespace cir {

std::string normalize_label(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  std::string out = s.substr(first, last - first + 1);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string canonical_key(const AttributeSet& attrs) {
  std::string key;
  for (const auto& [group, values] : attrs) {
    if (values.empty()) continue;
    if (!key.empty()) key += ';';
    key += group;
    key += '=';
    bool first = true;
    for (const auto& v : values) {
      if (!first) key += ',';
      key += v;
      first = false;
    }
  }
  return key;
}

bool AttributeSchema::allows(const std::string& group,
                             const std::string& value) const {
  auto it = groups.find(group);
  if (it == groups.end()) return false;
  return std::find(it->second.begin(), it->second.end(), value) != it->second.end();
}

AttributeSchema load_schema(const fs::path& path) {
  const Json j = read_json_file(path);
  AttributeSchema schema;
  try {
    for (const auto& [name, values] : j.at("groups").items()) {
      auto& out = schema.groups[normalize_label(name)];
      for (const auto& v : values) out.push_back(normalize_label(v.get<std::string>()));
    }
  } catch (const Json::exception& e) {
    fail(ErrorKind::kFormat, path.string() + ": " + e.what());
  }
  return schema;
}

void save_schema(const AttributeSchema& schema, const fs::path& path) {
  Json groups = Json::object();
  for (const auto& [name, values] : schema.groups) groups[name] = values;
  write_json_file(path, Json{{"groups", groups}});
}

void AttributeCatalog::add(const std::string& image_id, const AttributeSet& attrs) {
  require(!image_id.empty(), ErrorKind::kData, "empty image id");
  require(!items_.contains(image_id), ErrorKind::kData,
          "duplicate image id '" + image_id + "'");
  AttributeSet clean;
  for (const auto& [group, values] : attrs) {
    const std::string g = normalize_label(group);
    for (const auto& v : values) {
      const std::string nv = normalize_label(v);
      if (nv.empty()) continue;
      if (schema_ && !schema_->allows(g, nv)) {
        fail(ErrorKind::kData, "image '" + image_id + "': label " + g + ":" + nv +
                                   " is not in the schema");
      }
      clean[g].insert(nv);
    }
  }
  items_.emplace(image_id, std::move(clean));
}

const AttributeSet& AttributeCatalog::attributes(const std::string& image_id) const {
  auto it = items_.find(image_id);
  if (it == items_.end()) fail(ErrorKind::kLookup, "unknown image id '" + image_id + "'");
  return it->second;
}

Json attributes_to_json(const AttributeSet& attrs) {
  Json j = Json::object();
  for (const auto& [group, values] : attrs) {
    j[group] = std::vector<std::string>(values.begin(), values.end());
  }
  return j;
}

AttributeSet attributes_from_json(const Json& j) {
  AttributeSet attrs;
  for (const auto& [group, values] : j.items()) {
    if (values.is_string()) {
      attrs[group].insert(values.get<std::string>());
    } else {
      for (const auto& v : values) attrs[group].insert(v.get<std::string>());
    }
  }
  return attrs;
}

AttributeCatalog load_catalog(const fs::path& path,
                              std::optional<AttributeSchema> schema) {
  AttributeCatalog catalog(std::move(schema));
  for (const auto& row : read_jsonl_file(path)) {
    try {
      catalog.add(row.at("image_id").get<std::string>(),
                  attributes_from_json(row.at("attributes")));
    } catch (const Json::exception& e) {
      fail(ErrorKind::kFormat, path.string() + ": " + e.what());
    }
  }
  return catalog;
}

void save_catalog(const AttributeCatalog& catalog, const fs::path& path) {
  std::vector<Json> rows;
  for (const auto& [id, attrs] : catalog.items()) {
    rows.push_back(Json{{"image_id", id}, {"attributes", attributes_to_json(attrs)}});
  }
  write_jsonl_file(path, rows);
}

Change Change::swap(std::string group, std::string from, std::string to) {
  return Change{ChangeKind::kSwap, std::move(group), std::move(from), std::move(to)};
}
Change Change::add(std::string group, std::string to) {
  return Change{ChangeKind::kAdd, std::move(group), "", std::move(to)};
}
Change Change::remove(std::string group, std::string from) {
  return Change{ChangeKind::kRemove, std::move(group), std::move(from), ""};
}

namespace {
const char* kind_name(ChangeKind k) {
  switch (k) {
    case ChangeKind::kSwap: return "swap";
    case ChangeKind::kAdd: return "add";
    case ChangeKind::kRemove: return "remove";
  }
  return "?";
}
}  // namespace

Json change_to_json(const Change& c) {
  Json j = {{"kind", kind_name(c.kind)}, {"group", c.group}};
  if (c.kind != ChangeKind::kAdd) j["from"] = c.from;
  if (c.kind != ChangeKind::kRemove) j["to"] = c.to;
  return j;
}

Change change_from_json(const Json& j) {
  try {
    const auto kind = j.at("kind").get<std::string>();
    const auto group = normalize_label(j.at("group").get<std::string>());
    if (kind == "swap") {
      return Change::swap(group, normalize_label(j.at("from").get<std::string>()),
                          normalize_label(j.at("to").get<std::string>()));
    }
    if (kind == "add") return Change::add(group, normalize_label(j.at("to").get<std::string>()));
    if (kind == "remove") {
      return Change::remove(group, normalize_label(j.at("from").get<std::string>()));
    }
    fail(ErrorKind::kFormat, "unknown change kind '" + kind + "'");
  } catch (const Json::exception& e) {
    fail(ErrorKind::kFormat, std::string("bad change descriptor: ") + e.what());
  }
}

std::string to_string(const Change& c) {
  switch (c.kind) {
    case ChangeKind::kSwap: return "swap(" + c.group + ": " + c.from + "->" + c.to + ")";
    case ChangeKind::kAdd: return "add(" + c.group + ": " + c.to + ")";
    case ChangeKind::kRemove: return "remove(" + c.group + ": " + c.from + ")";
  }
  return "?";
}

AttributeSet apply_change(const AttributeSet& attrs, const Change& change) {
  AttributeSet out = attrs;
  auto& values = out[change.group];
  if (change.kind != ChangeKind::kAdd) {
    if (!values.erase(change.from)) {
      fail(ErrorKind::kData, to_string(change) + " does not apply: '" + change.from +
                                 "' is absent");
    }
  }
  if (change.kind != ChangeKind::kRemove) {
    if (!values.insert(change.to).second) {
      fail(ErrorKind::kData, to_string(change) + " does not apply: '" + change.to +
                                 "' is already present");
    }
  }
  if (values.empty()) out.erase(change.group);
  return out;
}

std::set<std::pair<std::string, std::string>> symmetric_difference(
    const AttributeSet& a, const AttributeSet& b) {
  std::set<std::pair<std::string, std::string>> la, lb, out;
  for (const auto& [g, vs] : a)
    for (const auto& v : vs) la.emplace(g, v);
  for (const auto& [g, vs] : b)
    for (const auto& v : vs) lb.emplace(g, v);
  std::set_symmetric_difference(la.begin(), la.end(), lb.begin(), lb.end(),
                                std::inserter(out, out.end()));
  return out;
}

PairMode parse_pair_mode(const std::string& s) {
  if (s == "swap") return PairMode::kSwap;
  if (s == "toggle") return PairMode::kToggle;
  fail(ErrorKind::kConfig, "unknown pair mode '" + s + "' (swap|toggle)");
}

AttributeIndex AttributeIndex::build(const AttributeCatalog& catalog) {
  AttributeIndex index;
  std::map<std::string, std::set<std::string>> vocab;
  for (const auto& [id, attrs] : catalog.items()) {
    require(!attrs.empty(), ErrorKind::kData,
            "image '" + id + "' has no attribute labels");
    const std::string key = canonical_key(attrs);
    index.item_ids_.push_back(id);
    index.attrs_.emplace(id, attrs);
    index.key_of_.emplace(id, key);
    index.by_key_[key].push_back(id);
    for (const auto& [g, vs] : attrs) vocab[g].insert(vs.begin(), vs.end());
  }
  for (auto& [g, vs] : vocab) {
    index.group_values_[g] = std::vector<std::string>(vs.begin(), vs.end());
  }
  return index;
}

const AttributeSet& AttributeIndex::attributes(const std::string& image_id) const {
  auto it = attrs_.find(image_id);
  if (it == attrs_.end()) fail(ErrorKind::kLookup, "unknown image id '" + image_id + "'");
  return it->second;
}

const std::string& AttributeIndex::key_of(const std::string& image_id) const {
  auto it = key_of_.find(image_id);
  if (it == key_of_.end()) fail(ErrorKind::kLookup, "unknown image id '" + image_id + "'");
  return it->second;
}

const std::vector<std::string>& AttributeIndex::ids_for_key(const std::string& key) const {
  static const std::vector<std::string> kEmpty;
  auto it = by_key_.find(key);
  return it == by_key_.end() ? kEmpty : it->second;
}

std::vector<Change> AttributeIndex::applicable_changes(const AttributeSet& attrs,
                                                       PairMode mode) const {
  std::vector<Change> changes;
  if (mode == PairMode::kSwap) {
    for (const auto& [g, present] : attrs) {
      auto vocab = group_values_.find(g);
      if (vocab == group_values_.end()) continue;
      for (const auto& from : present) {
        for (const auto& to : vocab->second) {
          if (!present.contains(to)) changes.push_back(Change::swap(g, from, to));
        }
      }
    }
  } else {
    for (const auto& [g, present] : attrs) {
      for (const auto& from : present) changes.push_back(Change::remove(g, from));
    }
    for (const auto& [g, vocab] : group_values_) {
      auto it = attrs.find(g);
      for (const auto& to : vocab) {
        if (it == attrs.end() || !it->second.contains(to)) {
          changes.push_back(Change::add(g, to));
        }
      }
    }
  }
  return changes;
}

}  // namespace cir
