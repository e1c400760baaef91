#include "nfgnn/flow_ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "nfgnn/errors.hpp"
#include "nfgnn/json_io.hpp"
#include "nfgnn/log.hpp"

namespace nfgnn {

LabelLevel parse_label_level(const std::string& s) {
  if (s == "binary") return LabelLevel::Binary;
  if (s == "category") return LabelLevel::Category;
  if (s == "family") return LabelLevel::Family;
  throw ConfigError("unknown label level: " + s);
}

std::string to_string(LabelLevel level) {
  switch (level) {
    case LabelLevel::Binary: return "binary";
    case LabelLevel::Category: return "category";
    case LabelLevel::Family: return "family";
  }
  return "?";
}

int label_at(const LabelTriple& labels, LabelLevel level) {
  switch (level) {
    case LabelLevel::Binary: return labels.binary;
    case LabelLevel::Category: return labels.category;
    case LabelLevel::Family: return labels.family.value_or(-1);
  }
  return -1;
}

std::optional<int> ClassMap::index_of(const std::string& name) const {
  auto it = std::lower_bound(names.begin(), names.end(), name);
  if (it == names.end() || *it != name) return std::nullopt;
  return static_cast<int>(it - names.begin());
}

std::vector<std::string> ColumnSchema::metadata_columns() const {
  return {flow_id, timestamp, src_ip, dst_ip, src_port, dst_port};
}

std::vector<std::string> ColumnSchema::non_feature_columns() const {
  std::vector<std::string> out = {src_ip, dst_ip, flow_id, timestamp};
  out.insert(out.end(), label_columns.begin(), label_columns.end());
  out.insert(out.end(), ignore_columns.begin(), ignore_columns.end());
  return out;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

enum class CellKind { Finite, NonFinite, Invalid };

CellKind parse_cell(std::string_view raw, double& out) {
  std::string s = trim(raw);
  if (s.empty()) return CellKind::NonFinite;
  std::string_view v = s;
  if (v.front() == '+') v.remove_prefix(1);
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    return CellKind::Invalid;
  }
  return std::isfinite(out) ? CellKind::Finite : CellKind::NonFinite;
}

}  // namespace

std::vector<std::vector<std::string>> read_csv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool row_has_content = false;
  char c;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
  };
  auto end_row = [&] {
    end_field();
    if (row_has_content || row.size() > 1 || !row.front().empty()) rows.push_back(std::move(row));
    row.clear();
    row_has_content = false;
  };
  while (in.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        row_has_content = true;
        break;
      case ',':
        end_field();
        row_has_content = true;
        break;
      case '\r':
        if (in.peek() == '\n') in.get(c);
        end_row();
        break;
      case '\n':
        end_row();
        break;
      default:
        field += c;
    }
  }
  if (in_quotes) throw Error("unterminated quoted CSV field");
  if (!field.empty() || !row.empty()) end_row();
  return rows;
}

std::vector<std::vector<std::string>> read_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open CSV file: " + path.string());
  return read_csv(in);
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

SampleFlows parse_flow_csv(std::istream& in, const std::string& sample_id, const ColumnSchema& schema,
                           const ParseOptions& opts, std::vector<std::string>* feature_names) {
  auto rows = read_csv(in);
  if (rows.empty()) throw MissingColumn(fmt::format("sample '{}': no header row", sample_id));
  std::vector<std::string> header;
  for (const auto& h : rows.front()) header.push_back(trim(h));

  auto find = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw MissingColumn(fmt::format("sample '{}': column '{}' not found", sample_id, name));
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t src_col = find(schema.src_ip);
  const std::size_t dst_col = find(schema.dst_ip);

  const auto skip = schema.non_feature_columns();
  std::vector<std::size_t> feature_cols;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (std::find(skip.begin(), skip.end(), header[c]) != skip.end()) continue;
    feature_cols.push_back(c);
    names.push_back(header[c]);
  }

  SampleFlows sample;
  sample.sample_id = sample_id;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) {
      throw Error(fmt::format("sample '{}': row {} has {} fields, header has {}", sample_id, r,
                              row.size(), header.size()));
    }
    FlowRecord rec;
    rec.src_ip = trim(row[src_col]);
    rec.dst_ip = trim(row[dst_col]);
    if (rec.src_ip.empty() || rec.dst_ip.empty()) {
      throw Error(fmt::format("sample '{}': row {} has an empty endpoint", sample_id, r));
    }
    rec.features.reserve(feature_cols.size());
    for (std::size_t k = 0; k < feature_cols.size(); ++k) {
      double v = 0.0;
      switch (parse_cell(row[feature_cols[k]], v)) {
        case CellKind::Finite:
          break;
        case CellKind::NonFinite:
          if (opts.strict) {
            throw NonNumericFeature(fmt::format("sample '{}': row {} column '{}' value '{}' is not finite",
                                                sample_id, r, names[k], row[feature_cols[k]]));
          }
          logger().warn("sample '{}': row {} column '{}' value '{}' replaced by 0", sample_id, r,
                        names[k], row[feature_cols[k]]);
          v = 0.0;
          break;
        case CellKind::Invalid:
          throw NonNumericFeature(fmt::format("sample '{}': row {} column '{}' value '{}' is not numeric",
                                              sample_id, r, names[k], row[feature_cols[k]]));
      }
      rec.features.push_back(v);
    }
    sample.flows.push_back(std::move(rec));
  }
  if (sample.flows.empty()) throw EmptySample(fmt::format("sample '{}' has no flows", sample_id));
  if (feature_names) *feature_names = std::move(names);
  return sample;
}

SampleFlows parse_flow_file(const std::filesystem::path& path, const ColumnSchema& schema,
                            const ParseOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open flow file: " + path.string());
  return parse_flow_csv(in, path.stem().string(), schema, opts);
}

FlowDataset drop_metadata_columns(FlowDataset dataset, const std::vector<std::string>& metadata_names) {
  std::vector<std::size_t> keep;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < dataset.feature_names.size(); ++c) {
    const auto& n = dataset.feature_names[c];
    if (std::find(metadata_names.begin(), metadata_names.end(), n) != metadata_names.end()) continue;
    keep.push_back(c);
    names.push_back(n);
  }
  if (keep.size() == dataset.feature_names.size()) return dataset;
  for (auto& s : dataset.samples) {
    for (auto& f : s.flows) {
      std::vector<double> kept;
      kept.reserve(keep.size());
      for (auto c : keep) kept.push_back(f.features[c]);
      f.features = std::move(kept);
    }
  }
  dataset.feature_names = std::move(names);
  return dataset;
}

namespace {

std::optional<std::string> label_string(const json& labels, const char* key) {
  if (!labels.contains(key) || labels[key].is_null()) return std::nullopt;
  const auto& v = labels[key];
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw ConfigError(fmt::format("label '{}' must be a string or integer", key));
}

std::vector<std::string> string_list(const json& j, const char* key) {
  if (!j.contains(key)) return {};
  return j.at(key).get<std::vector<std::string>>();
}

ClassMap build_class_map(const std::vector<std::string>& declared,
                         const std::vector<std::optional<std::string>>& observed, const char* level) {
  std::set<std::string> names(declared.begin(), declared.end());
  if (declared.empty()) {
    for (const auto& o : observed) {
      if (o) names.insert(*o);
    }
  } else {
    for (const auto& o : observed) {
      if (o && !names.contains(*o)) {
        throw UnknownLabel(fmt::format("{} label '{}' is not in the declared class set", level, *o));
      }
    }
  }
  return ClassMap{std::vector<std::string>(names.begin(), names.end())};
}

}  // namespace

Manifest read_manifest(const std::filesystem::path& path) {
  const json j = read_json_file(path);
  Manifest m;
  try {
    if (j.contains("schema")) {
      const auto& s = j["schema"];
      auto str = [&](const char* k, std::string& dst) {
        if (s.contains(k)) dst = s[k].get<std::string>();
      };
      str("src_ip", m.schema.src_ip);
      str("dst_ip", m.schema.dst_ip);
      str("src_port", m.schema.src_port);
      str("dst_port", m.schema.dst_port);
      str("flow_id", m.schema.flow_id);
      str("timestamp", m.schema.timestamp);
      if (s.contains("labels")) m.schema.label_columns = string_list(s, "labels");
      if (s.contains("ignore")) m.schema.ignore_columns = string_list(s, "ignore");
    }
    m.parse.strict = j.value("strict", true);
    m.min_family_count = j.value("min_family_count", 9);
    if (j.contains("classes")) {
      const auto& c = j["classes"];
      m.binary_classes = string_list(c, "binary");
      m.category_classes = string_list(c, "category");
      m.family_classes = string_list(c, "family");
    }
    for (const auto& s : j.at("samples")) {
      Manifest::Entry e;
      e.id = s.at("id").get<std::string>();
      e.file = s.at("file").get<std::string>();
      if (s.contains("labels")) {
        e.binary = label_string(s["labels"], "binary");
        e.category = label_string(s["labels"], "category");
        e.family = label_string(s["labels"], "family");
      }
      m.samples.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw ConfigError("malformed manifest " + path.string() + ": " + e.what());
  }
  return m;
}

FlowDataset load_dataset(const std::filesystem::path& manifest_path) {
  return load_dataset(read_manifest(manifest_path), manifest_path.parent_path());
}

FlowDataset load_dataset(const Manifest& manifest, const std::filesystem::path& base_dir) {
  FlowDataset ds;
  std::vector<std::optional<std::string>> bin, cat, fam;
  bool first = true;
  for (const auto& e : manifest.samples) {
    std::ifstream in(base_dir / e.file, std::ios::binary);
    if (!in) throw ConfigError("cannot open flow file: " + (base_dir / e.file).string());
    std::vector<std::string> names;
    SampleFlows s = parse_flow_csv(in, e.id, manifest.schema, manifest.parse, &names);
    if (first) {
      ds.feature_names = names;
      first = false;
    } else if (names.size() != ds.feature_names.size()) {
      throw InconsistentDimension(fmt::format("sample '{}' has {} features, expected {}", e.id,
                                              names.size(), ds.feature_names.size()));
    } else if (names != ds.feature_names) {
      throw InconsistentDimension(fmt::format("sample '{}' feature columns differ from the first sample", e.id));
    }
    ds.samples.push_back(std::move(s));
    bin.push_back(e.binary);
    cat.push_back(e.category);
    fam.push_back(e.family);
  }
  // A missing category label falls back to the binary label name.
  for (std::size_t i = 0; i < cat.size(); ++i) {
    if (!cat[i]) cat[i] = bin[i];
  }
  ds.class_maps.binary = build_class_map(manifest.binary_classes, bin, "binary");
  ds.class_maps.category = build_class_map(manifest.category_classes, cat, "category");
  ds.class_maps.family = build_class_map(manifest.family_classes, fam, "family");
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    if (!bin[i]) continue;
    LabelTriple t;
    t.binary = *ds.class_maps.binary.index_of(*bin[i]);
    t.category = *ds.class_maps.category.index_of(*cat[i]);
    if (fam[i]) t.family = *ds.class_maps.family.index_of(*fam[i]);
    ds.samples[i].labels = t;
  }
  return drop_metadata_columns(std::move(ds), manifest.schema.metadata_columns());
}

void write_dataset(const FlowDataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "flows");
  json manifest;
  manifest["schema"] = {{"src_ip", "Src IP"}, {"dst_ip", "Dst IP"}, {"labels", json::array()}};
  manifest["strict"] = true;
  manifest["min_family_count"] = 9;
  manifest["classes"] = {{"binary", dataset.class_maps.binary.names},
                         {"category", dataset.class_maps.category.names},
                         {"family", dataset.class_maps.family.names}};
  json samples = json::array();
  for (const auto& s : dataset.samples) {
    std::string csv = "Src IP,Dst IP";
    for (const auto& n : dataset.feature_names) csv += "," + csv_escape(n);
    csv += "\n";
    for (const auto& f : s.flows) {
      csv += csv_escape(f.src_ip) + "," + csv_escape(f.dst_ip);
      for (double v : f.features) csv += "," + format_real(v);
      csv += "\n";
    }
    const std::string file = "flows/" + s.sample_id + ".csv";
    write_text_file(dir / file, csv);
    json entry = {{"id", s.sample_id}, {"file", file}};
    if (s.labels) {
      json labels;
      labels["binary"] = dataset.class_maps.binary.names.at(static_cast<std::size_t>(s.labels->binary));
      labels["category"] = dataset.class_maps.category.names.at(static_cast<std::size_t>(s.labels->category));
      if (s.labels->family) {
        labels["family"] = dataset.class_maps.family.names.at(static_cast<std::size_t>(*s.labels->family));
      }
      entry["labels"] = labels;
    }
    samples.push_back(entry);
  }
  manifest["samples"] = samples;
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

std::vector<std::size_t> frequent_family_samples(const FlowDataset& dataset, int min_count) {
  std::map<int, int> counts;
  for (const auto& s : dataset.samples) {
    if (s.labels && s.labels->family) ++counts[*s.labels->family];
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const auto& l = dataset.samples[i].labels;
    if (l && l->family && counts[*l->family] >= min_count) out.push_back(i);
  }
  return out;
}

}  // namespace nfgnn
