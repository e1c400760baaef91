#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace nfgnn {

struct LabelTriple {
  int binary = 0;
  int category = 0;
  std::optional<int> family;

  friend bool operator==(const LabelTriple&, const LabelTriple&) = default;
};

enum class LabelLevel { Binary, Category, Family };

LabelLevel parse_label_level(const std::string& s);
std::string to_string(LabelLevel level);
/// Class index at the given level, or -1 when the label is absent.
int label_at(const LabelTriple& labels, LabelLevel level);

struct FlowRecord {
  std::string src_ip;
  std::string dst_ip;
  std::vector<double> features;

  friend bool operator==(const FlowRecord&, const FlowRecord&) = default;
};

struct SampleFlows {
  std::string sample_id;
  std::vector<FlowRecord> flows;
  std::optional<LabelTriple> labels;

  friend bool operator==(const SampleFlows&, const SampleFlows&) = default;
};

/// Name <-> index table for one label level. Index order is the sorted name order.
struct ClassMap {
  std::vector<std::string> names;

  std::optional<int> index_of(const std::string& name) const;
  std::size_t size() const noexcept { return names.size(); }
  friend bool operator==(const ClassMap&, const ClassMap&) = default;
};

struct ClassMaps {
  ClassMap binary;
  ClassMap category;
  ClassMap family;
  friend bool operator==(const ClassMaps&, const ClassMaps&) = default;
};

struct FlowDataset {
  std::vector<SampleFlows> samples;
  std::vector<std::string> feature_names;
  ClassMaps class_maps;

  std::size_t dim() const noexcept { return feature_names.size(); }
  friend bool operator==(const FlowDataset&, const FlowDataset&) = default;
};

/// Which CSV columns play which role. Everything not named here is a feature.
struct ColumnSchema {
  std::string src_ip = "Src IP";
  std::string dst_ip = "Dst IP";
  std::string src_port = "Src Port";
  std::string dst_port = "Dst Port";
  std::string flow_id = "Flow ID";
  std::string timestamp = "Timestamp";
  std::vector<std::string> label_columns = {"Label"};
  std::vector<std::string> ignore_columns;

  /// Columns that must never reach the model as features.
  std::vector<std::string> metadata_columns() const;
  /// Columns skipped by the CSV parser (non-numeric by nature).
  std::vector<std::string> non_feature_columns() const;
};

struct ParseOptions {
  bool strict = true;  // lenient mode maps NaN/Inf/empty cells to 0.0 with a warning
};

/// RFC-4180 reader: quoted fields, doubled quotes, CRLF or LF line endings.
std::vector<std::vector<std::string>> read_csv(std::istream& in);
std::vector<std::vector<std::string>> read_csv_file(const std::filesystem::path& path);
std::string csv_escape(const std::string& field);

SampleFlows parse_flow_file(const std::filesystem::path& path, const ColumnSchema& schema,
                            const ParseOptions& opts = {});
SampleFlows parse_flow_csv(std::istream& in, const std::string& sample_id, const ColumnSchema& schema,
                           const ParseOptions& opts, std::vector<std::string>* feature_names = nullptr);

/// Removes feature columns whose names carry a metadata role.
FlowDataset drop_metadata_columns(FlowDataset dataset, const std::vector<std::string>& metadata_names);

struct Manifest {
  struct Entry {
    std::string id;
    std::string file;
    std::optional<std::string> binary;
    std::optional<std::string> category;
    std::optional<std::string> family;
  };
  std::vector<Entry> samples;
  ColumnSchema schema;
  ParseOptions parse;
  int min_family_count = 9;
  // Declared class sets; when empty the observed labels define the set.
  std::vector<std::string> binary_classes;
  std::vector<std::string> category_classes;
  std::vector<std::string> family_classes;
};

Manifest read_manifest(const std::filesystem::path& path);
FlowDataset load_dataset(const std::filesystem::path& manifest_path);
FlowDataset load_dataset(const Manifest& manifest, const std::filesystem::path& base_dir);

/// Writes one CSV per sample plus manifest.json into dir. load_dataset on the
/// result reproduces the dataset with bit-exact feature values.
void write_dataset(const FlowDataset& dataset, const std::filesystem::path& dir);

/// Sample indices whose family label occurs at least min_count times.
std::vector<std::size_t> frequent_family_samples(const FlowDataset& dataset, int min_count);

}  // namespace nfgnn
