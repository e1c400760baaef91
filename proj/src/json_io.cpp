#include "nfgnn/json_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "nfgnn/errors.hpp"

namespace nfgnn {

std::string format_real(double v) {
  if (!std::isfinite(v)) throw NumericalError("cannot serialize non-finite real");
  if (v == 0.0 && std::signbit(v)) return "-0.0";  // "-0" would read back as integer 0
  return fmt::format("{:.17g}", v);
}

namespace {

void dump_to(const json& j, std::string& out) {
  switch (j.type()) {
    case json::value_t::object: {
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ',';
        first = false;
        out += json(it.key()).dump();
        out += ':';
        dump_to(it.value(), out);
      }
      out += '}';
      break;
    }
    case json::value_t::array: {
      out += '[';
      bool first = true;
      for (const auto& v : j) {
        if (!first) out += ',';
        first = false;
        dump_to(v, out);
      }
      out += ']';
      break;
    }
    case json::value_t::number_float:
      out += format_real(j.get<double>());
      break;
    default:
      out += j.dump();
  }
}

}  // namespace

std::string dump_json(const json& j) {
  std::string out;
  dump_to(j, out);
  return out;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open JSON file: " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file: " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace nfgnn
