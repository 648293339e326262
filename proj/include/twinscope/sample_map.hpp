#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace twinscope {

/// Region-labeled transmittance map. Textual format:
///
///   line 1:            "<width> <height>"
///   next height lines: one single-character region label per pixel
///   remaining lines:   "<label> t=<float>"  or
///                      "<label> layers=<int> t_mono=<float>"  (t = t_mono^layers)
struct SampleMap {
  int width = 0;
  int height = 0;
  double pixel_pitch_nm = 100.0;  // metadata only
  std::vector<char> labels;       // row-major
  std::map<char, double> legend;  // label -> transmittance

  char label_at(int x, int y) const {
    return labels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                  static_cast<std::size_t>(x)];
  }

  double transmittance_of(char label) const {
    auto it = legend.find(label);
    if (it == legend.end())
      throw std::invalid_argument(std::string("unknown region label '") + label + "'");
    return it->second;
  }

  /// Labels sorted by transmittance, highest first.
  std::vector<char> regions_by_transmittance() const {
    std::vector<char> out;
    for (auto& [label, t] : legend) out.push_back(label);
    std::sort(out.begin(), out.end(), [&](char a, char b) {
      const double ta = legend.at(a), tb = legend.at(b);
      return ta != tb ? ta > tb : a < b;
    });
    return out;
  }

  /// The reference region ("input" side): the highest-transmittance label.
  char reference_label() const {
    if (legend.empty()) throw std::logic_error("map has no legend");
    return regions_by_transmittance().front();
  }

  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
};

namespace detail {

[[noreturn]] inline void map_error(int line, const std::string& what) {
  throw std::runtime_error("sample map, line " + std::to_string(line) + ": " + what);
}

inline bool parse_kv(const std::string& token, const std::string& key,
                     std::string& value) {
  if (token.rfind(key + "=", 0) != 0) return false;
  value = token.substr(key.size() + 1);
  return true;
}

}  // namespace detail

inline SampleMap parse_sample_map(std::istream& in) {
  SampleMap map;
  std::string line;
  int line_no = 0;

  if (!std::getline(in, line)) detail::map_error(1, "missing header");
  ++line_no;
  {
    std::istringstream hdr(line);
    if (!(hdr >> map.width >> map.height) || map.width < 1 || map.height < 1)
      detail::map_error(line_no, "expected '<width> <height>' with positive values");
  }

  map.labels.reserve(map.pixel_count());
  for (int y = 0; y < map.height; ++y) {
    if (!std::getline(in, line))
      detail::map_error(line_no + 1, "unexpected end of file inside label grid");
    ++line_no;
    if (static_cast<int>(line.size()) != map.width)
      detail::map_error(line_no, "label row has " + std::to_string(line.size()) +
                                     " characters, expected " +
                                     std::to_string(map.width));
    for (char c : line) {
      if (!std::isgraph(static_cast<unsigned char>(c)))
        detail::map_error(line_no, "label must be a printable character");
      map.labels.push_back(c);
    }
  }

  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string label_tok;
    if (!(ls >> label_tok)) continue;  // blank line
    if (label_tok.size() != 1)
      detail::map_error(line_no, "legend label must be a single character");
    const char label = label_tok[0];
    if (map.legend.count(label))
      detail::map_error(line_no, std::string("duplicate legend label '") + label + "'");

    std::string tok, value;
    double t = -1.0;
    int layers = -1;
    double t_mono = -1.0;
    while (ls >> tok) {
      try {
        if (detail::parse_kv(tok, "t", value))
          t = std::stod(value);
        else if (detail::parse_kv(tok, "layers", value))
          layers = std::stoi(value);
        else if (detail::parse_kv(tok, "t_mono", value))
          t_mono = std::stod(value);
        else
          detail::map_error(line_no, "unknown legend field '" + tok + "'");
      } catch (const std::logic_error&) {
        detail::map_error(line_no, "bad numeric value in '" + tok + "'");
      }
    }
    if (t < 0.0 && (layers < 1 || t_mono < 0.0))
      detail::map_error(line_no, "legend needs t=<v> or layers=<n> t_mono=<v>");
    if (t >= 0.0 && (layers >= 0 || t_mono >= 0.0))
      detail::map_error(line_no, "give either t or layers/t_mono, not both");
    const double effective = t >= 0.0 ? t : std::pow(t_mono, layers);
    if (!(effective >= 0.0 && effective <= 1.0))
      detail::map_error(line_no, "transmittance outside [0, 1]");
    map.legend[label] = effective;
  }

  for (std::size_t i = 0; i < map.labels.size(); ++i)
    if (!map.legend.count(map.labels[i]))
      detail::map_error(0, std::string("grid label '") + map.labels[i] +
                               "' missing from legend");
  return map;
}

inline SampleMap load_sample_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open sample map: " + path);
  return parse_sample_map(in);
}

inline std::string format_sample_map(const SampleMap& map) {
  std::ostringstream out;
  out << map.width << " " << map.height << "\n";
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) out << map.label_at(x, y);
    out << "\n";
  }
  char buf[64];
  for (auto& [label, t] : map.legend) {
    std::snprintf(buf, sizeof buf, "%.17g", t);
    out << label << " t=" << buf << "\n";
  }
  return out.str();
}

/// Horizontal-band map: one region per band, band i spanning rows_per_band
/// rows with the given label and transmittance.
inline SampleMap make_band_map(int width, int rows_per_band,
                               const std::vector<std::pair<char, double>>& bands) {
  SampleMap map;
  map.width = width;
  map.height = rows_per_band * static_cast<int>(bands.size());
  map.labels.reserve(map.pixel_count());
  for (auto& [label, t] : bands) {
    map.legend[label] = t;
    for (int r = 0; r < rows_per_band; ++r)
      map.labels.insert(map.labels.end(), static_cast<std::size_t>(width), label);
  }
  return map;
}

}  // namespace twinscope
