// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#include "spac/ply.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <unordered_map>

#include "spac/error.hpp"

namespace spac {

namespace {

enum class ScalarType { kInt8, kUInt8, kInt16, kUInt16, kInt32, kUInt32, kFloat32, kFloat64 };

std::optional<ScalarType>
parse_scalar_type(const std::string& name)
{
  static const std::map<std::string, ScalarType> kTypes = {
    {"char", ScalarType::kInt8},     {"int8", ScalarType::kInt8},
    {"uchar", ScalarType::kUInt8},   {"uint8", ScalarType::kUInt8},
    {"short", ScalarType::kInt16},   {"int16", ScalarType::kInt16},
    {"ushort", ScalarType::kUInt16}, {"uint16", ScalarType::kUInt16},
    {"int", ScalarType::kInt32},     {"int32", ScalarType::kInt32},
    {"uint", ScalarType::kUInt32},   {"uint32", ScalarType::kUInt32},
    {"float", ScalarType::kFloat32}, {"float32", ScalarType::kFloat32},
    {"double", ScalarType::kFloat64}, {"float64", ScalarType::kFloat64},
  };
  auto it = kTypes.find(name);
  if (it == kTypes.end())
    return std::nullopt;
  return it->second;
}

std::size_t
scalar_size(ScalarType t)
{
  switch (t) {
  case ScalarType::kInt8:
  case ScalarType::kUInt8: return 1;
  case ScalarType::kInt16:
  case ScalarType::kUInt16: return 2;
  case ScalarType::kInt32:
  case ScalarType::kUInt32:
  case ScalarType::kFloat32: return 4;
  case ScalarType::kFloat64: return 8;
  }
  return 0;
}

struct Property {
  std::string name;
  ScalarType type;
  bool is_list = false;
  ScalarType count_type = ScalarType::kUInt8;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> props;
};

struct Header {
  bool binary = false;
  int bitdepth_hint = 0;  // from a "comment bitdepth N" line
  std::vector<Element> elements;
  std::size_t body_offset = 0;
};

Header
parse_header(const std::string& bytes)
{
  Header hdr;
  std::size_t pos = 0;
  auto next_line = [&]() -> std::optional<std::string> {
    if (pos >= bytes.size())
      return std::nullopt;
    std::size_t end = bytes.find('\n', pos);
    if (end == std::string::npos)
      return std::nullopt;
    std::string line = bytes.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    return line;
  };

  auto first = next_line();
  if (!first || *first != "ply")
    fail(ErrorCode::kMalformedHeader, "missing 'ply' magic");

  bool have_format = false;
  for (;;) {
    auto line = next_line();
    if (!line)
      fail(ErrorCode::kMalformedHeader, "header not terminated by end_header");
    std::istringstream ls(*line);
    std::string kw;
    ls >> kw;
    if (kw == "comment") {
      std::string key;
      int value = 0;
      if ((ls >> key >> value) && key == "bitdepth")
        hdr.bitdepth_hint = value;
      continue;
    }
    if (kw.empty() || kw == "obj_info")
      continue;
    if (kw == "end_header")
      break;
    if (kw == "format") {
      std::string fmt, version;
      ls >> fmt >> version;
      if (fmt == "ascii")
        hdr.binary = false;
      else if (fmt == "binary_little_endian")
        hdr.binary = true;
      else
        fail(ErrorCode::kMalformedHeader, "unsupported format '" + fmt + "'");
      have_format = true;
    } else if (kw == "element") {
      Element el;
      long long count = -1;
      ls >> el.name >> count;
      if (el.name.empty() || count < 0 || ls.fail())
        fail(ErrorCode::kMalformedHeader, "bad element line: " + *line);
      el.count = std::size_t(count);
      hdr.elements.push_back(el);
    } else if (kw == "property") {
      if (hdr.elements.empty())
        fail(ErrorCode::kMalformedHeader, "property before any element");
      std::string type;
      ls >> type;
      Property prop;
      if (type == "list") {
        std::string count_type, item_type;
        ls >> count_type >> item_type >> prop.name;
        auto ct = parse_scalar_type(count_type);
        auto it = parse_scalar_type(item_type);
        if (!ct || !it)
          fail(ErrorCode::kMalformedHeader, "bad list property: " + *line);
        prop.is_list = true;
        prop.count_type = *ct;
        prop.type = *it;
      } else {
        auto t = parse_scalar_type(type);
        if (!t)
          fail(ErrorCode::kMalformedHeader, "unknown property type '" + type + "'");
        prop.type = *t;
        ls >> prop.name;
      }
      if (prop.name.empty())
        fail(ErrorCode::kMalformedHeader, "property without name");
      hdr.elements.back().props.push_back(prop);
    } else {
      fail(ErrorCode::kMalformedHeader, "unexpected header keyword '" + kw + "'");
    }
  }
  if (!have_format)
    fail(ErrorCode::kMalformedHeader, "missing format line");
  hdr.body_offset = pos;
  return hdr;
}

double
read_binary_scalar(const std::string& bytes, std::size_t* pos, ScalarType t)
{
  const std::size_t n = scalar_size(t);
  if (*pos + n > bytes.size())
    fail(ErrorCode::kMalformedHeader, "binary body shorter than header declares");
  unsigned char buf[8];
  std::memcpy(buf, bytes.data() + *pos, n);
  *pos += n;
  // Little-endian decode independent of host order.
  uint64_t u = 0;
  for (std::size_t i = 0; i < n; ++i)
    u |= uint64_t(buf[i]) << (8 * i);
  switch (t) {
  case ScalarType::kInt8: return double(int8_t(uint8_t(u)));
  case ScalarType::kUInt8: return double(uint8_t(u));
  case ScalarType::kInt16: return double(int16_t(uint16_t(u)));
  case ScalarType::kUInt16: return double(uint16_t(u));
  case ScalarType::kInt32: return double(int32_t(uint32_t(u)));
  case ScalarType::kUInt32: return double(uint32_t(u));
  case ScalarType::kFloat32: {
    uint32_t w = uint32_t(u);
    float f;
    std::memcpy(&f, &w, 4);
    return double(f);
  }
  case ScalarType::kFloat64: {
    double d;
    std::memcpy(&d, &u, 8);
    return d;
  }
  }
  return 0.0;
}

struct RawPoint {
  double xyz[3];
  double rgb[3];
};

PointCloud
assemble(std::vector<RawPoint>& raw, const PlyReadOptions& opts)
{
  std::vector<Vec3i> geom(raw.size());
  int64_t max_coord = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    for (int a = 0; a < 3; ++a) {
      const double v = raw[i].xyz[a];
      if (!std::isfinite(v))
        fail(ErrorCode::kOutOfRange, "non-finite coordinate");
      // nearbyint honours the default round-half-to-even mode.
      const double r = std::nearbyint(v);
      if (r < 0 || r >= double(int64_t(1) << kMaxBitdepth))
        fail(ErrorCode::kOutOfRange, "coordinate " + std::to_string(v) + " outside voxel range");
      geom[i][a] = int32_t(r);
      max_coord = std::max<int64_t>(max_coord, geom[i][a]);
    }
    for (int a = 0; a < 3; ++a) {
      const double c = raw[i].rgb[a];
      if (!(c >= 0.0 && c <= 255.0) || c != std::nearbyint(c))
        fail(ErrorCode::kOutOfRange, "color channel not an integer in [0, 255]");
    }
  }

  int bitdepth = opts.bitdepth;
  if (bitdepth == 0) {
    bitdepth = kMinBitdepth;
    while (bitdepth < kMaxBitdepth && max_coord >= (int64_t(1) << bitdepth))
      ++bitdepth;
  }
  if (bitdepth < kMinBitdepth || bitdepth > kMaxBitdepth)
    fail(ErrorCode::kInvalidArgument, "bitdepth must be in [8, 14]");
  if (max_coord >= (int64_t(1) << bitdepth))
    fail(ErrorCode::kOutOfRange, "coordinate exceeds " + std::to_string(bitdepth) + "-bit range");

  PointCloud pc;
  pc.bitdepth = bitdepth;
  pc.colorspace = ColorSpace::kRGB8;
  pc.reserve(raw.size());

  std::unordered_map<uint64_t, std::size_t> slot;
  std::vector<std::array<double, 3>> sums;
  std::vector<double> counts;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const Vec3i& g = geom[i];
    const uint64_t key = (uint64_t(g[0]) << 42) | (uint64_t(g[1]) << 21) | uint64_t(g[2]);
    auto [it, inserted] = slot.emplace(key, pc.size());
    if (inserted) {
      pc.push_back(g, {raw[i].rgb[0], raw[i].rgb[1], raw[i].rgb[2]});
      sums.push_back({raw[i].rgb[0], raw[i].rgb[1], raw[i].rgb[2]});
      counts.push_back(1.0);
      continue;
    }
    if (opts.duplicates == DuplicatePolicy::kReject)
      fail(ErrorCode::kDuplicatePoint, "duplicate coordinate at vertex " + std::to_string(i));
    for (int a = 0; a < 3; ++a)
      sums[it->second][a] += raw[i].rgb[a];
    counts[it->second] += 1.0;
  }
  if (opts.duplicates == DuplicatePolicy::kMergeMean) {
    for (std::size_t i = 0; i < pc.size(); ++i) {
      for (int a = 0; a < 3; ++a)
        pc.colors[i][a] = std::nearbyint(sums[i][a] / counts[i]);
    }
  }
  return pc;
}

}  // namespace

PointCloud
parse_ply(const std::string& bytes, const PlyReadOptions& opts)
{
  const Header hdr = parse_header(bytes);

  const Element* vertex = nullptr;
  for (const auto& el : hdr.elements) {
    if (el.name == "vertex") {
      vertex = &el;
      break;
    }
  }
  if (!vertex)
    fail(ErrorCode::kMissingAttribute, "no vertex element");

  static const char* kNames[6] = {"x", "y", "z", "red", "green", "blue"};
  int slots[6];
  for (int s = 0; s < 6; ++s) {
    slots[s] = -1;
    for (std::size_t p = 0; p < vertex->props.size(); ++p) {
      if (vertex->props[p].name == kNames[s] && !vertex->props[p].is_list)
        slots[s] = int(p);
    }
    if (slots[s] < 0)
      fail(ErrorCode::kMissingAttribute, std::string("vertex property '") + kNames[s] + "' missing");
  }

  std::vector<RawPoint> raw(vertex->count);
  std::vector<double> values;

  if (hdr.binary) {
    std::size_t pos = hdr.body_offset;
    for (const auto& el : hdr.elements) {
      const bool is_vertex = &el == vertex;
      for (std::size_t i = 0; i < el.count; ++i) {
        values.assign(el.props.size(), 0.0);
        for (std::size_t p = 0; p < el.props.size(); ++p) {
          const Property& prop = el.props[p];
          if (prop.is_list) {
            const double n = read_binary_scalar(bytes, &pos, prop.count_type);
            if (n < 0)
              fail(ErrorCode::kMalformedHeader, "negative list length");
            for (std::size_t j = 0; j < std::size_t(n); ++j)
              read_binary_scalar(bytes, &pos, prop.type);
          } else {
            values[p] = read_binary_scalar(bytes, &pos, prop.type);
          }
        }
        if (is_vertex) {
          for (int s = 0; s < 3; ++s) {
            raw[i].xyz[s] = values[slots[s]];
            raw[i].rgb[s] = values[slots[s + 3]];
          }
        }
      }
      if (is_vertex)
        break;
    }
  } else {
    std::istringstream body(bytes.substr(hdr.body_offset));
    for (const auto& el : hdr.elements) {
      const bool is_vertex = &el == vertex;
      for (std::size_t i = 0; i < el.count; ++i) {
        std::string line;
        do {
          if (!std::getline(body, line))
            fail(ErrorCode::kMalformedHeader, "ASCII body shorter than header declares");
        } while (line.find_first_not_of(" \t\r") == std::string::npos);
        if (!is_vertex)
          continue;
        std::istringstream ls(line);
        values.assign(el.props.size(), 0.0);
        for (std::size_t p = 0; p < el.props.size(); ++p) {
          if (el.props[p].is_list) {
            double n = 0;
            ls >> n;
            for (std::size_t j = 0; j < std::size_t(n); ++j) {
              double skip;
              ls >> skip;
            }
          } else {
            ls >> values[p];
          }
          if (ls.fail())
            fail(ErrorCode::kMalformedHeader, "bad vertex line " + std::to_string(i));
        }
        for (int s = 0; s < 3; ++s) {
          raw[i].xyz[s] = values[slots[s]];
          raw[i].rgb[s] = values[slots[s + 3]];
        }
      }
      if (is_vertex)
        break;
    }
  }

  PlyReadOptions effective = opts;
  if (effective.bitdepth == 0 && hdr.bitdepth_hint >= kMinBitdepth
      && hdr.bitdepth_hint <= kMaxBitdepth)
    effective.bitdepth = hdr.bitdepth_hint;
  return assemble(raw, effective);
}

PointCloud
load_ply(const std::string& path, const PlyReadOptions& opts)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    fail(ErrorCode::kIoError, "cannot open '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_ply(bytes, opts);
}

std::string
serialize_ply(const PointCloud& pc, PlyFormat format)
{
  if (pc.colorspace != ColorSpace::kRGB8)
    fail(ErrorCode::kWrongColorSpace, "save_ply: convert to RGB8 first");
  pc.validate();

  std::ostringstream out;
  out << "ply\n"
      << "format " << (format == PlyFormat::kAscii ? "ascii" : "binary_little_endian")
      << " 1.0\n"
      << "comment bitdepth " << pc.bitdepth << "\n"
      << "element vertex " << pc.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "end_header\n";

  if (format == PlyFormat::kAscii) {
    for (std::size_t i = 0; i < pc.size(); ++i) {
      const auto& g = pc.geometry[i];
      const auto& c = pc.colors[i];
      out << g[0] << ' ' << g[1] << ' ' << g[2] << ' ' << int(c[0]) << ' ' << int(c[1]) << ' '
          << int(c[2]) << '\n';
    }
    return out.str();
  }

  std::string body;
  body.reserve(pc.size() * 15);
  for (std::size_t i = 0; i < pc.size(); ++i) {
    for (int a = 0; a < 3; ++a) {
      const float f = float(pc.geometry[i][a]);
      uint32_t w;
      std::memcpy(&w, &f, 4);
      for (int b = 0; b < 4; ++b)
        body.push_back(char((w >> (8 * b)) & 0xff));
    }
    for (int a = 0; a < 3; ++a)
      body.push_back(char(uint8_t(pc.colors[i][a])));
  }
  return out.str() + body;
}

void
save_ply(const PointCloud& pc, const std::string& path, PlyFormat format)
{
  const std::string bytes = serialize_ply(pc, format);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    fail(ErrorCode::kIoError, "cannot write '" + path + "'");
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out)
    fail(ErrorCode::kIoError, "write failed for '" + path + "'");
}

}  // namespace spac
