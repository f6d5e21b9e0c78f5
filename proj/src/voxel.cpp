// Copyright 2026 The shapefill Authors.
// SPDX-License-Identifier: Apache-2.0

#include "shapefill/voxel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>
#include <map>
#include <sstream>

#include <json.hpp>

#include "io_util.hpp"
#include "shapefill/cloud.hpp"

namespace shapefill {
namespace {

std::size_t checked_product(const Shape3& shape) {
  for (int s : shape) {
    if (s <= 0) throw ValidationError("volume shape must be positive on every axis");
  }
  return static_cast<std::size_t>(shape[0]) * static_cast<std::size_t>(shape[1]) *
         static_cast<std::size_t>(shape[2]);
}

void check_spacing(const Vec3& spacing) {
  for (int a = 0; a < 3; ++a) {
    if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a])) {
      throw ValidationError("voxel spacing must be finite and strictly positive");
    }
  }
}

}  // namespace

VoxelVolume::VoxelVolume(Shape3 shape, Vec3 spacing, Vec3 origin)
    : shape_(shape), spacing_(spacing), origin_(origin) {
  check_spacing(spacing_);
  data_.assign(checked_product(shape_), 0);
}

VoxelVolume::VoxelVolume(Shape3 shape, Vec3 spacing, Vec3 origin, std::vector<std::uint8_t> data)
    : shape_(shape), spacing_(spacing), origin_(origin), data_(std::move(data)) {
  check_spacing(spacing_);
  if (data_.size() != checked_product(shape_)) {
    throw ValidationError("shape/data-length mismatch: shape product " + std::to_string(checked_product(shape_)) +
                          ", payload " + std::to_string(data_.size()));
  }
  for (auto& b : data_) b = b != 0 ? 1 : 0;
}

Shape3 VoxelVolume::coords(std::size_t idx) const {
  const auto nx = static_cast<std::size_t>(shape_[0]);
  const auto ny = static_cast<std::size_t>(shape_[1]);
  return {static_cast<int>(idx % nx), static_cast<int>((idx / nx) % ny), static_cast<int>(idx / (nx * ny))};
}

Vec3 VoxelVolume::world_center(int x, int y, int z) const {
  return {origin_[0] + x * spacing_[0], origin_[1] + y * spacing_[1], origin_[2] + z * spacing_[2]};
}

std::size_t VoxelVolume::count() const {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

bool VoxelVolume::same_grid(const VoxelVolume& other) const {
  return shape_ == other.shape_ && spacing_ == other.spacing_ && origin_ == other.origin_;
}

namespace voxel {
namespace {

using nlohmann::json;

std::filesystem::path with_ext(std::filesystem::path p, const char* ext) {
  p.replace_extension(ext);
  return p;
}

VoxelVolume load_sidecar(const std::filesystem::path& path) {
  const auto json_path = with_ext(path, ".json");
  const auto raw_path = with_ext(path, ".raw");
  if (!std::filesystem::exists(json_path)) throw IoError("missing volume header " + json_path.string());
  json meta;
  try {
    meta = json::parse(io::read_file(json_path));
  } catch (const json::exception& e) {
    throw ValidationError("malformed volume header " + json_path.string() + ": " + e.what());
  }
  Shape3 shape{};
  Vec3 spacing, origin;
  try {
    const auto& s = meta.at("shape");
    const auto& sp = meta.at("spacing_mm");
    const auto& o = meta.at("origin_mm");
    if (s.size() != 3 || sp.size() != 3 || o.size() != 3) throw ValidationError("shape/spacing/origin need 3 entries");
    for (int a = 0; a < 3; ++a) {
      if (!s[a].is_number_integer()) throw ValidationError("shape entries must be integers");
      shape[a] = s[a].get<int>();
      spacing[a] = sp[a].get<double>();
      origin[a] = o[a].get<double>();
    }
    if (meta.at("dtype").get<std::string>() != "u8") throw UnsupportedError("sidecar dtype must be \"u8\"");
    if (meta.at("order").get<std::string>() != "x-fastest") {
      throw UnsupportedError("sidecar order must be \"x-fastest\"");
    }
  } catch (const json::exception& e) {
    throw ValidationError("malformed volume header " + json_path.string() + ": " + e.what());
  }
  if (!std::filesystem::exists(raw_path)) throw IoError("missing volume payload " + raw_path.string());
  std::string raw = io::read_file(raw_path);
  std::vector<std::uint8_t> data(raw.begin(), raw.end());
  return VoxelVolume(shape, spacing, origin, std::move(data));
}

std::vector<double> parse_vector(std::string_view text) {
  std::string cleaned(text);
  for (char& c : cleaned) {
    if (c == '(' || c == ')' || c == ',') c = ' ';
  }
  std::istringstream ss(cleaned);
  std::vector<double> out;
  std::string tok;
  while (ss >> tok) {
    if (tok == "none") throw UnsupportedError("NRRD 'none' space direction");
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw ValidationError("malformed NRRD number: " + tok);
    }
  }
  return out;
}

VoxelVolume load_nrrd(const std::filesystem::path& path) {
  const std::string file = io::read_file(path);
  std::size_t pos = 0;
  auto next_line = [&](std::string_view& line) {
    if (pos >= file.size()) return false;
    auto end = file.find('\n', pos);
    if (end == std::string::npos) end = file.size();
    line = std::string_view(file).substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end + 1;
    return true;
  };
  std::string_view line;
  if (!next_line(line) || line.substr(0, 7) != "NRRD000") throw ValidationError("not a NRRD file: " + path.string());

  std::map<std::string, std::string> fields;
  bool header_done = false;
  while (next_line(line)) {
    if (line.empty()) {
      header_done = true;
      break;
    }
    if (line[0] == '#') continue;
    if (line.find(":=") != std::string_view::npos) continue;  // key/value pairs
    const auto colon = line.find(": ");
    if (colon == std::string_view::npos) throw ValidationError("malformed NRRD header line: " + std::string(line));
    fields[std::string(line.substr(0, colon))] = std::string(io::trim(line.substr(colon + 2)));
  }
  if (!header_done) throw ValidationError("NRRD header not terminated by a blank line");

  auto field = [&](const std::string& key) -> const std::string* {
    auto it = fields.find(key);
    return it == fields.end() ? nullptr : &it->second;
  };
  if (field("data file") || field("datafile")) throw UnsupportedError("detached NRRD data files are not supported");
  const auto* dim = field("dimension");
  if (!dim || *dim != "3") throw UnsupportedError("only 3-D NRRD volumes are supported");

  const auto* type = field("type");
  if (!type) throw ValidationError("NRRD header lacks 'type'");
  int bytes_per = 0;
  if (*type == "uint8" || *type == "uchar" || *type == "unsigned char" || *type == "uint8_t") {
    bytes_per = 1;
  } else if (*type == "short" || *type == "short int" || *type == "signed short" || *type == "signed short int" ||
             *type == "int16" || *type == "int16_t") {
    bytes_per = 2;
  } else {
    throw UnsupportedError("unsupported NRRD type: " + *type);
  }

  const auto* sizes = field("sizes");
  if (!sizes) throw ValidationError("NRRD header lacks 'sizes'");
  const auto sz = parse_vector(*sizes);
  if (sz.size() != 3) throw ValidationError("NRRD 'sizes' must have 3 entries");
  Shape3 shape{static_cast<int>(sz[0]), static_cast<int>(sz[1]), static_cast<int>(sz[2])};

  Vec3 spacing(1.0, 1.0, 1.0);
  if (const auto* dirs = field("space directions")) {
    const auto d = parse_vector(*dirs);
    if (d.size() != 9) throw ValidationError("NRRD 'space directions' must hold three 3-vectors");
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        if (a != b && d[3 * a + b] != 0.0) throw UnsupportedError("non-diagonal NRRD space directions");
      }
      spacing[a] = d[4 * a];
    }
  } else if (const auto* sp = field("spacings")) {
    const auto d = parse_vector(*sp);
    if (d.size() != 3) throw ValidationError("NRRD 'spacings' must have 3 entries");
    spacing = Vec3(d[0], d[1], d[2]);
  }
  Vec3 origin = Vec3::Zero();
  if (const auto* o = field("space origin")) {
    const auto d = parse_vector(*o);
    if (d.size() != 3) throw ValidationError("NRRD 'space origin' must have 3 entries");
    origin = Vec3(d[0], d[1], d[2]);
  }

  const auto* enc = field("encoding");
  if (!enc) throw ValidationError("NRRD header lacks 'encoding'");
  std::string payload;
  const std::string_view rest = std::string_view(file).substr(std::min(pos, file.size()));
  if (*enc == "raw") {
    payload.assign(rest);
  } else if (*enc == "gzip" || *enc == "gz") {
    payload = io::gunzip(rest);
  } else {
    throw UnsupportedError("unsupported NRRD encoding: " + *enc);
  }
  bool big_endian = false;
  if (const auto* e = field("endian")) big_endian = *e == "big";

  const std::size_t n = checked_product(shape);
  if (payload.size() != n * static_cast<std::size_t>(bytes_per)) {
    throw ValidationError("shape/data-length mismatch in " + path.string());
  }
  std::vector<std::uint8_t> data(n);
  if (bytes_per == 1) {
    std::memcpy(data.data(), payload.data(), n);
  } else {
    const auto* p = reinterpret_cast<const unsigned char*>(payload.data());
    for (std::size_t i = 0; i < n; ++i) {
      const unsigned lo = big_endian ? p[2 * i + 1] : p[2 * i];
      const unsigned hi = big_endian ? p[2 * i] : p[2 * i + 1];
      const auto value = static_cast<std::int16_t>(static_cast<std::uint16_t>(lo | (hi << 8)));
      data[i] = value > 0 ? 1 : 0;
    }
  }
  return VoxelVolume(shape, spacing, origin, std::move(data));
}

// Binary sliding-window filter along one axis. Cells beyond the border take
// the value `outside`. `want_max` selects dilation, otherwise erosion.
std::vector<std::uint8_t> axis_filter(const std::vector<std::uint8_t>& in, const Shape3& shape, int axis, int r,
                                      bool want_max, bool outside) {
  std::vector<std::uint8_t> out(in.size());
  const std::size_t stride = axis == 0 ? 1 : axis == 1 ? shape[0] : static_cast<std::size_t>(shape[0]) * shape[1];
  const int len = shape[axis];
  const int u = (axis + 1) % 3, v = (axis + 2) % 3;
  const std::size_t stride_u = u == 0 ? 1 : u == 1 ? shape[0] : static_cast<std::size_t>(shape[0]) * shape[1];
  const std::size_t stride_v = v == 0 ? 1 : v == 1 ? shape[0] : static_cast<std::size_t>(shape[0]) * shape[1];
  std::vector<int> prefix(static_cast<std::size_t>(len) + 1);
  for (int b = 0; b < shape[v]; ++b) {
    for (int a = 0; a < shape[u]; ++a) {
      const std::size_t base = a * stride_u + b * stride_v;
      prefix[0] = 0;
      for (int i = 0; i < len; ++i) prefix[i + 1] = prefix[i] + in[base + i * stride];
      for (int i = 0; i < len; ++i) {
        const int lo = i - r, hi = i + r;
        const int clo = std::max(lo, 0), chi = std::min(hi, len - 1);
        const int ones = prefix[chi + 1] - prefix[clo];
        const bool clipped = lo < 0 || hi > len - 1;
        bool value;
        if (want_max) {
          value = ones > 0 || (clipped && outside);
        } else {
          value = ones == chi - clo + 1 && (!clipped || outside);
        }
        out[base + i * stride] = value ? 1 : 0;
      }
    }
  }
  return out;
}

// One step with the 6-neighborhood (plus center).
std::vector<std::uint8_t> cross_step(const std::vector<std::uint8_t>& in, const Shape3& shape, bool want_max,
                                     bool outside) {
  std::vector<std::uint8_t> out(in.size());
  const std::size_t sx = 1, sy = shape[0], sz = static_cast<std::size_t>(shape[0]) * shape[1];
  for (int z = 0; z < shape[2]; ++z) {
    for (int y = 0; y < shape[1]; ++y) {
      for (int x = 0; x < shape[0]; ++x) {
        const std::size_t i = x * sx + y * sy + z * sz;
        auto nb = [&](bool inside, std::size_t j) -> bool { return inside ? in[j] != 0 : outside; };
        const bool vals[7] = {in[i] != 0,
                              nb(x > 0, i - sx),
                              nb(x + 1 < shape[0], i + sx),
                              nb(y > 0, i - sy),
                              nb(y + 1 < shape[1], i + sy),
                              nb(z > 0, i - sz),
                              nb(z + 1 < shape[2], i + sz)};
        bool acc = vals[0];
        for (int k = 1; k < 7; ++k) acc = want_max ? (acc || vals[k]) : (acc && vals[k]);
        out[i] = acc ? 1 : 0;
      }
    }
  }
  return out;
}

VoxelVolume morph(const VoxelVolume& v, const StructuringElement& se, bool want_max, bool outside) {
  if (se.radius < 1) throw ValidationError("structuring element radius must be >= 1");
  std::vector<std::uint8_t> buf(v.data().begin(), v.data().end());
  if (se.kind == StructuringElement::Kind::cube26) {
    for (int axis = 0; axis < 3; ++axis) buf = axis_filter(buf, v.shape(), axis, se.radius, want_max, outside);
  } else {
    for (int it = 0; it < se.radius; ++it) buf = cross_step(buf, v.shape(), want_max, outside);
  }
  return VoxelVolume(v.shape(), v.spacing(), v.origin(), std::move(buf));
}

}  // namespace

VoxelVolume load_volume(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".nrrd") {
    if (!std::filesystem::exists(path)) throw IoError("missing volume " + path.string());
    return load_nrrd(path);
  }
  if (ext == ".nhdr") throw UnsupportedError("detached NRRD headers are not supported");
  return load_sidecar(path);
}

void save_volume(const VoxelVolume& v, const std::filesystem::path& path) {
  json meta;
  meta["shape"] = {v.shape()[0], v.shape()[1], v.shape()[2]};
  meta["spacing_mm"] = {v.spacing()[0], v.spacing()[1], v.spacing()[2]};
  meta["origin_mm"] = {v.origin()[0], v.origin()[1], v.origin()[2]};
  meta["dtype"] = "u8";
  meta["order"] = "x-fastest";
  const auto bytes = v.data();
  io::write_file_atomic(with_ext(path, ".raw"),
                        std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  io::write_file_atomic(with_ext(path, ".json"), meta.dump(2) + "\n");
}

VoxelizeResult voxelize(const PointCloud& pc, const VoxelVolume& like) {
  if (pc.frame() == Frame::normalized && !pc.transform()) {
    throw ValidationError("normalized cloud has no inverse transform");
  }
  VoxelizeResult result{like.blank_like(), 0};
  for (const Vec3& p : pc.points()) {
    const Vec3 w = pc.frame() == Frame::normalized ? pc.transform()->to_world(p) : p;
    int idx[3];
    bool inside = true;
    for (int a = 0; a < 3; ++a) {
      // Voxel i owns (center - s/2, center + s/2]; a face point goes to the lower index.
      const double u = (w[a] - like.origin()[a]) / like.spacing()[a] + 0.5;
      if (!std::isfinite(u)) {
        inside = false;
        break;
      }
      const double c = std::ceil(u) - 1.0;
      if (c < 0.0 || c >= like.shape()[a]) {
        inside = false;
        break;
      }
      idx[a] = static_cast<int>(c);
    }
    if (!inside) {
      ++result.dropped;
      continue;
    }
    result.volume.set(idx[0], idx[1], idx[2], true);
  }
  return result;
}

VoxelVolume dilate(const VoxelVolume& v, const StructuringElement& se) { return morph(v, se, true, false); }

VoxelVolume erode(const VoxelVolume& v, const StructuringElement& se, bool outside) {
  return morph(v, se, false, outside);
}

VoxelVolume binary_closing(const VoxelVolume& v, const StructuringElement& se) {
  // Treating the exterior as foreground during erosion keeps closing extensive
  // next to the grid border.
  return erode(dilate(v, se), se, true);
}

ComponentResult largest_component(const VoxelVolume& v, Connectivity c) {
  ComponentResult result;
  result.volume = v.blank_like();
  const std::size_t n = v.size();
  if (n == 0) {
    result.empty = true;
    return result;
  }
  std::vector<std::uint8_t> seen(n, 0);
  std::vector<std::size_t> best, current;
  std::deque<std::size_t> queue;
  const Shape3& s = v.shape();
  for (std::size_t start = 0; start < n; ++start) {
    if (!v.at(start) || seen[start]) continue;
    ++result.components;
    current.clear();
    seen[start] = 1;
    queue.push_back(start);
    while (!queue.empty()) {
      const std::size_t idx = queue.front();
      queue.pop_front();
      current.push_back(idx);
      const Shape3 p = v.coords(idx);
      for (int dz = -1; dz <= 1; ++dz) {
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
            if (manhattan == 0) continue;
            if (c == Connectivity::six && manhattan != 1) continue;
            const int x = p[0] + dx, y = p[1] + dy, z = p[2] + dz;
            if (x < 0 || y < 0 || z < 0 || x >= s[0] || y >= s[1] || z >= s[2]) continue;
            const std::size_t j = v.index(x, y, z);
            if (v.at(j) && !seen[j]) {
              seen[j] = 1;
              queue.push_back(j);
            }
          }
        }
      }
    }
    // Components are discovered in order of their smallest linear index, so a
    // strict comparison keeps the earliest one on ties.
    if (current.size() > best.size()) best.swap(current);
  }
  result.empty = result.components == 0;
  result.kept_voxels = best.size();
  for (std::size_t idx : best) result.volume.set(idx, true);
  return result;
}

VoxelVolume subtract_overlap(const VoxelVolume& defect, const VoxelVolume& defective_input) {
  if (!defect.same_grid(defective_input)) throw ValidationError("subtract_overlap: grid mismatch");
  VoxelVolume out = defect.blank_like();
  for (std::size_t i = 0; i < defect.size(); ++i) out.set(i, defect.at(i) && !defective_input.at(i));
  return out;
}

}  // namespace voxel
}  // namespace shapefill
