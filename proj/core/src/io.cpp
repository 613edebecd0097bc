#include "camvox/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace camvox::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

using nlohmann::json;

[[noreturn]] void parse_error(const fs::path& path, std::size_t line, const std::string& what) {
  std::ostringstream os;
  os << path.string() << ":" << line << ": " << what;
  throw_input_error(os.str());
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw_input_error("cannot open " + path.string() + " for reading");
  return in;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, mode);
  if (!out) throw_input_error("cannot open " + path.string() + " for writing");
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Splits a CSV line into fields; returns false for blank, comment or header lines.
bool split_fields(std::string_view line, std::vector<std::string_view>& fields) {
  fields.clear();
  line = trim(line);
  if (line.empty() || line.front() == '#') return false;
  if (std::isalpha(static_cast<unsigned char>(line.front())) && line.front() != 'n' && line.front() != 'i') {
    return false;  // header row
  }
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return true;
}

template <typename T>
T parse_number(const fs::path& path, std::size_t line, std::string_view s, const char* field) {
  T value{};
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    parse_error(path, line, std::string("invalid ") + field + " '" + std::string(s) + "'");
  }
  return value;
}

template <typename Fn>
void for_each_row(const fs::path& path, std::size_t expected_fields, Fn&& fn) {
  auto in = open_in(path);
  std::string line;
  std::vector<std::string_view> fields;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!split_fields(line, fields)) continue;
    if (fields.size() != expected_fields) {
      std::ostringstream os;
      os << "expected " << expected_fields << " comma-separated fields, found " << fields.size();
      parse_error(path, line_no, os.str());
    }
    fn(line_no, fields);
  }
}

// Shortest text that reads back to the same double.
std::string fmt_double(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

std::string fmt_float(float x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

void check_point(const fs::path& path, std::size_t line, const LidarPoint& p) {
  if (!p.position.allFinite()) parse_error(path, line, "non-finite coordinate");
  if (!(p.reflectivity >= 0.0f && p.reflectivity <= 255.0f)) parse_error(path, line, "reflectivity outside [0, 255]");
}

cv::Mat read_image(const fs::path& path, int flags) {
  if (!fs::exists(path)) throw_input_error("image " + path.string() + " does not exist");
  cv::Mat m = cv::imread(path.string(), flags);
  if (m.empty()) throw_input_error("cannot decode image " + path.string());
  return m;
}

void write_image(const fs::path& path, const cv::Mat& m) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), m)) throw_input_error("cannot write image " + path.string());
}

}  // namespace

std::vector<LidarPoint> read_points_csv(const fs::path& path) {
  std::vector<LidarPoint> pts;
  for_each_row(path, 5, [&](std::size_t ln, const std::vector<std::string_view>& f) {
    LidarPoint p;
    p.position = Vec3(parse_number<double>(path, ln, f[0], "x"), parse_number<double>(path, ln, f[1], "y"),
                      parse_number<double>(path, ln, f[2], "z"));
    p.reflectivity = parse_number<float>(path, ln, f[3], "reflectivity");
    p.t = Timestamp{parse_number<std::int64_t>(path, ln, f[4], "t_ns")};
    check_point(path, ln, p);
    pts.push_back(p);
  });
  return pts;
}

void write_points_csv(const fs::path& path, std::span<const LidarPoint> points) {
  auto out = open_out(path);
  std::string line;
  for (const auto& p : points) {
    line.clear();
    line += fmt_double(p.position.x());
    line += ',';
    line += fmt_double(p.position.y());
    line += ',';
    line += fmt_double(p.position.z());
    line += ',';
    line += fmt_float(p.reflectivity);
    line += ',';
    line += std::to_string(p.t.ns);
    line += '\n';
    out << line;
  }
  if (!out) throw_input_error("failed writing " + path.string());
}

namespace {

enum class PlyType { kChar, kUchar, kShort, kUshort, kInt, kUint, kFloat, kDouble };

PlyType ply_type(const fs::path& path, std::size_t line, const std::string& name) {
  if (name == "char" || name == "int8") return PlyType::kChar;
  if (name == "uchar" || name == "uint8") return PlyType::kUchar;
  if (name == "short" || name == "int16") return PlyType::kShort;
  if (name == "ushort" || name == "uint16") return PlyType::kUshort;
  if (name == "int" || name == "int32") return PlyType::kInt;
  if (name == "uint" || name == "uint32") return PlyType::kUint;
  if (name == "float" || name == "float32") return PlyType::kFloat;
  if (name == "double" || name == "float64") return PlyType::kDouble;
  parse_error(path, line, "unsupported PLY property type '" + name + "'");
}

std::size_t ply_size(PlyType t) {
  switch (t) {
    case PlyType::kChar:
    case PlyType::kUchar:
      return 1;
    case PlyType::kShort:
    case PlyType::kUshort:
      return 2;
    case PlyType::kInt:
    case PlyType::kUint:
    case PlyType::kFloat:
      return 4;
    case PlyType::kDouble:
      return 8;
  }
  return 0;
}

double ply_value(PlyType t, const char* p) {
  auto get = [p]<typename T>(T) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return static_cast<double>(v);
  };
  switch (t) {
    case PlyType::kChar:
      return get(std::int8_t{});
    case PlyType::kUchar:
      return get(std::uint8_t{});
    case PlyType::kShort:
      return get(std::int16_t{});
    case PlyType::kUshort:
      return get(std::uint16_t{});
    case PlyType::kInt:
      return get(std::int32_t{});
    case PlyType::kUint:
      return get(std::uint32_t{});
    case PlyType::kFloat:
      return get(float{});
    case PlyType::kDouble:
      return get(double{});
  }
  return 0.0;
}

}  // namespace

std::vector<LidarPoint> read_points_ply(const fs::path& path) {
  auto in = open_in(path, std::ios::in | std::ios::binary);
  std::string line;
  std::size_t line_no = 0;
  std::size_t count = 0;
  bool in_vertex = false;
  bool seen_vertex = false;
  struct Prop {
    std::string name;
    PlyType type;
    std::size_t offset;
  };
  std::vector<Prop> props;
  std::size_t stride = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (line_no == 1) {
      if (word != "ply") parse_error(path, line_no, "missing 'ply' magic");
      continue;
    }
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "binary_little_endian") parse_error(path, line_no, "only binary_little_endian PLY is supported");
    } else if (word == "element") {
      std::string name;
      ls >> name;
      in_vertex = name == "vertex";
      if (in_vertex) {
        ls >> count;
        seen_vertex = true;
      } else if (!seen_vertex) {
        parse_error(path, line_no, "elements before 'vertex' are not supported");
      }
    } else if (word == "property") {
      if (!in_vertex) continue;
      std::string type;
      std::string name;
      ls >> type >> name;
      if (type == "list") parse_error(path, line_no, "list properties are not supported on vertices");
      const PlyType t = ply_type(path, line_no, type);
      props.push_back({name, t, stride});
      stride += ply_size(t);
    } else if (word == "end_header") {
      break;
    }
  }
  auto find = [&](const char* name) -> const Prop& {
    for (const auto& p : props) {
      if (p.name == name) return p;
    }
    parse_error(path, line_no, std::string("PLY vertex lacks property '") + name + "'");
  };
  const Prop& px = find("x");
  const Prop& py = find("y");
  const Prop& pz = find("z");
  const Prop& pr = find("reflectivity");
  const Prop& pt = find("t_ns");

  std::vector<char> buf(stride * count);
  in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in.gcount()) != buf.size()) {
    throw_input_error(path.string() + ": PLY body truncated (expected " + std::to_string(count) + " vertices)");
  }
  std::vector<LidarPoint> pts(count);
  for (std::size_t i = 0; i < count; ++i) {
    const char* row = buf.data() + i * stride;
    LidarPoint& p = pts[i];
    p.position = Vec3(ply_value(px.type, row + px.offset), ply_value(py.type, row + py.offset),
                      ply_value(pz.type, row + pz.offset));
    p.reflectivity = static_cast<float>(ply_value(pr.type, row + pr.offset));
    p.t = Timestamp{std::llround(ply_value(pt.type, row + pt.offset))};
    check_point(path, line_no + 1 + i, p);
  }
  return pts;
}

void write_points_ply(const fs::path& path, std::span<const LidarPoint> points) {
  auto out = open_out(path, std::ios::out | std::ios::binary);
  out << "ply\nformat binary_little_endian 1.0\nelement vertex " << points.size()
      << "\nproperty double x\nproperty double y\nproperty double z\nproperty float reflectivity\n"
         "property double t_ns\nend_header\n";
  for (const auto& p : points) {
    const double xyz[3] = {p.position.x(), p.position.y(), p.position.z()};
    const double t = static_cast<double>(p.t.ns);
    out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
    out.write(reinterpret_cast<const char*>(&p.reflectivity), sizeof(float));
    out.write(reinterpret_cast<const char*>(&t), sizeof(double));
  }
  if (!out) throw_input_error("failed writing " + path.string());
}

std::vector<LidarPoint> read_points(const fs::path& path) {
  return path.extension() == ".ply" ? read_points_ply(path) : read_points_csv(path);
}

void write_points(const fs::path& path, std::span<const LidarPoint> points) {
  if (path.extension() == ".ply") {
    write_points_ply(path, points);
  } else {
    write_points_csv(path, points);
  }
}

std::vector<std::pair<Timestamp, Timestamp>> read_frame_bounds(const fs::path& path) {
  std::vector<std::pair<Timestamp, Timestamp>> out;
  for_each_row(path, 2, [&](std::size_t ln, const std::vector<std::string_view>& f) {
    const Timestamp ts{parse_number<std::int64_t>(path, ln, f[0], "t_s")};
    const Timestamp te{parse_number<std::int64_t>(path, ln, f[1], "t_e")};
    if (te <= ts) parse_error(path, ln, "frame end must be after frame start");
    out.emplace_back(ts, te);
  });
  return out;
}

void write_frame_bounds(const fs::path& path, std::span<const std::pair<Timestamp, Timestamp>> bounds) {
  auto out = open_out(path);
  for (const auto& [ts, te] : bounds) out << ts.ns << ',' << te.ns << '\n';
}

std::vector<ImuSample> read_imu(const fs::path& path) {
  std::vector<ImuSample> out;
  for_each_row(path, 8, [&](std::size_t ln, const std::vector<std::string_view>& f) {
    double v[7];
    static constexpr const char* names[7] = {"qw", "qx", "qy", "qz", "tx", "ty", "tz"};
    for (int i = 0; i < 7; ++i) v[i] = parse_number<double>(path, ln, f[static_cast<std::size_t>(i + 1)], names[i]);
    const Timestamp t{parse_number<std::int64_t>(path, ln, f[0], "t_ns")};
    if (!out.empty() && t < out.back().t) parse_error(path, ln, "IMU timestamps must be non-decreasing");
    const double qn = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2] + v[3] * v[3]);
    if (!(std::abs(qn - 1.0) < 1e-3)) parse_error(path, ln, "quaternion is not unit length");
    out.push_back({t, RigidTransform::from_quaternion(v[0], v[1], v[2], v[3], Vec3(v[4], v[5], v[6]))});
  });
  return out;
}

void write_imu(const fs::path& path, std::span<const ImuSample> samples) {
  auto out = open_out(path);
  for (const auto& s : samples) {
    Eigen::Quaterniond q = s.pose.quaternion();
    if (q.w() < 0) q.coeffs() = -q.coeffs();
    const Vec3& t = s.pose.translation();
    out << s.t.ns << ',' << fmt_double(q.w()) << ',' << fmt_double(q.x()) << ',' << fmt_double(q.y()) << ','
        << fmt_double(q.z()) << ',' << fmt_double(t.x()) << ',' << fmt_double(t.y()) << ',' << fmt_double(t.z())
        << '\n';
  }
}

namespace {

json read_json(const fs::path& path) {
  auto in = open_in(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw_input_error(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  auto out = open_out(path);
  out << std::setw(2) << j << '\n';
}

}  // namespace

CameraIntrinsics read_intrinsics(const fs::path& path) {
  const json j = read_json(path);
  CameraIntrinsics K;
  try {
    K.fu = j.at("fu").get<double>();
    K.fv = j.at("fv").get<double>();
    K.cu = j.at("cu").get<double>();
    K.cv = j.at("cv").get<double>();
    K.width = j.at("width").get<int>();
    K.height = j.at("height").get<int>();
  } catch (const json::exception& e) {
    throw_input_error(path.string() + ": " + e.what());
  }
  K.validate();
  return K;
}

void write_intrinsics(const fs::path& path, const CameraIntrinsics& K) {
  write_json(path, json{{"fu", K.fu}, {"fv", K.fv}, {"cu", K.cu}, {"cv", K.cv}, {"width", K.width}, {"height", K.height}});
}

CalibParams read_extrinsics(const fs::path& path) {
  const json j = read_json(path);
  CalibParams p;
  try {
    const auto r = j.at("rotation").get<std::vector<double>>();
    const auto t = j.at("translation").get<std::vector<double>>();
    if (r.size() != 9 || t.size() != 3) throw_input_error(path.string() + ": rotation needs 9 and translation 3 values");
    Mat3 R;
    R << r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8];
    if (!R.allFinite() || (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6 || R.determinant() < 0) {
      throw_input_error(path.string() + ": rotation is not orthonormal with determinant +1");
    }
    // Re-orthonormalize the parsed matrix.
    const Eigen::JacobiSVD<Mat3> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
    p.extrinsic = RigidTransform(svd.matrixU() * svd.matrixV().transpose(), Vec3(t[0], t[1], t[2]));
    if (j.contains("provenance")) {
      const auto& pv = j.at("provenance");
      p.cost = pv.value("cost", 0.0);
      p.scene_id = pv.value("scene_id", std::string{});
      p.t = Timestamp{pv.value("timestamp_ns", std::int64_t{0})};
    }
  } catch (const json::exception& e) {
    throw_input_error(path.string() + ": " + e.what());
  }
  return p;
}

void write_extrinsics(const fs::path& path, const CalibParams& params) {
  const Mat3& R = params.extrinsic.rotation();
  const Vec3& t = params.extrinsic.translation();
  json j;
  j["rotation"] = {R(0, 0), R(0, 1), R(0, 2), R(1, 0), R(1, 1), R(1, 2), R(2, 0), R(2, 1), R(2, 2)};
  j["translation"] = {t.x(), t.y(), t.z()};
  j["provenance"] = {{"cost", params.cost}, {"scene_id", params.scene_id}, {"timestamp_ns", params.t.ns}};
  write_json(path, j);
}

void write_depth_png_mm(const fs::path& path, const RasterImage& depth_m) {
  cv::Mat m(depth_m.height(), depth_m.width(), CV_16UC1);
  for (int v = 0; v < depth_m.height(); ++v) {
    for (int u = 0; u < depth_m.width(); ++u) {
      const double mm = std::round(static_cast<double>(depth_m.at(u, v)) * 1000.0);
      m.at<std::uint16_t>(v, u) = static_cast<std::uint16_t>(std::clamp(mm, 0.0, 65535.0));
    }
  }
  write_image(path, m);
}

RasterImage read_depth_png_mm(const fs::path& path) {
  const cv::Mat m = read_image(path, cv::IMREAD_ANYDEPTH);
  if (m.type() != CV_16UC1) throw_input_error(path.string() + ": expected a 16-bit single-channel PNG");
  RasterImage out(m.cols, m.rows);
  for (int v = 0; v < m.rows; ++v) {
    for (int u = 0; u < m.cols; ++u) out.at(u, v) = static_cast<float>(m.at<std::uint16_t>(v, u)) / 1000.0f;
  }
  return out;
}

void write_raster_f32(const fs::path& path, const RasterImage& img) {
  auto out = open_out(path, std::ios::out | std::ios::binary);
  const std::uint32_t header[2] = {static_cast<std::uint32_t>(img.width()), static_cast<std::uint32_t>(img.height())};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  out.write(reinterpret_cast<const char*>(img.pixels().data()), static_cast<std::streamsize>(img.size() * sizeof(float)));
  if (!out) throw_input_error("failed writing " + path.string());
}

RasterImage read_raster_f32(const fs::path& path) {
  auto in = open_in(path, std::ios::in | std::ios::binary);
  std::uint32_t header[2] = {0, 0};
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (in.gcount() != sizeof(header)) throw_input_error(path.string() + ": missing float32 raster header");
  RasterImage img(static_cast<int>(header[0]), static_cast<int>(header[1]));
  in.read(reinterpret_cast<char*>(img.pixels().data()), static_cast<std::streamsize>(img.size() * sizeof(float)));
  if (static_cast<std::size_t>(in.gcount()) != img.size() * sizeof(float)) {
    throw_input_error(path.string() + ": float32 raster body truncated");
  }
  return img;
}

void write_gray_png(const fs::path& path, const RasterImage& img) {
  cv::Mat m(img.height(), img.width(), CV_8UC1);
  for (int v = 0; v < img.height(); ++v) {
    for (int u = 0; u < img.width(); ++u) {
      m.at<std::uint8_t>(v, u) = static_cast<std::uint8_t>(std::clamp(std::lround(img.at(u, v)), 0L, 255L));
    }
  }
  write_image(path, m);
}

RasterImage read_gray_image(const fs::path& path) {
  const cv::Mat m = read_image(path, cv::IMREAD_GRAYSCALE);
  RasterImage out(m.cols, m.rows);
  for (int v = 0; v < m.rows; ++v) {
    for (int u = 0; u < m.cols; ++u) out.at(u, v) = m.at<std::uint8_t>(v, u);
  }
  return out;
}

void write_rgb_png(const fs::path& path, const RgbImage& img) {
  cv::Mat m(img.height(), img.width(), CV_8UC3);
  for (int v = 0; v < img.height(); ++v) {
    for (int u = 0; u < img.width(); ++u) {
      const Rgb& c = img.at(u, v);
      m.at<cv::Vec3b>(v, u) = cv::Vec3b(c[2], c[1], c[0]);
    }
  }
  write_image(path, m);
}

RgbImage read_rgb_image(const fs::path& path) {
  const cv::Mat m = read_image(path, cv::IMREAD_COLOR);
  RgbImage out(m.cols, m.rows);
  for (int v = 0; v < m.rows; ++v) {
    for (int u = 0; u < m.cols; ++u) {
      const auto& c = m.at<cv::Vec3b>(v, u);
      out.at(u, v) = {c[2], c[1], c[0]};
    }
  }
  return out;
}

void write_edges_csv(const fs::path& path, const EdgeMap& edges) {
  auto out = open_out(path);
  out << "segment_id,u,v\n";
  for (std::size_t s = 0; s < edges.segments.size(); ++s) {
    for (const auto& p : edges.segments[s].pixels) out << s << ',' << p.u << ',' << p.v << '\n';
  }
}

EdgeMap read_edges_csv(const fs::path& path, int width, int height, EdgeSource source) {
  EdgeMap map;
  map.width = width;
  map.height = height;
  map.source = source;
  long last_id = -1;
  for_each_row(path, 3, [&](std::size_t ln, const std::vector<std::string_view>& f) {
    const long id = parse_number<long>(path, ln, f[0], "segment_id");
    if (id != last_id) {
      if (id != last_id + 1) parse_error(path, ln, "segment ids must be consecutive from 0");
      map.segments.emplace_back();
      last_id = id;
    }
    map.segments.back().pixels.push_back({parse_number<int>(path, ln, f[1], "u"), parse_number<int>(path, ln, f[2], "v")});
  });
  map.validate();
  return map;
}

RgbImage edge_overlay(const RasterImage& base, const EdgeMap* camera, const EdgeMap* lidar, const OverlayLinks* links) {
  RgbImage out = to_rgb(base);
  for (auto& c : out.pixels()) {
    for (auto& ch : c) ch = static_cast<std::uint8_t>(ch / 2);
  }
  if (links) {
    for (const auto& [a, b] : links->links) {
      const int steps = std::max(std::abs(b.u - a.u), std::abs(b.v - a.v));
      for (int i = 0; i <= steps; ++i) {
        const double s = steps ? static_cast<double>(i) / steps : 0.0;
        const int u = static_cast<int>(std::lround(a.u + s * (b.u - a.u)));
        const int v = static_cast<int>(std::lround(a.v + s * (b.v - a.v)));
        if (out.contains(u, v)) out.at(u, v) = {220, 30, 30};
      }
    }
  }
  auto draw = [&](const EdgeMap* m, Rgb color) {
    if (!m) return;
    for (const auto& s : m->segments) {
      for (const auto& p : s.pixels) {
        if (out.contains(p.u, p.v)) out.at(p.u, p.v) = color;
      }
    }
  };
  draw(lidar, {40, 110, 255});
  draw(camera, {255, 150, 20});
  return out;
}

RgbImage depth_overlay(const RasterImage& gray, const RasterImage& depth, double max_depth) {
  if (!gray.same_shape(depth)) throw_input_error("overlay base and depth raster differ in size");
  RgbImage out = to_rgb(gray);
  for (std::size_t i = 0; i < depth.size(); ++i) {
    const float d = depth[i];
    if (d <= 0.0f) continue;
    // Near = red, far = blue.
    const double s = std::clamp(static_cast<double>(d) / max_depth, 0.0, 1.0);
    out[i] = {static_cast<std::uint8_t>(255 * (1 - s)), static_cast<std::uint8_t>(255 * (1 - std::abs(2 * s - 1))),
              static_cast<std::uint8_t>(255 * s)};
  }
  return out;
}

}  // namespace camvox::io
