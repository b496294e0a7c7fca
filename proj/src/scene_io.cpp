#include "mvdepth/scene_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace mvdepth {

namespace {

constexpr std::size_t kMaxPixels = std::size_t{1} << 28;
constexpr int kMaxRaw = 65535;

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& what) {
  throw std::runtime_error(path.string() + ": " + what);
}

// Reads the whitespace/comment separated header tokens of a binary graymap.
// Comments are collected so the scale annotation can be found wherever it
// appears before the raster.
class PgmHeaderReader {
 public:
  PgmHeaderReader(std::istream& in, const std::filesystem::path& path)
      : in_(in), path_(path) {}

  std::string token() {
    skip_space_and_comments();
    std::string out;
    while (true) {
      int c = in_.peek();
      if (c == EOF || std::isspace(c) || c == '#') break;
      out.push_back(static_cast<char>(in_.get()));
    }
    if (out.empty()) fail(path_, "truncated header");
    return out;
  }

  long long number() {
    std::string t = token();
    if (!std::all_of(t.begin(), t.end(), [](char c) { return std::isdigit(c); }))
      fail(path_, "malformed header field '" + t + "'");
    if (t.size() > 9) fail(path_, "dimension overflow in header");
    return std::stoll(t);
  }

  // The raster starts after exactly one whitespace byte following maxval.
  void finish() {
    int c = in_.get();
    if (c == EOF || !std::isspace(c)) fail(path_, "malformed header terminator");
  }

  const std::vector<std::string>& comments() const { return comments_; }

 private:
  void skip_space_and_comments() {
    while (true) {
      int c = in_.peek();
      if (c == EOF) return;
      if (std::isspace(c)) {
        in_.get();
      } else if (c == '#') {
        std::string line;
        std::getline(in_, line);
        comments_.push_back(line);
      } else {
        return;
      }
    }
  }

  std::istream& in_;
  const std::filesystem::path& path_;
  std::vector<std::string> comments_;
};

std::optional<double> parse_scale(const std::vector<std::string>& comments) {
  for (const auto& line : comments) {
    auto pos = line.find("scale=");
    if (pos == std::string::npos) continue;
    std::string rest = line.substr(pos + 6);
    char* end = nullptr;
    double v = std::strtod(rest.c_str(), &end);
    if (end == rest.c_str()) return std::nullopt;
    return v;
  }
  return std::nullopt;
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return os.str();
}

}  // namespace

void CameraRig::validate() const {
  if (!(focal > 0.0)) throw std::invalid_argument("camera rig: focal length must be > 0");
  if (!(baseline >= 0.0)) throw std::invalid_argument("camera rig: baseline must be >= 0");
  if (width <= 0 || height <= 0)
    throw std::invalid_argument("camera rig: image dimensions must be positive");
}

DepthImage::DepthImage(int height, int width, int bit_depth)
    : height_(height), width_(width), bit_depth_(bit_depth) {
  if (height <= 0 || width <= 0)
    throw std::invalid_argument("depth image: dimensions must be positive");
  const auto n = static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  values_.assign(n, 0.0);
  mask_.assign(n, 0);
}

void DepthImage::set(int row, int col, double depth) {
  if (!(depth >= 0.0) || !std::isfinite(depth))
    throw std::invalid_argument("depth image: depth must be finite and >= 0");
  values_[index(row, col)] = depth;
  mask_[index(row, col)] = 1;
}

void DepthImage::invalidate(int row, int col) {
  values_[index(row, col)] = 0.0;
  mask_[index(row, col)] = 0;
}

Eigen::VectorXd DepthImage::row(int r) const {
  Eigen::VectorXd out(width_);
  for (int c = 0; c < width_; ++c) out[c] = values_[index(r, c)];
  return out;
}

std::vector<bool> DepthImage::row_mask(int r) const {
  std::vector<bool> out(static_cast<std::size_t>(width_));
  for (int c = 0; c < width_; ++c) out[static_cast<std::size_t>(c)] = mask_[index(r, c)] != 0;
  return out;
}

std::size_t DepthImage::valid_count() const {
  return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), 1));
}

void DepthImage::check_matches(const CameraRig& rig) const {
  if (height_ != rig.height || width_ != rig.width) {
    std::ostringstream os;
    os << "depth image is " << height_ << "x" << width_ << " but the rig expects "
       << rig.height << "x" << rig.width;
    throw std::invalid_argument(os.str());
  }
}

void PointCloud::validate() const {
  if (normals.empty()) return;
  if (normals.size() != points.size())
    throw std::invalid_argument("point cloud: normal count differs from point count");
  for (const auto& n : normals) {
    if (std::abs(n.norm() - 1.0) > 1e-9)
      throw std::invalid_argument("point cloud: normals must have unit length");
  }
}

DepthImage read_depth_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open");

  PgmHeaderReader header(in, path);
  if (header.token() != "P5") fail(path, "not a binary graymap (expected P5)");
  const long long width = header.number();
  const long long height = header.number();
  const long long maxval = header.number();
  header.finish();

  if (width <= 0 || height <= 0) fail(path, "non-positive dimensions");
  if (static_cast<unsigned long long>(width) * static_cast<unsigned long long>(height) >
      kMaxPixels)
    fail(path, "dimension overflow");
  if (maxval <= 0 || maxval > kMaxRaw) fail(path, "maxval out of range");

  const auto scale = parse_scale(header.comments());
  if (!scale) fail(path, "missing '# scale=<float>' header comment");
  if (!(*scale > 0.0) || !std::isfinite(*scale)) fail(path, "scale must be positive");

  const int bytes = maxval < 256 ? 1 : 2;
  DepthImage img(static_cast<int>(height), static_cast<int>(width),
                 bytes == 1 ? 8 : 16);
  std::vector<unsigned char> raster(static_cast<std::size_t>(width * height * bytes));
  in.read(reinterpret_cast<char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  if (in.gcount() != static_cast<std::streamsize>(raster.size())) fail(path, "truncated raster");

  std::size_t k = 0;
  for (int r = 0; r < img.height(); ++r) {
    for (int c = 0; c < img.width(); ++c) {
      unsigned raw = raster[k++];
      if (bytes == 2) raw = (raw << 8) | raster[k++];  // big-endian samples
      if (raw > 0) img.set(r, c, raw * *scale);
    }
  }
  return img;
}

double fitting_scale(const DepthImage& img, double preferred) {
  if (!(preferred > 0.0)) throw std::invalid_argument("storage scale must be positive");
  double max_depth = 0.0;
  for (int r = 0; r < img.height(); ++r)
    for (int c = 0; c < img.width(); ++c)
      if (img.valid(r, c)) max_depth = std::max(max_depth, img.value(r, c));
  const double multiple = std::ceil(max_depth / (preferred * (kMaxRaw - 0.5)));
  return preferred * std::max(1.0, multiple);
}

void write_depth_image(const DepthImage& img, const std::filesystem::path& path,
                       double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("storage scale must be positive");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path, "cannot open for writing");

  out << "P5\n# scale=" << format_double(scale) << "\n"
      << img.width() << " " << img.height() << "\n" << kMaxRaw << "\n";

  std::vector<unsigned char> raster;
  raster.reserve(static_cast<std::size_t>(img.width()) * img.height() * 2);
  for (int r = 0; r < img.height(); ++r) {
    for (int c = 0; c < img.width(); ++c) {
      long raw = 0;
      if (img.valid(r, c)) {
        raw = std::lround(img.value(r, c) / scale);
        if (raw > kMaxRaw) fail(path, "depth exceeds the 16-bit range at this scale");
        raw = std::max(raw, 1L);
      }
      raster.push_back(static_cast<unsigned char>((raw >> 8) & 0xff));
      raster.push_back(static_cast<unsigned char>(raw & 0xff));
    }
  }
  out.write(reinterpret_cast<const char*>(raster.data()),
            static_cast<std::streamsize>(raster.size()));
  if (!out) fail(path, "write failed");
}

void write_point_cloud(const PointCloud& cloud, const std::filesystem::path& path) {
  cloud.validate();
  std::ofstream out(path);
  if (!out) fail(path, "cannot open for writing");
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n";
  if (cloud.has_normals())
    out << "property double nx\nproperty double ny\nproperty double nz\n";
  out << "end_header\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    out << p.x() << ' ' << p.y() << ' ' << p.z();
    if (cloud.has_normals()) {
      const auto& n = cloud.normals[i];
      out << ' ' << n.x() << ' ' << n.y() << ' ' << n.z();
    }
    out << '\n';
  }
  if (!out) fail(path, "write failed");
}

PointCloud read_point_cloud(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(path, "cannot open");
  std::string line;
  if (!std::getline(in, line) || line != "ply") fail(path, "not a polygon file");

  std::size_t count = 0;
  std::vector<std::string> props;
  bool in_vertex = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "ascii") fail(path, "only ascii polygon files are supported");
    } else if (key == "element") {
      std::string name;
      ls >> name;
      in_vertex = name == "vertex";
      if (in_vertex) ls >> count;
    } else if (key == "property" && in_vertex) {
      std::string type, name;
      ls >> type >> name;
      props.push_back(name);
    } else if (key == "end_header") {
      break;
    }
  }

  auto find = [&](const std::string& name) -> int {
    auto it = std::find(props.begin(), props.end(), name);
    return it == props.end() ? -1 : static_cast<int>(it - props.begin());
  };
  const int ix = find("x"), iy = find("y"), iz = find("z");
  const int inx = find("nx"), iny = find("ny"), inz = find("nz");
  if (ix < 0 || iy < 0 || iz < 0) fail(path, "vertex element lacks x/y/z");
  const bool normals = inx >= 0 && iny >= 0 && inz >= 0;

  PointCloud cloud;
  cloud.points.reserve(count);
  std::vector<double> vals(props.size());
  for (std::size_t i = 0; i < count; ++i) {
    for (auto& v : vals)
      if (!(in >> v)) fail(path, "truncated vertex list");
    cloud.points.emplace_back(vals[ix], vals[iy], vals[iz]);
    if (normals) cloud.normals.emplace_back(vals[inx], vals[iny], vals[inz]);
  }
  return cloud;
}

}  // namespace mvdepth
