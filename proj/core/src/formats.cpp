#include "wsol/formats.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "wsol/errors.hpp"

namespace wsol {

namespace {

constexpr char kScoreMapMagic[4] = {'W', 'S', 'M', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::vector<std::uint8_t> encode_score_map(const Tensor& map) {
  if (map.rank() != 2) throw ShapeError("score map must be [H,W], got " + shape_str(map.shape()));
  std::vector<std::uint8_t> out(kScoreMapMagic, kScoreMapMagic + 4);
  put_u32(out, static_cast<std::uint32_t>(map.dim(0)));
  put_u32(out, static_cast<std::uint32_t>(map.dim(1)));
  out.reserve(out.size() + 4 * map.numel());
  for (double v : map.data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

Tensor decode_score_map(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kScoreMapMagic, 4) != 0)
    throw FormatError("not a WSM1 score map (bad magic)");
  const std::uint32_t h = get_u32(bytes.data() + 4);
  const std::uint32_t w = get_u32(bytes.data() + 8);
  if (h == 0 || w == 0) throw FormatError("WSM1 score map has a zero extent");
  const std::uint64_t n = static_cast<std::uint64_t>(h) * w;
  if (bytes.size() != 12 + 4 * n) throw FormatError("WSM1 payload size does not match its header");
  Tensor map(Shape{h, w});
  for (std::uint64_t i = 0; i < n; ++i) {
    const float f = std::bit_cast<float>(get_u32(bytes.data() + 12 + 4 * i));
    if (!std::isfinite(f)) throw FormatError("WSM1 score map contains a non-finite value");
    map[i] = static_cast<double>(f);
  }
  return map;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write to " + path.string());
}

void write_score_map(const std::filesystem::path& path, const Tensor& map) { write_file(path, encode_score_map(map)); }

Tensor read_score_map(const std::filesystem::path& path) { return decode_score_map(read_file(path)); }

std::vector<ScoreMap> read_score_map_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  std::vector<ScoreMap> maps;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".wsm") continue;
    maps.push_back({entry.path().stem().string(), read_score_map(entry.path())});
  }
  std::sort(maps.begin(), maps.end(), [](const ScoreMap& a, const ScoreMap& b) { return a.image_id < b.image_id; });
  return maps;
}

BoxSets parse_gt_boxes(std::istream& in) {
  BoxSets boxes;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(t);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(trim(f));
    if (fields.size() != 5 || fields[0].empty())
      throw FormatError("gt line " + std::to_string(lineno) + ": expected image_id,x0,y0,x1,y1");
    int v[4];
    for (int k = 0; k < 4; ++k) {
      const auto& s = fields[static_cast<std::size_t>(k) + 1];
      const auto r = std::from_chars(s.data(), s.data() + s.size(), v[k]);
      if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw FormatError("gt line " + std::to_string(lineno) + ": bad coordinate '" + s + "'");
    }
    const Box b{v[0], v[1], v[2], v[3]};
    if (!b.valid()) throw FormatError("gt line " + std::to_string(lineno) + ": box has no area");
    boxes[fields[0]].push_back(b);
  }
  return boxes;
}

BoxSets read_gt_boxes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return parse_gt_boxes(in);
}

void write_gt_boxes(const std::filesystem::path& path, const BoxSets& boxes) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# image_id,x0,y0,x1,y1\n";
  for (const auto& [id, list] : boxes)
    for (const auto& b : list) out << id << ',' << b.x0 << ',' << b.y0 << ',' << b.x1 << ',' << b.y1 << '\n';
}

std::string format_report(const MaxBoxAccV2& result) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "n_samples=" << result.n_samples << '\n';
  for (const auto& d : result.per_delta) {
    std::ostringstream key;
    key << d.delta;
    os << "maxboxacc@" << key.str() << '=' << d.accuracy << '\n';
    os << "best_tau@" << key.str() << '=' << d.tau << '\n';
  }
  os << "maxboxaccv2=" << result.mean << '\n';
  return os.str();
}

std::vector<std::uint8_t> encode_pgm(const Tensor& map) {
  if (map.rank() != 2) throw ShapeError("pgm export needs an [H,W] map");
  const std::string header = "P5\n" + std::to_string(map.dim(1)) + " " + std::to_string(map.dim(0)) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const Tensor norm = normalize(map);
  for (double v : norm.data()) out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  return out;
}

void write_pgm(const std::filesystem::path& path, const Tensor& map) { write_file(path, encode_pgm(map)); }

}  // namespace wsol
