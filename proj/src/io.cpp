#include "vidmatch/io.hpp"

#include "vidmatch/simulator.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace vidmatch::io {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw IoError(where + ": bad number '" + s + "'");
  return v;
}

long parse_long(const std::string& s, const std::string& where) {
  long v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw IoError(where + ": bad integer '" + s + "'");
  return v;
}

std::ifstream open_in(const fs::path& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path, bool binary = false) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  std::array<char, 4> b{};
  for (int i = 0; i < 4; ++i) b[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b.data(), 4);
}

std::uint32_t get_u32(std::istream& in, const fs::path& path) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) throw IoError(path.string() + ": truncated");
  return std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) |
         (std::uint32_t{b[3]} << 24);
}

}  // namespace

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw IoError("format_double failed");
  return std::string(buf.data(), ptr);
}

std::string read_text(const fs::path& path) {
  auto in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

void write_descriptors(const fs::path& path, const FrameSequence<double>& seq) {
  std::ostringstream out;
  out << "#dim=" << seq.dim() << '\n';
  for (Index i = 1; i <= seq.size(); ++i) {
    out << i;
    for (Index d = 0; d < seq.dim(); ++d) out << ',' << format_double(seq.features()(d, i - 1));
    out << '\n';
  }
  write_text(path, out.str());
}

FrameSequence<double> read_descriptors(const fs::path& path, SequenceKind kind) {
  auto in = open_in(path);
  std::string line;
  long dim = -1;
  std::vector<std::vector<double>> rows;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (t[0] == '#') {
      if (t.rfind("#dim=", 0) == 0) dim = parse_long(t.substr(5), where);
      continue;
    }
    if (dim < 0) throw IoError(where + ": missing #dim header");
    const auto fields = split(t, ',');
    if (static_cast<long>(fields.size()) != dim + 1)
      throw IoError(where + ": expected " + std::to_string(dim + 1) + " fields");
    const long id = parse_long(fields[0], where);
    if (id != static_cast<long>(rows.size()) + 1)
      throw IoError(where + ": frame ids must be contiguous from 1");
    std::vector<double> v;
    for (std::size_t f = 1; f < fields.size(); ++f) v.push_back(parse_double(fields[f], where));
    rows.push_back(std::move(v));
  }
  if (dim < 0) throw IoError(path.string() + ": missing #dim header");
  if (rows.empty()) throw IoError(path.string() + ": no frames");
  Matrix<double> m(dim, static_cast<Index>(rows.size()));
  for (std::size_t c = 0; c < rows.size(); ++c)
    for (long d = 0; d < dim; ++d) m(d, static_cast<Index>(c)) = rows[c][static_cast<std::size_t>(d)];
  try {
    return FrameSequence<double>(std::move(m), kind);
  } catch (const std::invalid_argument& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_matrix_binary(const fs::path& path, const Matrix<double>& m) {
  auto out = open_out(path, true);
  out.write("SMDM", 4);
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(m(i, j))));
  if (!out) throw IoError("write failed: " + path.string());
}

Matrix<double> read_matrix_binary(const fs::path& path) {
  auto in = open_in(path, true);
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), 4) || std::memcmp(magic.data(), "SMDM", 4) != 0)
    throw IoError(path.string() + ": not an SMDM file");
  const auto n = get_u32(in, path);
  const auto m = get_u32(in, path);
  Matrix<double> out(n, m);
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = 0; j < m; ++j)
      out(i, j) = static_cast<double>(std::bit_cast<float>(get_u32(in, path)));
  if (in.peek() != std::char_traits<char>::eof()) throw IoError(path.string() + ": trailing bytes");
  return out;
}

void write_matrix_csv(const fs::path& path, const Matrix<double>& m) {
  std::ostringstream out;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format_double(m(i, j));
    out << '\n';
  }
  write_text(path, out.str());
}

Matrix<double> read_matrix_csv(const fs::path& path) {
  auto in = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::vector<double> row;
    for (const auto& f : split(t, ',')) row.push_back(parse_double(f, path.string() + ":" + std::to_string(lineno)));
    if (!rows.empty() && row.size() != rows.front().size())
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError(path.string() + ": empty matrix");
  Matrix<double> m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return m;
}

Matrix<double> read_matrix(const fs::path& path) {
  auto in = open_in(path, true);
  std::array<char, 4> magic{};
  in.read(magic.data(), 4);
  if (in.gcount() == 4 && std::memcmp(magic.data(), "SMDM", 4) == 0) return read_matrix_binary(path);
  return read_matrix_csv(path);
}

namespace {

void write_pgm_bytes(const fs::path& path, Index width, Index height, const std::vector<unsigned char>& px) {
  auto out = open_out(path, true);
  out << "P5\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

std::string next_token(std::istream& in, const fs::path& path) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(c);
  }
  if (tok.empty()) throw IoError(path.string() + ": truncated PGM header");
  return tok;
}

}  // namespace

void write_pgm(const fs::path& path, const Mask& mask) {
  std::vector<unsigned char> px(static_cast<std::size_t>(mask.size()));
  for (Index r = 0; r < mask.rows(); ++r)
    for (Index c = 0; c < mask.cols(); ++c)
      px[static_cast<std::size_t>(r * mask.cols() + c)] = mask(r, c) ? 255 : 0;
  write_pgm_bytes(path, mask.cols(), mask.rows(), px);
}

void write_pgm(const fs::path& path, const Channel<double>& gray) {
  std::vector<unsigned char> px(static_cast<std::size_t>(gray.size()));
  for (Index r = 0; r < gray.rows(); ++r)
    for (Index c = 0; c < gray.cols(); ++c) {
      const double v = std::clamp(gray(r, c), 0.0, 1.0);
      px[static_cast<std::size_t>(r * gray.cols() + c)] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
  write_pgm_bytes(path, gray.cols(), gray.rows(), px);
}

Channel<double> read_pgm(const fs::path& path) {
  auto in = open_in(path, true);
  if (next_token(in, path) != "P5") throw IoError(path.string() + ": not a P5 PGM");
  const long w = parse_long(next_token(in, path), path.string());
  const long h = parse_long(next_token(in, path), path.string());
  const long maxval = parse_long(next_token(in, path), path.string());
  if (w < 1 || h < 1 || maxval < 1 || maxval > 255) throw IoError(path.string() + ": unsupported PGM");
  std::vector<unsigned char> px(static_cast<std::size_t>(w * h));
  if (!in.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size())))
    throw IoError(path.string() + ": truncated PGM data");
  Channel<double> out(h, w);
  for (long r = 0; r < h; ++r)
    for (long c = 0; c < w; ++c)
      out(r, c) = static_cast<double>(px[static_cast<std::size_t>(r * w + c)]) / static_cast<double>(maxval);
  return out;
}

Mask read_pgm_mask(const fs::path& path) { return read_pgm(path) > (127.0 / 255.0); }

void write_assignment_csv(const fs::path& path, const MatchAssignment& a, const std::string& comment) {
  std::ostringstream out;
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "fg_id,bg_id,distance,provenance\n";
  for (std::size_t i = 0; i < a.pi.size(); ++i)
    out << (i + 1) << ',' << a.pi[i] << ',' << format_double(a.per_frame_distance[i]) << ','
        << to_string(a.provenance[i]) << '\n';
  write_text(path, out.str());
}

MatchAssignment read_assignment_csv(const fs::path& path) {
  auto in = open_in(path);
  MatchAssignment a;
  std::string line;
  long lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (!header) {
      if (t != "fg_id,bg_id,distance,provenance") throw IoError(where + ": bad header");
      header = true;
      continue;
    }
    const auto f = split(t, ',');
    if (f.size() != 4) throw IoError(where + ": expected 4 fields");
    if (parse_long(f[0], where) != static_cast<long>(a.pi.size()) + 1)
      throw IoError(where + ": fg ids must be contiguous from 1");
    a.pi.push_back(parse_long(f[1], where));
    a.per_frame_distance.push_back(parse_double(f[2], where));
    if (f[3] == "anchor") a.provenance.push_back(Provenance::anchor);
    else if (f[3] == "propagated") a.provenance.push_back(Provenance::propagated);
    else if (f[3] == "tracked-gap") a.provenance.push_back(Provenance::tracked_gap);
    else throw IoError(where + ": unknown provenance '" + f[3] + "'");
  }
  return a;
}

KeyValues parse_key_values(const std::string& text, const std::string& source) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const auto t = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (t.empty()) continue;
    const auto eq = t.find('=');
    const std::string where = source + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    auto key = trim(t.substr(0, eq));
    auto value = trim(t.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (!kv.emplace(key, value).second) throw ConfigError(where + ": duplicate key '" + key + "'");
  }
  return kv;
}

KeyValues read_key_values(const fs::path& path) {
  return parse_key_values(read_text(path), path.string());
}

void write_key_values(const fs::path& path, const KeyValues& kv) {
  std::ostringstream out;
  for (const auto& [k, v] : kv) out << k << " = " << v << '\n';
  write_text(path, out.str());
}

void write_bundle(const fs::path& dir, const sim::SimInstance& inst) {
  fs::create_directories(dir / "masks");
  write_descriptors(dir / "fg.txt", inst.fg);
  write_descriptors(dir / "bg.txt", inst.bg);
  {
    std::ostringstream out;
    for (Index i = 0; i < inst.truth_strong.rows(); ++i) {
      for (Index j = 0; j < inst.truth_strong.cols(); ++j) out << (j ? "," : "") << (inst.truth_strong(i, j) ? 1 : 0);
      out << '\n';
    }
    write_text(dir / "truth_strong.csv", out.str());
  }
  for (std::size_t i = 0; i < inst.fg_truth_masks.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "fg_%04zu.pgm", i + 1);
    write_pgm(dir / "masks" / name, inst.fg_truth_masks[i]);
  }
  KeyValues kv{
      {"num_keypoints", std::to_string(inst.path.num_keypoints)},
      {"radius", format_double(inst.path.radius)},
      {"perturbation", format_double(inst.path.perturbation_fraction)},
      {"frames", std::to_string(inst.path.frames)},
      {"seed", std::to_string(inst.path.seed)},
      {"width", std::to_string(inst.scene.width)},
      {"height", std::to_string(inst.scene.height)},
      {"object_x", format_double(inst.scene.object_x)},
      {"object_y", format_double(inst.scene.object_y)},
      {"object_radius", format_double(inst.scene.object_radius)},
      {"focal", format_double(inst.scene.focal)},
      {"delta", format_double(inst.params.delta)},
      {"epsilon", format_double(inst.params.epsilon)},
      {"psi", format_double(inst.params.psi)},
      {"gamma", std::to_string(inst.params.gamma)},
  };
  write_key_values(dir / "params.cfg", kv);
}

sim::SimInstance read_bundle(const fs::path& dir) {
  const auto kv = read_key_values(dir / "params.cfg");
  auto get = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw IoError((dir / "params.cfg").string() + ": missing key " + key);
    return it->second;
  };
  const std::string where = (dir / "params.cfg").string();
  sim::SimInstance inst;
  inst.path.num_keypoints = static_cast<int>(parse_long(get("num_keypoints"), where));
  inst.path.radius = parse_double(get("radius"), where);
  inst.path.perturbation_fraction = parse_double(get("perturbation"), where);
  inst.path.frames = parse_long(get("frames"), where);
  inst.path.seed = std::stoull(get("seed"));
  inst.scene.width = parse_long(get("width"), where);
  inst.scene.height = parse_long(get("height"), where);
  inst.scene.object_x = parse_double(get("object_x"), where);
  inst.scene.object_y = parse_double(get("object_y"), where);
  inst.scene.object_radius = parse_double(get("object_radius"), where);
  inst.scene.focal = parse_double(get("focal"), where);
  inst.params.delta = parse_double(get("delta"), where);
  inst.params.epsilon = parse_double(get("epsilon"), where);
  inst.params.psi = parse_double(get("psi"), where);
  inst.params.gamma = parse_long(get("gamma"), where);
  inst.fg = read_descriptors(dir / "fg.txt", SequenceKind::foreground);
  inst.bg = read_descriptors(dir / "bg.txt", SequenceKind::background);

  const auto strong = read_matrix_csv(dir / "truth_strong.csv");
  if (strong.rows() != inst.fg.size() || strong.cols() != inst.bg.size())
    throw IoError(dir.string() + ": truth_strong.csv shape mismatch");
  inst.truth_strong = strong.array() > 0.5;
  for (Index i = 1; i <= inst.fg.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "fg_%04lld.pgm", static_cast<long long>(i));
    inst.fg_truth_masks.push_back(read_pgm_mask(dir / "masks" / name));
  }
  return inst;
}

}  // namespace vidmatch::io
