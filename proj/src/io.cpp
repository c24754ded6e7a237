#include "mlqd/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <regex>
#include <set>
#include <sstream>

namespace mlqd {

namespace {

namespace fs = std::filesystem;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

std::string where(int line) { return "line " + std::to_string(line) + ": "; }

double parse_double(const std::string& s, int line) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v))
    throw ConfigError(where(line) + "expected a number, got '" + s + "'");
  return v;
}

double parse_positive(const std::string& s, int line) {
  const double v = parse_double(s, line);
  if (!(v > 0.0)) throw ConfigError(where(line) + "value must be positive, got '" + s + "'");
  return v;
}

int parse_int(const std::string& s, int line, int minimum) {
  int v = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError(where(line) + "expected an integer, got '" + s + "'");
  if (v < minimum)
    throw ConfigError(where(line) + "value must be at least " + std::to_string(minimum));
  return v;
}

bool parse_bool(const std::string& s, int line) {
  if (s == "true" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "no" || s == "0") return false;
  throw ConfigError(where(line) + "expected true or false, got '" + s + "'");
}

BoundaryCondition parse_boundary(const std::string& s, int line) {
  std::istringstream in(s);
  std::string kind;
  in >> kind;
  std::string rest;
  std::getline(in, rest);
  rest = trim(rest);
  if (kind == "vacuum" && rest.empty()) return {BoundaryKind::vacuum, 0.0};
  if (kind == "reflective" && rest.empty()) return {BoundaryKind::reflective, 0.0};
  if (kind == "blackbody" && !rest.empty())
    return {BoundaryKind::blackbody, parse_positive(rest, line)};
  throw ConfigError(where(line) +
                    "boundary must be 'vacuum', 'reflective' or 'blackbody <T>', got '" + s + "'");
}

struct Handler {
  bool required;
  std::function<void(RunConfig&, const std::string&, int)> apply;
};

const std::map<std::string, Handler>& handlers() {
  static const std::map<std::string, Handler> table = {
      {"mesh.nx", {true, [](RunConfig& c, const std::string& v, int l) { c.nx = parse_int(v, l, 1); }}},
      {"mesh.ny", {true, [](RunConfig& c, const std::string& v, int l) { c.ny = parse_int(v, l, 1); }}},
      {"mesh.lx", {true, [](RunConfig& c, const std::string& v, int l) { c.lx = parse_positive(v, l); }}},
      {"mesh.ly", {true, [](RunConfig& c, const std::string& v, int l) { c.ly = parse_positive(v, l); }}},
      {"groups.count",
       {true, [](RunConfig& c, const std::string& v, int l) { c.group_count = parse_int(v, l, 1); }}},
      {"groups.min",
       {false, [](RunConfig& c, const std::string& v, int l) { c.group_min = parse_positive(v, l); }}},
      {"groups.max",
       {false, [](RunConfig& c, const std::string& v, int l) { c.group_max = parse_positive(v, l); }}},
      {"groups.bounds",
       {false,
        [](RunConfig& c, const std::string& v, int l) {
          c.group_bounds.clear();
          for (const auto& item : split(v, ',')) c.group_bounds.push_back(parse_positive(item, l));
          if (c.group_bounds.size() < 2 ||
              !std::is_sorted(c.group_bounds.begin(), c.group_bounds.end(), std::less_equal<>()))
            throw ConfigError(where(l) + "group bounds must be at least two increasing values");
        }}},
      {"quadrature.layout",
       {false,
        [](RunConfig& c, const std::string& v, int l) {
          if (v == "product") c.quadrature.layout = QuadratureSpec::Layout::product;
          else if (v == "triangular") c.quadrature.layout = QuadratureSpec::Layout::triangular;
          else throw ConfigError(where(l) + "layout must be 'product' or 'triangular'");
        }}},
      {"quadrature.polar",
       {false, [](RunConfig& c, const std::string& v, int l) { c.quadrature.polar = parse_int(v, l, 1); }}},
      {"quadrature.azimuthal",
       {false,
        [](RunConfig& c, const std::string& v, int l) { c.quadrature.azimuthal = parse_int(v, l, 1); }}},
      {"time.dt", {true, [](RunConfig& c, const std::string& v, int l) { c.dt = parse_positive(v, l); }}},
      {"time.t_end", {true, [](RunConfig& c, const std::string& v, int l) { c.t_end = parse_positive(v, l); }}},
      {"time.block_length",
       {true, [](RunConfig& c, const std::string& v, int l) { c.block_length = parse_positive(v, l); }}},
      {"material.opacity",
       {false,
        [](RunConfig& c, const std::string& v, int l) {
          if (v == "fleck_cummings") c.opacity = FleckCummingsOpacity{};
          else if (v == "constant") c.opacity = ConstantOpacity{};
          else throw ConfigError(where(l) + "opacity must be 'fleck_cummings' or 'constant'");
        }}},
      {"material.opacity_coefficient",
       {false,
        [](RunConfig& c, const std::string& v, int l) { c.opacity_coefficient = parse_positive(v, l); }}},
      {"material.cv_factor",
       {true, [](RunConfig& c, const std::string& v, int l) { c.cv_factor = parse_positive(v, l); }}},
      {"material.initial_temperature",
       {false,
        [](RunConfig& c, const std::string& v, int l) { c.initial_temperature = parse_positive(v, l); }}},
      {"boundary.left",
       {false, [](RunConfig& c, const std::string& v, int l) { c.boundaries[0] = parse_boundary(v, l); }}},
      {"boundary.right",
       {false, [](RunConfig& c, const std::string& v, int l) { c.boundaries[1] = parse_boundary(v, l); }}},
      {"boundary.bottom",
       {false, [](RunConfig& c, const std::string& v, int l) { c.boundaries[2] = parse_boundary(v, l); }}},
      {"boundary.top",
       {false, [](RunConfig& c, const std::string& v, int l) { c.boundaries[3] = parse_boundary(v, l); }}},
      {"solver.epsilon",
       {false,
        [](RunConfig& c, const std::string& v, int l) { c.criteria.epsilon = parse_positive(v, l); }}},
      {"solver.inner_epsilon",
       {false,
        [](RunConfig& c, const std::string& v, int l) { c.criteria.inner_epsilon = parse_positive(v, l); }}},
      {"solver.max_outer",
       {false, [](RunConfig& c, const std::string& v, int l) { c.criteria.max_outer = parse_int(v, l, 1); }}},
      {"solver.max_inner",
       {false, [](RunConfig& c, const std::string& v, int l) { c.criteria.max_inner = parse_int(v, l, 1); }}},
      {"solver.drift_reference",
       {false,
        [](RunConfig& c, const std::string& v, int l) {
          if (v == "flux_weighted") c.criteria.drift = DriftReference::flux_weighted;
          else if (v == "rosseland") c.criteria.drift = DriftReference::rosseland;
          else throw ConfigError(where(l) + "drift_reference must be 'flux_weighted' or 'rosseland'");
        }}},
      {"output.directory",
       {false,
        [](RunConfig& c, const std::string& v, int l) {
          if (v.empty()) throw ConfigError(where(l) + "empty output directory");
          c.output_directory = v;
        }}},
      {"output.save_every",
       {false, [](RunConfig& c, const std::string& v, int l) { c.save_every = parse_int(v, l, 1); }}},
      {"output.iterates",
       {false, [](RunConfig& c, const std::string& v, int l) { c.save_iterates = parse_bool(v, l); }}},
      {"output.binary",
       {false, [](RunConfig& c, const std::string& v, int l) { c.binary_fields = parse_bool(v, l); }}},
      {"output.multi_step",
       {false, [](RunConfig& c, const std::string& v, int l) { c.track_multi_step = parse_bool(v, l); }}},
      {"output.reference", {false, [](RunConfig& c, const std::string& v, int) { c.reference = v; }}},
  };
  return table;
}

std::vector<double> parse_row(const std::string& line, const fs::path& file, int number) {
  std::vector<double> row;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    const std::size_t next = std::min(line.find(',', pos), line.size());
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(line.data() + pos, line.data() + next, v);
    if (ec != std::errc() || ptr != line.data() + next)
      throw std::runtime_error(file.string() + ":" + std::to_string(number) + ": bad number");
    row.push_back(v);
    pos = next + 1;
  }
  return row;
}

std::ofstream open_output(const fs::path& file) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  return out;
}

std::ifstream open_input(const fs::path& file, bool binary = false) {
  std::ifstream in(file, binary ? std::ios::binary : std::ios::in);
  if (!in) throw std::runtime_error("cannot read " + file.string());
  return in;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig config;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string content = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (content.empty()) continue;
    if (content.front() == '[') {
      if (content.back() != ']') throw ConfigError(where(line) + "malformed section header");
      section = trim(content.substr(1, content.size() - 2));
      static const std::set<std::string> sections = {"mesh",     "groups",   "quadrature",
                                                     "time",     "material", "boundary",
                                                     "solver",   "output"};
      if (!sections.count(section)) throw ConfigError(where(line) + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = content.find('=');
    if (eq == std::string::npos) throw ConfigError(where(line) + "expected 'key = value'");
    if (section.empty()) throw ConfigError(where(line) + "key outside of a section");
    const std::string key = section + "." + trim(content.substr(0, eq));
    const std::string value = trim(content.substr(eq + 1));
    const auto it = handlers().find(key);
    if (it == handlers().end()) throw ConfigError(where(line) + "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(where(line) + "duplicate key '" + key + "'");
    it->second.apply(config, value, line);
  }

  std::vector<std::string> missing;
  for (const auto& [key, handler] : handlers()) {
    if (!handler.required || seen.count(key)) continue;
    if (key == "groups.count" && seen.count("groups.bounds")) continue;
    missing.push_back(key);
  }
  if (!missing.empty()) {
    std::string msg = "missing required keys:";
    for (const auto& k : missing) msg += " " + k;
    throw ConfigError(msg);
  }
  if (seen.count("groups.bounds")) {
    const int n = static_cast<int>(config.group_bounds.size()) - 1;
    if (seen.count("groups.count") && config.group_count != n)
      throw ConfigError("groups.count disagrees with groups.bounds");
    config.group_count = n;
  } else if (!(config.group_min < config.group_max)) {
    throw ConfigError("groups.min must be below groups.max");
  }
  if (config.opacity_coefficient > 0.0) {
    if (auto* fc = std::get_if<FleckCummingsOpacity>(&config.opacity)) fc->coefficient = config.opacity_coefficient;
    else if (auto* cst = std::get_if<ConstantOpacity>(&config.opacity)) cst->value = config.opacity_coefficient;
  }
  try {
    build_time_blocks(config.dt, config.t_end, config.block_length);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("time: ") + e.what());
  }
  return config;
}

RunConfig load_config(const fs::path& path) {
  auto in = open_input(path);
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_config(text.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

ProblemSetup make_setup(const RunConfig& config) {
  SpatialMesh mesh(config.nx, config.ny, config.lx, config.ly);
  FrequencyGroups groups = config.group_bounds.empty()
                               ? FrequencyGroups::log_spaced(config.group_count, config.group_min,
                                                             config.group_max)
                               : FrequencyGroups(config.group_bounds);
  Discretization disc(std::move(mesh), build_quadrature(config.quadrature), std::move(groups),
                      config.boundaries);
  MaterialModel material(config.cv_factor * kRadiationConstant, config.opacity);
  return {std::move(disc), std::move(material),
          build_time_blocks(config.dt, config.t_end, config.block_length),
          config.initial_temperature};
}

std::string format_double(double value) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

void write_fields(const fs::path& file, const StepFields& fields) {
  auto out = open_output(file);
  const std::size_t cells = fields.temperature.size();
  const std::size_t groups = cells ? fields.group_energy.size() / cells : 0;
  out << "cell,T,E";
  for (std::size_t g = 0; g < groups; ++g) out << ",E_" << g;
  out << '\n';
  for (std::size_t c = 0; c < cells; ++c) {
    out << c << ',' << format_double(fields.temperature[c]) << ','
        << format_double(fields.energy[c]);
    for (std::size_t g = 0; g < groups; ++g)
      out << ',' << format_double(fields.group_energy[g * cells + c]);
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + file.string());
}

StepFields read_fields(const fs::path& file) {
  auto in = open_input(file);
  std::string line;
  if (!std::getline(in, line) || line.rfind("cell,T,E", 0) != 0)
    throw std::runtime_error(file.string() + ": not a field file");
  const std::size_t groups = split(line, ',').size() - 3;
  std::vector<std::vector<double>> rows;
  int number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    auto row = parse_row(line, file, number);
    if (row.size() != groups + 3 || row[0] != static_cast<double>(rows.size()))
      throw std::runtime_error(file.string() + ":" + std::to_string(number) + ": bad row");
    rows.push_back(std::move(row));
  }
  const std::size_t cells = rows.size();
  StepFields f;
  f.temperature.resize(cells);
  f.energy.resize(cells);
  f.group_energy.resize(groups * cells);
  for (std::size_t c = 0; c < cells; ++c) {
    f.temperature[c] = rows[c][1];
    f.energy[c] = rows[c][2];
    for (std::size_t g = 0; g < groups; ++g) f.group_energy[g * cells + c] = rows[c][3 + g];
  }
  return f;
}

void write_fields_binary(const fs::path& file, const StepFields& fields) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  const std::uint64_t cells = fields.temperature.size();
  const std::uint64_t groups = cells ? fields.group_energy.size() / cells : 0;
  out.write(reinterpret_cast<const char*>(&cells), sizeof cells);
  out.write(reinterpret_cast<const char*>(&groups), sizeof groups);
  auto put = [&](const std::vector<double>& v) {
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  };
  put(fields.temperature);
  put(fields.energy);
  put(fields.group_energy);
  if (!out) throw std::runtime_error("write failed: " + file.string());
}

StepFields read_fields_binary(const fs::path& file) {
  auto in = open_input(file, true);
  std::uint64_t cells = 0, groups = 0;
  in.read(reinterpret_cast<char*>(&cells), sizeof cells);
  in.read(reinterpret_cast<char*>(&groups), sizeof groups);
  StepFields f;
  auto get = [&](std::vector<double>& v, std::size_t n) {
    v.resize(n);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  };
  get(f.temperature, cells);
  get(f.energy, cells);
  get(f.group_energy, cells * groups);
  if (!in) throw std::runtime_error(file.string() + ": truncated field dump");
  return f;
}

std::map<int, StepFields> read_run_fields(const fs::path& directory) {
  if (!fs::is_directory(directory)) throw std::runtime_error("not a directory: " + directory.string());
  static const std::regex pattern(R"(fields_(\d+)\.csv)");
  std::map<int, StepFields> out;
  for (const auto& entry : fs::directory_iterator(directory)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) out[std::stoi(m[1])] = read_fields(entry.path());
  }
  if (out.empty()) throw std::runtime_error("no field files in " + directory.string());
  return out;
}

std::vector<StepFields> read_reference(const fs::path& directory, int steps) {
  std::vector<StepFields> out;
  out.reserve(steps + 1);
  for (int n = 0; n <= steps; ++n)
    out.push_back(read_fields(directory / ("fields_" + std::to_string(n) + ".csv")));
  return out;
}

void write_iterates(const fs::path& file, const std::vector<IterateFields>& iterates) {
  auto out = open_output(file);
  out << "block,outer,step,cell,E,T\n";
  for (const auto& it : iterates)
    for (std::size_t c = 0; c < it.energy.size(); ++c)
      out << it.block << ',' << it.outer << ',' << it.step << ',' << c << ','
          << format_double(it.energy[c]) << ',' << format_double(it.temperature[c]) << '\n';
  if (!out) throw std::runtime_error("write failed: " + file.string());
}

std::vector<IterateFields> read_iterates(const fs::path& file) {
  auto in = open_input(file);
  std::string line;
  std::getline(in, line);
  std::vector<IterateFields> out;
  int number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    const auto row = parse_row(line, file, number);
    if (row.size() != 6) throw std::runtime_error(file.string() + ": bad iterate row");
    const int b = static_cast<int>(row[0]), j = static_cast<int>(row[1]), n = static_cast<int>(row[2]);
    if (out.empty() || out.back().block != b || out.back().outer != j || out.back().step != n)
      out.push_back({b, j, n, {}, {}});
    out.back().energy.push_back(row[4]);
    out.back().temperature.push_back(row[5]);
  }
  return out;
}

void write_rates(const fs::path& file, int block_steps, const ConvergenceRate& rate) {
  auto out = open_output(file);
  out << "block_steps,rho_E,rho_T\n"
      << block_steps << ',' << format_double(rate.energy) << ',' << format_double(rate.temperature)
      << '\n';
}

void write_outputs(const RunConfig& config, const ProblemSetup& setup, const RunRecord& record) {
  const fs::path dir = config.output_directory;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());

  const int steps = setup.time.steps();
  for (int n = 0; n <= steps; ++n) {
    if (n % config.save_every != 0 && n != steps) continue;
    write_fields(dir / ("fields_" + std::to_string(n) + ".csv"), record.fields[n]);
    if (config.binary_fields)
      write_fields_binary(dir / ("fields_" + std::to_string(n) + ".bin"), record.fields[n]);
  }

  {
    auto out = open_output(dir / "itercount.csv");
    out << "block,block_steps,outer_iterations,multi_step_residual\n";
    for (const auto& b : record.blocks)
      out << b.block << ',' << b.steps << ',' << b.outer_iterations << ','
          << format_double(b.multi_step_residual) << '\n';
  }

  const bool with_errors = !config.reference.empty();
  {
    auto out = open_output(dir / "conv.csv");
    out << "block,outer,step,xi_E,xi_T";
    if (with_errors) out << ",error_E,error_T";
    out << '\n';
    for (const auto& r : record.iterations) {
      out << r.block << ',' << r.outer << ',' << r.step << ',' << format_double(r.xi_e) << ','
          << format_double(r.xi_t);
      if (with_errors) out << ',' << format_double(r.error_e) << ',' << format_double(r.error_t);
      out << '\n';
    }
  }

  {
    auto out = open_output(dir / "conservation.csv");
    out << "step,residual\n";
    for (int n = 1; n <= steps; ++n) out << n << ',' << format_double(record.conservation[n]) << '\n';
  }

  if (config.save_iterates) write_iterates(dir / "iterates.csv", record.iterates);
}

}  // namespace mlqd
