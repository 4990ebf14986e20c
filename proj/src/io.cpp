#include "metabandit/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "metabandit/errors.hpp"

namespace metabandit::io {
namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
  double v = 0.0;
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  if (begin != end && *begin == '+') ++begin;
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end) throw FormatError("not a number: '" + text + "'");
  return v;
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t k = 0; k < header.size(); ++k)
    if (header[k] == name) return k;
  throw FormatError("CSV has no column '" + name + "'");
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

void join(std::ostream& out, const std::vector<std::string>& cells) {
  for (std::size_t k = 0; k < cells.size(); ++k) {
    if (k) out << ',';
    out << cells[k];
  }
  out << '\n';
}

}  // namespace

void write_csv(const fs::path& file, const CsvTable& table) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + file.string());
  join(out, table.header);
  for (const auto& row : table.rows) join(out, row);
}

CsvTable read_csv(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw FormatError("cannot read " + file.string());
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw FormatError(file.string() + " is empty");
  table.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto row = split(line);
    if (row.size() != table.header.size())
      throw FormatError(file.string() + ": row has " + std::to_string(row.size()) + " cells, header has " +
                        std::to_string(table.header.size()));
    table.rows.push_back(std::move(row));
  }
  return table;
}

void write_text(const fs::path& file, const std::string& text) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + file.string());
  out << text;
}

std::string read_text(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw FormatError("cannot read " + file.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_phase_csv(const fs::path& file, const theory::PhaseDiagram& d) {
  CsvTable t;
  t.header = {"sigma_l", "sigma_p", "lifetime", "n_star", "v_star"};
  for (int i = 0; i < d.rows(); ++i)
    for (int j = 0; j < d.cols(); ++j)
      t.rows.push_back({format_double(d.sigma_l_grid[i]), format_double(d.sigma_p_grid[j]),
                        std::to_string(d.lifetime), std::to_string(d.n_star_at(i, j)),
                        format_double(d.v_star_at(i, j))});
  write_csv(file, t);
}

theory::PhaseDiagram read_phase_csv(const fs::path& file) {
  const CsvTable t = read_csv(file);
  const auto cl = t.column("sigma_l"), cp = t.column("sigma_p"), ct = t.column("lifetime"),
             cn = t.column("n_star"), cv = t.column("v_star");
  theory::PhaseDiagram d;
  if (t.rows.empty()) throw FormatError(file.string() + " has no cells");
  d.lifetime = std::stoi(t.rows[0][ct]);
  for (const auto& row : t.rows) {
    const double sl = parse_double(row[cl]);
    const double sp = parse_double(row[cp]);
    if (d.sigma_l_grid.empty() || d.sigma_l_grid.back() != sl) d.sigma_l_grid.push_back(sl);
    if (d.sigma_l_grid.size() == 1) d.sigma_p_grid.push_back(sp);
    d.n_star.push_back(std::stoi(row[cn]));
    d.v_star.push_back(parse_double(row[cv]));
  }
  if (d.n_star.size() != d.sigma_l_grid.size() * d.sigma_p_grid.size())
    throw FormatError(file.string() + " is not a complete sigma_l x sigma_p grid");
  return d;
}

std::string phase_json(const theory::PhaseDiagram& d) {
  json j = {{"sigma_l_grid", d.sigma_l_grid}, {"sigma_p_grid", d.sigma_p_grid}, {"lifetime", d.lifetime},
            {"prior_mean", d.prior_mean},     {"rows", d.rows()},                 {"cols", d.cols()},
            {"n_star", d.n_star},             {"v_star", d.v_star}};
  return j.dump(2) + "\n";
}

theory::PhaseDiagram parse_phase_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    theory::PhaseDiagram d;
    d.sigma_l_grid = j.at("sigma_l_grid").get<std::vector<double>>();
    d.sigma_p_grid = j.at("sigma_p_grid").get<std::vector<double>>();
    d.lifetime = j.at("lifetime").get<int>();
    d.prior_mean = j.value("prior_mean", -1.0);
    d.n_star = j.at("n_star").get<std::vector<int>>();
    d.v_star = j.at("v_star").get<std::vector<double>>();
    if (d.n_star.size() != d.sigma_l_grid.size() * d.sigma_p_grid.size() || d.v_star.size() != d.n_star.size())
      throw FormatError("phase diagram matrices do not match the grids");
    return d;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed phase diagram JSON: ") + e.what());
  }
}

std::string oracle_record_json(const bandit::BanditConfig& c, int n, const oracle::McEstimate& e) {
  json j = {{"config",
             {{"sigma_l", c.sigma_l}, {"sigma_p", c.sigma_p}, {"lifetime", c.lifetime}, {"prior_mean", c.prior_mean}}},
            {"n", n},
            {"mean", e.mean},
            {"se", e.std_error},
            {"episodes", e.episodes}};
  return j.dump();
}

MetricsWriter::MetricsWriter(const fs::path& file, bool resume, long long first_update) {
  std::vector<std::string> kept;
  if (resume && fs::exists(file)) {
    std::ifstream in(file, std::ios::binary);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (std::stoll(line.substr(0, line.find(','))) < first_update) kept.push_back(line);
    }
  }
  out_.open(file, std::ios::binary | std::ios::trunc);
  if (!out_) throw FormatError("cannot write " + file.string());
  join(out_, kMetricsColumns);
  for (const auto& line : kept) out_ << line << '\n';
  out_.flush();
}

void MetricsWriter::append(const metarl::MetricsRow& r) {
  join(out_, {std::to_string(r.update), std::to_string(r.episodes_seen), format_double(r.mean_return),
              format_double(r.loss_pi), format_double(r.loss_v), format_double(r.loss_e), format_double(r.beta_e),
              format_double(r.gamma), format_double(r.grad_norm)});
  out_.flush();
}

std::vector<metarl::MetricsRow> read_metrics(const fs::path& file) {
  const CsvTable t = read_csv(file);
  if (t.header != kMetricsColumns) throw FormatError(file.string() + " does not have the metrics columns");
  std::vector<metarl::MetricsRow> rows;
  for (const auto& c : t.rows) {
    metarl::MetricsRow r;
    r.update = std::stoll(c[0]);
    r.episodes_seen = std::stoll(c[1]);
    r.mean_return = parse_double(c[2]);
    r.loss_pi = parse_double(c[3]);
    r.loss_v = parse_double(c[4]);
    r.loss_e = parse_double(c[5]);
    r.beta_e = parse_double(c[6]);
    r.gamma = parse_double(c[7]);
    r.grad_norm = parse_double(c[8]);
    rows.push_back(r);
  }
  return rows;
}

void write_occupancy_csv(const fs::path& file, const analysis::OccupancyMap& map) {
  CsvTable t{{"x", "y", "count"}, {}};
  for (int y = 0; y < map.height; ++y)
    for (int x = 0; x < map.width; ++x)
      t.rows.push_back({std::to_string(x), std::to_string(y), format_double(map.at(x, y))});
  write_csv(file, t);
}

analysis::OccupancyMap read_occupancy_csv(const fs::path& file) {
  const CsvTable t = read_csv(file);
  const std::size_t cx = t.column("x"), cy = t.column("y"), cc = t.column("count");
  analysis::OccupancyMap map;
  for (const auto& row : t.rows) {
    map.width = std::max(map.width, std::stoi(row[cx]) + 1);
    map.height = std::max(map.height, std::stoi(row[cy]) + 1);
  }
  map.counts.assign(static_cast<std::size_t>(map.width) * map.height, 0.0);
  double total = 0.0;
  for (const auto& row : t.rows) {
    const double c = parse_double(row[cc]);
    map.counts[static_cast<std::size_t>(std::stoi(row[cy])) * map.width + std::stoi(row[cx])] = c;
    total += c;
  }
  map.normalized = std::abs(total - 1.0) < 1e-9;
  return map;
}

void write_projection_csv(const fs::path& file, const analysis::HiddenMatrix& hidden, const analysis::PcaResult& pca) {
  CsvTable t{{"episode", "t"}, {}};
  for (Eigen::Index k = 0; k < pca.projected.cols(); ++k) t.header.push_back("pc" + std::to_string(k + 1));
  for (Eigen::Index r = 0; r < pca.projected.rows(); ++r) {
    std::vector<std::string> row{std::to_string(hidden.episode_ids[r]), std::to_string(hidden.steps[r])};
    for (Eigen::Index k = 0; k < pca.projected.cols(); ++k) row.push_back(format_double(pca.projected(r, k)));
    t.rows.push_back(std::move(row));
  }
  write_csv(file, t);
}

std::string trajectories_json(const gridworld::GridConfig& config, std::span<const metarl::EpisodeTrace> traces) {
  auto xy = [&](int index) {
    const auto c = config.cell(index);
    return json::array({c.x, c.y});
  };
  json episodes = json::array();
  for (const auto& tr : traces) {
    json e;
    if (tr.goal_cells.size() == 3) {
      e["small_goal"] = xy(tr.goal_cells[0]);
      e["medium_goal"] = xy(tr.goal_cells[1]);
      e["high_goal"] = xy(tr.goal_cells[2]);
    }
    json path = json::array();
    for (int p : tr.positions) path.push_back(xy(p));
    e["path"] = std::move(path);
    e["actions"] = tr.actions;
    e["rewards"] = tr.rewards;
    e["goals"] = tr.goals;
    episodes.push_back(std::move(e));
  }
  json out;
  out["width"] = config.width;
  out["height"] = config.height;
  out["start"] = json::array({config.start.x, config.start.y});
  out["episodes"] = std::move(episodes);
  return out.dump(1);
}

}  // namespace metabandit::io
