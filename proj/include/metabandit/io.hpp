#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "metabandit/analysis.hpp"
#include "metabandit/metarl.hpp"
#include "metabandit/oracle.hpp"
#include "metabandit/theory.hpp"

namespace metabandit::io {

/// Shortest decimal that round-trips to the same double ('.' separator).
std::string format_double(double v);
double parse_double(const std::string& text);

/// Plain CSV table: one header row, comma separated, LF line endings, no quoting.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;  ///< throws FormatError if absent
};

void write_csv(const std::filesystem::path& file, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& file);

void write_text(const std::filesystem::path& file, const std::string& text);
std::string read_text(const std::filesystem::path& file);

/// Columns: sigma_l, sigma_p, lifetime, n_star, v_star; one row per cell,
/// sigma_l-major.
void write_phase_csv(const std::filesystem::path& file, const theory::PhaseDiagram& diagram);
theory::PhaseDiagram read_phase_csv(const std::filesystem::path& file);

/// {sigma_l_grid, sigma_p_grid, lifetime, prior_mean, n_star, v_star}; matrices row-major.
std::string phase_json(const theory::PhaseDiagram& diagram);
theory::PhaseDiagram parse_phase_json(const std::string& text);

/// {config: {sigma_l, sigma_p, lifetime, prior_mean}, n, mean, se, episodes}.
std::string oracle_record_json(const bandit::BanditConfig& config, int n, const oracle::McEstimate& estimate);

inline const std::vector<std::string> kMetricsColumns = {
    "update", "episodes_seen", "mean_return", "loss_pi", "loss_v", "loss_e", "beta_e", "gamma", "grad_norm"};

/// Append-only metrics.csv writer. On resume, rows with update >= first_update
/// are dropped so the file matches an uninterrupted run.
class MetricsWriter {
 public:
  MetricsWriter(const std::filesystem::path& file, bool resume, long long first_update);
  void append(const metarl::MetricsRow& row);

 private:
  std::ofstream out_;
};

std::vector<metarl::MetricsRow> read_metrics(const std::filesystem::path& file);

/// Columns x, y, count; one row per cell, y-major from the bottom row.
void write_occupancy_csv(const std::filesystem::path& file, const analysis::OccupancyMap& map);
analysis::OccupancyMap read_occupancy_csv(const std::filesystem::path& file);

/// Columns episode, t, pc1..pck.
void write_projection_csv(const std::filesystem::path& file, const analysis::HiddenMatrix& hidden,
                          const analysis::PcaResult& pca);

/// {width, height, start, episodes: [{small_goal, medium_goal, high_goal, path,
/// actions, rewards, goals}]}; cells are [x, y] pairs, path[t] is the cell
/// before step t.
std::string trajectories_json(const gridworld::GridConfig& config, std::span<const metarl::EpisodeTrace> traces);

}  // namespace metabandit::io
