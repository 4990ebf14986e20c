#include <cmath>
#include <filesystem>
#include <fstream>
#include <cstring>
#include <limits>

#include "doctest.h"
#include "json.hpp"
#include "metabandit/checkpoint.hpp"
#include "metabandit/config.hpp"
#include "metabandit/errors.hpp"
#include "metabandit/io.hpp"

using namespace metabandit;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("metabandit_io_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("doubles round-trip through text") {
  for (double v : {0.0, -1.0, 0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -2.5e-7}) {
    CHECK(io::parse_double(io::format_double(v)) == v);
    CHECK(io::format_double(v).find(',') == std::string::npos);
  }
  CHECK(io::format_double(0.5) == "0.5");
  CHECK_THROWS_AS(io::parse_double("abc"), FormatError);
}

TEST_CASE("csv round-trip") {
  const fs::path f = scratch("table.csv");
  io::CsvTable t{{"a", "b"}, {{"1", "x"}, {"2.5", "y"}}};
  io::write_csv(f, t);
  const std::string raw = io::read_text(f);
  CHECK(raw == "a,b\n1,x\n2.5,y\n");
  const auto back = io::read_csv(f);
  CHECK(back.header == t.header);
  CHECK(back.rows == t.rows);
  CHECK(back.column("b") == 1);
  CHECK_THROWS_AS(back.column("zzz"), FormatError);
  fs::remove(f);
  CHECK_THROWS(io::read_csv(f));
}

TEST_CASE("phase diagram csv and json round-trip") {
  theory::PhaseDiagram d;
  d.sigma_l_grid = {0.1, 1.0};
  d.sigma_p_grid = {0.5, 2.0, 3.0};
  d.lifetime = 100;
  d.n_star = {0, 3, 5, 0, 0, 1};
  d.v_star = {0.0, 1.5, 2.25, 0.0, 0.0, 1.0 / 3.0};
  const fs::path f = scratch("phase.csv");
  io::write_phase_csv(f, d);
  const auto text = io::read_text(f);
  CHECK(text.substr(0, text.find('\n')) == "sigma_l,sigma_p,lifetime,n_star,v_star");
  CHECK(std::count(text.begin(), text.end(), '\n') == 7);
  CHECK(text.find('\r') == std::string::npos);
  const auto back = io::read_phase_csv(f);
  CHECK(back.sigma_l_grid == d.sigma_l_grid);
  CHECK(back.sigma_p_grid == d.sigma_p_grid);
  CHECK(back.n_star == d.n_star);
  CHECK(back.v_star == d.v_star);
  CHECK(back.lifetime == 100);

  const auto js = io::phase_json(d);
  const auto parsed = nlohmann::json::parse(js);
  CHECK(parsed["n_star"].size() == 6);
  const auto jb = io::parse_phase_json(js);
  CHECK(jb.n_star == d.n_star);
  CHECK(jb.v_star == d.v_star);
  CHECK(jb.sigma_p_grid == d.sigma_p_grid);
  fs::remove(f);
}

TEST_CASE("oracle record json") {
  const auto js = nlohmann::json::parse(
      io::oracle_record_json(bandit::BanditConfig{2.0, 1.0, 100, -1.0}, 10, oracle::McEstimate{24.8, 0.09, 1000000}));
  CHECK(js["config"]["sigma_p"] == 2.0);
  CHECK(js["n"] == 10);
  CHECK(js["mean"] == 24.8);
  CHECK(js["se"] == 0.09);
  CHECK(js["episodes"] == 1000000);
}

TEST_CASE("metrics log round-trip and resume truncation") {
  const fs::path f = scratch("metrics.csv");
  {
    io::MetricsWriter w(f, false, 0);
    for (int u = 0; u < 5; ++u) w.append(metarl::MetricsRow{u, 2 * (u + 1), 0.5 * u, 0.1, 0.2, 0.3, 1.0, 0.4, 1.0 / 7.0});
  }
  auto rows = io::read_metrics(f);
  REQUIRE(rows.size() == 5);
  CHECK(rows[3].mean_return == 1.5);
  CHECK(rows[4].grad_norm == 1.0 / 7.0);
  {
    io::MetricsWriter w(f, true, 3);
    w.append(metarl::MetricsRow{3, 8, 9.0, 0, 0, 0, 0, 0, 0});
  }
  rows = io::read_metrics(f);
  REQUIRE(rows.size() == 4);
  CHECK(rows[3].mean_return == 9.0);
  const auto header = io::read_text(f).substr(0, io::read_text(f).find('\n'));
  CHECK(header == "update,episodes_seen,mean_return,loss_pi,loss_v,loss_e,beta_e,gamma,grad_norm");
  fs::remove(f);
}

TEST_CASE("key-value config parsing") {
  const auto kv = config::parse_key_values("# comment\n sigma_l = 0.1 \n\nsigma_p=2 # trailing\nseed=3\nseed=4\n");
  CHECK(kv.at("sigma_l") == "0.1");
  CHECK(kv.at("sigma_p") == "2");
  CHECK(kv.at("seed") == "4");
  CHECK_THROWS_AS(config::parse_key_values("just words\n"), ConfigError);

  const auto cfg = config::train_config_from(kv);
  const auto& env = std::get<bandit::BanditConfig>(cfg.env);
  CHECK(env.sigma_l == 0.1);
  CHECK(env.sigma_p == 2.0);
  CHECK(env.lifetime == 30);
  CHECK(cfg.seed == 4);
  CHECK(cfg.episodes_total == 20000);
  CHECK_THROWS_AS(config::train_config_from({{"nonsense", "1"}}), ConfigError);
  CHECK_THROWS_AS(config::train_config_from({{"seed", "x"}}), ConfigError);

  const auto full = config::train_config_from({{"profile", "full"}});
  CHECK(full.episodes_total == 30000);
  CHECK(std::get<bandit::BanditConfig>(full.env).lifetime == 100);
  const auto grid = config::train_config_from({{"env", "grid"}, {"lifetime", "10"}});
  CHECK(std::get<gridworld::GridConfig>(grid.env).lifetime == 10);
  CHECK(grid.workers == 7);
}

TEST_CASE("train config round-trips through key-values") {
  auto cfg = metarl::TrainConfig::bandit_desk(0.37, 1.9);
  cfg.seed = 18446744073709551557ull;
  cfg.optimizer.lr = 3.3e-4;
  cfg.discount.shape = metarl::ScheduleShape::kLinear;
  const auto text = config::format_key_values(config::to_key_values(cfg));
  const auto back = config::train_config_from(config::parse_key_values(text));
  CHECK(config::to_key_values(back) == config::to_key_values(cfg));
  CHECK(back.optimizer.lr == 3.3e-4);
  CHECK(back.seed == cfg.seed);

  auto grid = metarl::TrainConfig::grid_desk(50);
  std::get<gridworld::GridConfig>(grid.env).reward_high = 12.5;
  const auto gback = config::train_config_from(config::to_key_values(grid));
  CHECK(std::get<gridworld::GridConfig>(gback.env).reward_high == 12.5);
  CHECK(config::to_key_values(gback) == config::to_key_values(grid));
}

TEST_CASE("grid specs") {
  CHECK(config::parse_grid_spec("0:0:1:lin") == std::vector<double>{0.0});
  const auto lin = config::parse_grid_spec("1:3:3:lin");
  CHECK(lin == std::vector<double>{1.0, 2.0, 3.0});
  const auto lg = config::parse_grid_spec("0.1:10:20:log");
  REQUIRE(lg.size() == 20);
  CHECK(lg.front() == 0.1);
  CHECK(lg.back() == doctest::Approx(10.0).epsilon(1e-14));
  CHECK(lg[1] / lg[0] == doctest::Approx(lg[19] / lg[18]).epsilon(1e-12));
  for (const char* bad : {"", "1:2:3", "1:2:0:lin", "a:2:3:lin", "1:2:3:cubic", "0:1:3:log", "2:1:3:lin", "1:2:3:lin:x"})
    CHECK_THROWS_AS(config::parse_grid_spec(bad), ConfigError);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  Rng rng(9);
  nn::NetDims d{4, 5, 2};
  checkpoint::Checkpoint ck;
  ck.params = nn::init_params(d, rng);
  ck.params.flat()[3] = std::nextafter(1.0, 2.0);
  ck.params.flat()[4] = -0.0;
  ck.params.flat()[5] = std::numeric_limits<double>::denorm_min();
  nn::OptimizerState opt(nn::AdamConfig{}, ck.params.flat().size());
  opt.m.setConstant(1.0 / 3.0);
  opt.v.setConstant(1e-12);
  opt.step = 17;
  ck.optimizer = opt;
  ck.episodes_seen = 34;
  ck.updates = 17;
  ck.beta_e = 0.25;
  ck.gamma = 0.9;
  ck.config = {{"seed", "5"}};
  const fs::path dir = scratch("ckpt");
  checkpoint::save(dir, ck);
  CHECK(fs::file_size(dir / "params.bin") == 8 * nn::param_count(d));

  const auto back = checkpoint::load(dir);
  CHECK(back.params.dims() == d);
  CHECK(std::memcmp(back.params.flat().data(), ck.params.flat().data(), 8 * nn::param_count(d)) == 0);
  CHECK(std::signbit(back.params.flat()[4]));
  REQUIRE(back.optimizer.has_value());
  CHECK(back.optimizer->m == opt.m);
  CHECK(back.optimizer->v == opt.v);
  CHECK(back.optimizer->step == 17);
  CHECK(back.episodes_seen == 34);
  CHECK(back.gamma == 0.9);
  CHECK(back.config.at("seed") == "5");

  // Blob layout: little-endian float64 in manifest order.
  std::ifstream in(dir / "params.bin", std::ios::binary);
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | bytes[i];
  double first;
  std::memcpy(&first, &bits, 8);
  CHECK(first == ck.params.flat()[0]);

  const auto manifest = nlohmann::json::parse(io::read_text(dir / "manifest.json"));
  CHECK(manifest["gate_layout"] == "ifgo");
  CHECK(manifest["format_version"] == checkpoint::kFormatVersion);
  CHECK(manifest["tensors"][1]["name"] == "w_recurrent");
  CHECK(manifest["tensors"][1]["offset"] == 4 * 5 * 4);

  auto bumped = manifest;
  bumped["format_version"] = 99;
  io::write_text(dir / "manifest.json", bumped.dump());
  CHECK_THROWS_AS(checkpoint::load(dir), FormatError);
  auto layout = manifest;
  layout["gate_layout"] = "iofg";
  io::write_text(dir / "manifest.json", layout.dump());
  CHECK_THROWS_AS(checkpoint::load(dir), FormatError);
  io::write_text(dir / "manifest.json", manifest.dump());
  fs::resize_file(dir / "params.bin", 16);
  CHECK_THROWS_AS(checkpoint::load(dir), FormatError);
  CHECK_THROWS_AS(checkpoint::load(scratch("missing")), FormatError);
  fs::remove_all(dir);
}
