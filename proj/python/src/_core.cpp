// pybind11 bindings over the C++ core. Arrays cross as float64 numpy arrays.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "metabandit/analysis.hpp"
#include "metabandit/checkpoint.hpp"
#include "metabandit/errors.hpp"
#include "metabandit/nn.hpp"
#include "metabandit/oracle.hpp"
#include "metabandit/theory.hpp"

namespace py = pybind11;
using namespace metabandit;

namespace {

theory::TheoryOptions options_from(const std::string& integration, const std::string& variance, int quad_nodes) {
  theory::TheoryOptions o;
  o.quad_nodes = quad_nodes;
  if (integration == "closed") o.integration = theory::Integration::kClosedForm;
  else if (integration == "gh") o.integration = theory::Integration::kGaussHermite;
  else throw py::value_error("integration must be 'closed' or 'gh'");
  if (variance == "sampling") o.variance = theory::VarianceModel::kSampling;
  else if (variance == "posterior") o.variance = theory::VarianceModel::kPosterior;
  else throw py::value_error("variance must be 'sampling' or 'posterior'");
  return o;
}

nn::NetParams params_from(const Eigen::VectorXd& flat, const nn::NetDims& dims) {
  nn::NetParams p(dims);
  if (static_cast<std::size_t>(flat.size()) != nn::param_count(dims))
    throw py::value_error("flat parameter vector has " + std::to_string(flat.size()) + " entries, dims need " +
                          std::to_string(nn::param_count(dims)));
  p.flat() = flat;
  return p;
}

py::dict forward_dict(const nn::NetParams& p, const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != p.dims().input_dim) throw py::value_error("inputs must have input_dim rows");
  const int T = static_cast<int>(inputs.cols());
  nn::ForwardTrace trace(p.dims(), T);
  trace.reset(p);
  for (int t = 0; t < T; ++t) trace.push(p, inputs.col(t));
  py::dict out;
  out["hidden"] = Eigen::MatrixXd(trace.hidden.leftCols(T + 1));
  out["cell"] = Eigen::MatrixXd(trace.cell.leftCols(T + 1));
  out["logits"] = Eigen::MatrixXd(trace.logits.leftCols(T));
  out["values"] = Eigen::VectorXd(trace.values.head(T));
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bindings for the metabandit C++ library";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);
  py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_RuntimeError);

  m.def(
      "expected_return",
      [](int n, double sigma_l, double sigma_p, int lifetime, double prior_mean, const std::string& integration,
         const std::string& variance, int quad_nodes) {
        return theory::expected_return(n, {sigma_p, sigma_l, lifetime, prior_mean},
                                       options_from(integration, variance, quad_nodes));
      },
      py::arg("n"), py::arg("sigma_l"), py::arg("sigma_p"), py::arg("lifetime"), py::arg("prior_mean") = -1.0,
      py::arg("integration") = "closed", py::arg("variance") = "sampling",
      py::arg("quad_nodes") = theory::kDefaultQuadNodes);

  m.def(
      "optimal_exploration",
      [](double sigma_l, double sigma_p, int lifetime, double prior_mean) {
        const auto r = theory::optimal_exploration({sigma_p, sigma_l, lifetime, prior_mean});
        py::dict d;
        d["n_star"] = r.n_star;
        d["v_star"] = r.v_star;
        d["values"] = r.values;
        return d;
      },
      py::arg("sigma_l"), py::arg("sigma_p"), py::arg("lifetime"), py::arg("prior_mean") = -1.0);

  m.def(
      "phase_diagram",
      [](const std::vector<double>& sigma_l_grid, const std::vector<double>& sigma_p_grid, int lifetime,
         double prior_mean) {
        const auto d = theory::phase_diagram(sigma_l_grid, sigma_p_grid, lifetime, {}, prior_mean);
        Eigen::MatrixXi n(d.rows(), d.cols());
        Eigen::MatrixXd v(d.rows(), d.cols());
        for (int i = 0; i < d.rows(); ++i)
          for (int j = 0; j < d.cols(); ++j) {
            n(i, j) = d.n_star_at(i, j);
            v(i, j) = d.v_star_at(i, j);
          }
        py::dict out;
        out["n_star"] = n;
        out["v_star"] = v;
        return out;
      },
      py::arg("sigma_l_grid"), py::arg("sigma_p_grid"), py::arg("lifetime"), py::arg("prior_mean") = -1.0,
      "Rows follow sigma_l, columns follow sigma_p.");

  m.def(
      "simulate_policy",
      [](double sigma_l, double sigma_p, int lifetime, int n, long long episodes, std::uint64_t seed,
         double prior_mean) {
        py::gil_scoped_release release;
        const auto e = oracle::simulate_policy({sigma_p, sigma_l, lifetime, prior_mean}, n, episodes, seed);
        return std::make_pair(e.mean, e.std_error);
      },
      py::arg("sigma_l"), py::arg("sigma_p"), py::arg("lifetime"), py::arg("n"), py::arg("episodes"),
      py::arg("seed") = 1, py::arg("prior_mean") = -1.0, "Returns (mean, standard error).");

  m.def("param_count", [](int input_dim, int hidden_dim, int action_dim) {
    return nn::param_count({input_dim, hidden_dim, action_dim});
  });

  m.def(
      "init_params",
      [](int input_dim, int hidden_dim, int action_dim, std::uint64_t seed) {
        Rng rng(seed);
        return Eigen::VectorXd(nn::init_params({input_dim, hidden_dim, action_dim}, rng).flat());
      },
      py::arg("input_dim"), py::arg("hidden_dim"), py::arg("action_dim"), py::arg("seed"));

  m.def(
      "forward",
      [](const Eigen::VectorXd& flat, int input_dim, int hidden_dim, int action_dim, const Eigen::MatrixXd& inputs) {
        return forward_dict(params_from(flat, {input_dim, hidden_dim, action_dim}), inputs);
      },
      py::arg("flat"), py::arg("input_dim"), py::arg("hidden_dim"), py::arg("action_dim"), py::arg("inputs"),
      "LSTM forward over inputs (input_dim x T); hidden/cell include the initial column.");

  m.def(
      "save_checkpoint",
      [](const std::filesystem::path& dir, const Eigen::VectorXd& flat, int input_dim, int hidden_dim,
         int action_dim, const std::map<std::string, std::string>& config) {
        checkpoint::Checkpoint ck;
        ck.params = params_from(flat, {input_dim, hidden_dim, action_dim});
        ck.config = config;
        checkpoint::save(dir, ck);
      },
      py::arg("dir"), py::arg("flat"), py::arg("input_dim"), py::arg("hidden_dim"), py::arg("action_dim"),
      py::arg("config") = std::map<std::string, std::string>{});

  m.def(
      "load_checkpoint",
      [](const std::filesystem::path& dir) {
        const auto ck = checkpoint::load(dir);
        py::dict d;
        d["flat"] = Eigen::VectorXd(ck.params.flat());
        d["input_dim"] = ck.params.dims().input_dim;
        d["hidden_dim"] = ck.params.dims().hidden_dim;
        d["action_dim"] = ck.params.dims().action_dim;
        d["episodes_seen"] = ck.episodes_seen;
        d["config"] = ck.config;
        return d;
      },
      py::arg("dir"));

  m.def(
      "participation_ratio",
      [](const Eigen::MatrixXd& data) { return analysis::participation_ratio(data).value; }, py::arg("data"));

  m.def(
      "pca",
      [](const Eigen::MatrixXd& data, int k) {
        const auto r = analysis::pca(data, k);
        py::dict d;
        d["components"] = r.components;
        d["explained_ratio"] = r.explained_ratio;
        d["projected"] = r.projected;
        return d;
      },
      py::arg("data"), py::arg("k"));
}
