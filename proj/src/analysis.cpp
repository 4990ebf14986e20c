#include "metabandit/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "metabandit/errors.hpp"
#include "metabandit/nn.hpp"

namespace metabandit::analysis {

HiddenMatrix pool_hidden(std::span<const metarl::EpisodeTrace> traces) {
  HiddenMatrix out;
  if (traces.empty()) return out;
  Eigen::Index rows = 0;
  for (const auto& t : traces) rows += t.length();
  const Eigen::Index H = traces.front().forward.hidden.rows();
  out.values.resize(rows, H);
  Eigen::Index r = 0;
  for (std::size_t e = 0; e < traces.size(); ++e) {
    const auto& fwd = traces[e].forward;
    if (fwd.hidden.rows() != H) throw ContractError("traces have different hidden sizes");
    for (int t = 0; t < traces[e].length(); ++t, ++r) {
      out.values.row(r) = fwd.hidden.col(t + 1).transpose();
      out.episode_ids.push_back(static_cast<int>(e));
      out.steps.push_back(t);
    }
  }
  return out;
}

namespace {

struct Spectrum {
  Eigen::VectorXd eigenvalues;  // descending
  Eigen::MatrixXd eigenvectors;
  Eigen::VectorXd mean;
};

Spectrum covariance_spectrum(const Eigen::Ref<const Eigen::MatrixXd>& data) {
  if (data.rows() < 2) throw DomainError("covariance needs at least two rows");
  if (!data.allFinite()) throw DomainError("data contains non-finite values");
  Spectrum s;
  s.mean = data.colwise().mean().transpose();
  const Eigen::MatrixXd centered = data.rowwise() - s.mean.transpose();
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(data.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  const Eigen::Index n = cov.rows();
  s.eigenvalues = solver.eigenvalues().reverse();
  s.eigenvectors = solver.eigenvectors().rowwise().reverse();
  for (Eigen::Index k = 0; k < n; ++k) s.eigenvalues[k] = std::max(0.0, s.eigenvalues[k]);
  return s;
}

}  // namespace

PcaResult pca(const Eigen::Ref<const Eigen::MatrixXd>& data, int k) {
  if (k < 1 || k > data.cols()) throw DomainError("number of components must lie in [1, cols]");
  const Spectrum s = covariance_spectrum(data);
  PcaResult r;
  r.mean = s.mean;
  r.eigenvalues = s.eigenvalues;
  const double total = s.eigenvalues.sum();
  r.degenerate = !(total > 0.0);
  r.explained_ratio = r.degenerate ? Eigen::VectorXd::Zero(s.eigenvalues.size()) : Eigen::VectorXd(s.eigenvalues / total);

  r.components = s.eigenvectors.leftCols(k);
  for (int j = 0; j < k; ++j) {
    Eigen::Index arg = 0;
    r.components.col(j).cwiseAbs().maxCoeff(&arg);
    if (r.components(arg, j) < 0.0) r.components.col(j) = -r.components.col(j);
  }
  r.projected = (data.rowwise() - s.mean.transpose()) * r.components;
  return r;
}

ParticipationRatio participation_ratio_from_eigenvalues(const Eigen::Ref<const Eigen::VectorXd>& eigenvalues) {
  ParticipationRatio pr;
  const double sum = eigenvalues.sum();
  const double sum_sq = eigenvalues.squaredNorm();
  if (!(sum_sq > 0.0)) {
    pr.degenerate = true;
    return pr;
  }
  pr.value = sum * sum / sum_sq;
  return pr;
}

ParticipationRatio participation_ratio(const Eigen::Ref<const Eigen::MatrixXd>& data) {
  return participation_ratio_from_eigenvalues(covariance_spectrum(data).eigenvalues);
}

int OccupancyMap::support(double threshold) const {
  double total = 0.0;
  for (double c : counts) total += c;
  if (total <= 0.0) return 0;
  int n = 0;
  for (double c : counts) n += c / total > threshold;
  return n;
}

OccupancyMap occupancy(std::span<const metarl::EpisodeTrace> traces, int width, int height, bool normalize) {
  if (traces.empty()) throw DomainError("occupancy needs at least one trace");
  OccupancyMap map;
  map.width = width;
  map.height = height;
  map.counts.assign(static_cast<std::size_t>(width) * height, 0.0);
  double steps = 0.0;
  for (const auto& t : traces) {
    for (int cell : t.positions) {
      if (cell < 0 || cell >= width * height) throw ContractError("trace position outside the grid");
      map.counts[cell] += 1.0;
      steps += 1.0;
    }
  }
  if (normalize && steps > 0.0) {
    for (double& c : map.counts) c /= steps;
    map.normalized = true;
  }
  return map;
}

std::vector<double> goal_visit_shares(std::span<const metarl::EpisodeTrace> traces) {
  std::vector<double> shares(3, 0.0);
  double total = 0.0;
  for (const auto& t : traces)
    for (int g : t.goals)
      if (g >= 0 && g < 3) {
        shares[g] += 1.0;
        total += 1.0;
      }
  if (total > 0.0)
    for (double& s : shares) s /= total;
  return shares;
}

std::vector<double> entropy_trace(const metarl::EpisodeTrace& trace) {
  std::vector<double> out(trace.length());
  for (int t = 0; t < trace.length(); ++t) out[t] = nn::softmax_entropy(trace.forward.logits.col(t)).entropy;
  return out;
}

Histogram histogram(std::span<const double> values, std::span<const double> edges, double low_threshold,
                    double high_threshold) {
  if (edges.size() < 2) throw DomainError("histogram needs at least two edges");
  if (!std::is_sorted(edges.begin(), edges.end())) throw DomainError("histogram edges must be ascending");
  Histogram h;
  h.edges.assign(edges.begin(), edges.end());
  h.counts.assign(edges.size() - 1, 0);
  if (values.empty()) return h;

  h.min = *std::min_element(values.begin(), values.end());
  h.max = *std::max_element(values.begin(), values.end());
  long long below = 0, above = 0;
  for (double v : values) {
    below += v < low_threshold;
    above += v > high_threshold;
    if (v < edges.front() || v > edges.back()) continue;
    auto it = std::upper_bound(edges.begin(), edges.end(), v);
    std::size_t bin = static_cast<std::size_t>(it - edges.begin()) - 1;
    if (bin >= h.counts.size()) bin = h.counts.size() - 1;
    ++h.counts[bin];
  }
  h.fraction_below = static_cast<double>(below) / values.size();
  h.fraction_above = static_cast<double>(above) / values.size();
  return h;
}

}  // namespace metabandit::analysis
