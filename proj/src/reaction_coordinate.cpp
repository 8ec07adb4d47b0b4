#include "wtm/reaction_coordinate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace wtm {

RCField::RCField(Box box, Eigen::VectorXi nodes_per_axis, Eigen::VectorXd values)
    : box_(std::move(box)), nodes_(std::move(nodes_per_axis)), values_(std::move(values)) {
  box_.validate();
  if (nodes_.size() != box_.dimension()) throw std::invalid_argument("RCField: node lattice dimension mismatch");
  Eigen::Index total = 1;
  for (Eigen::Index d = 0; d < nodes_.size(); ++d) {
    if (nodes_[d] < 2) throw std::invalid_argument("RCField: need at least two nodes per axis");
    total *= nodes_[d];
  }
  if (values_.size() != total) throw std::invalid_argument("RCField: missing lattice nodes");
  if (!values_.allFinite()) throw std::invalid_argument("RCField: node values must be finite");
  spacing_ = (box_.upper - box_.lower).array() / (nodes_.cast<double>().array() - 1.0);
}

Eigen::VectorXd RCField::node(Eigen::Index index) const {
  Eigen::VectorXd x(dimension());
  for (Eigen::Index d = dimension() - 1; d >= 0; --d) {
    x[d] = box_.lower[d] + static_cast<double>(index % nodes_[d]) * spacing_[d];
    index /= nodes_[d];
  }
  return x;
}

double RCField::operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const Eigen::Index dim = dimension();
  if (x.size() != dim) throw std::invalid_argument("RCField: dimension mismatch");
  std::vector<Eigen::Index> base(static_cast<std::size_t>(dim));
  std::vector<double> frac(static_cast<std::size_t>(dim));
  for (Eigen::Index d = 0; d < dim; ++d) {
    double s = std::clamp((x[d] - box_.lower[d]) / spacing_[d], 0.0, static_cast<double>(nodes_[d] - 1));
    // node() positions round-trip only to a few ulps; snap them back.
    if (const double r = std::round(s); std::abs(s - r) < 1e-12 * std::max(1.0, r)) s = r;
    auto i = static_cast<Eigen::Index>(std::floor(s));
    if (i >= nodes_[d] - 1) i = nodes_[d] - 2;
    base[static_cast<std::size_t>(d)] = i;
    frac[static_cast<std::size_t>(d)] = s - static_cast<double>(i);
  }
  double value = 0.0;
  for (unsigned corner = 0; corner < (1u << dim); ++corner) {
    double w = 1.0;
    Eigen::Index index = 0;
    for (Eigen::Index d = 0; d < dim; ++d) {
      const bool up = (corner >> d) & 1u;
      const double t = frac[static_cast<std::size_t>(d)];
      w *= up ? t : 1.0 - t;
      index = index * nodes_[d] + base[static_cast<std::size_t>(d)] + (up ? 1 : 0);
    }
    // Skipping zero weights keeps node evaluation exact.
    if (w != 0.0) value += w * values_[index];
  }
  return value;
}

Eigen::MatrixXd node_lattice(const Box& box, int nodes_per_axis) {
  Eigen::Index total = 1;
  for (Eigen::Index d = 0; d < box.dimension(); ++d) total *= nodes_per_axis;
  const RCField shape(box, Eigen::VectorXi::Constant(box.dimension(), nodes_per_axis), Eigen::VectorXd::Zero(total));
  Eigen::MatrixXd nodes(box.dimension(), shape.size());
  for (Eigen::Index i = 0; i < shape.size(); ++i) nodes.col(i) = shape.node(i);
  return nodes;
}

RCField build_rc_ideal(const Box& box, int nodes_per_axis, std::span<const ProjectionResult> results) {
  Eigen::VectorXd values(static_cast<Eigen::Index>(results.size()));
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i].parameter.size() < 1) throw std::invalid_argument("build_rc_ideal: projection without parameter");
    values[static_cast<Eigen::Index>(i)] = results[i].parameter[0];
  }
  RCField rc(box, Eigen::VectorXi::Constant(box.dimension(), nodes_per_axis), std::move(values));
  // Results must come from the lattice itself, in node order.
  for (std::size_t i = 0; i < results.size(); ++i)
    if ((results[i].start - rc.node(static_cast<Eigen::Index>(i))).norm() > 1e-9 * (1.0 + box.upper.norm()))
      throw std::invalid_argument("build_rc_ideal: result " + std::to_string(i) + " does not start at its lattice node");
  return rc;
}

RCField build_rc_scattered(const Box& box, int nodes_per_axis, std::span<const ProjectionResult> results) {
  if (results.empty()) throw std::invalid_argument("build_rc_scattered: no projections");
  const Eigen::MatrixXd nodes = node_lattice(box, nodes_per_axis);
  Eigen::VectorXd values(nodes.cols());
  for (Eigen::Index n = 0; n < nodes.cols(); ++n) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < results.size(); ++i) {
      const double d = (results[i].start - nodes.col(n)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    values[n] = results[best].parameter[0];
  }
  return {box, Eigen::VectorXi::Constant(box.dimension(), nodes_per_axis), std::move(values)};
}

RCField build_rc_coordinate(const Box& box, int nodes_per_axis, Eigen::Index axis) {
  if (axis < 0 || axis >= box.dimension()) throw std::invalid_argument("build_rc_coordinate: axis out of range");
  const Eigen::MatrixXd nodes = node_lattice(box, nodes_per_axis);
  return {box, Eigen::VectorXi::Constant(box.dimension(), nodes_per_axis), nodes.row(axis).transpose()};
}

RCBinning RCBinning::over(const RCField& rc, int n_bins) {
  if (n_bins < 1) throw std::invalid_argument("RCBinning: n_bins must be >= 1");
  RCBinning b{rc.min(), rc.max(), n_bins};
  if (!(b.hi > b.lo)) b.hi = b.lo + 1.0;  // constant RC: one occupied bin
  return b;
}

Eigen::Index RCBinning::bin_of(double y) const {
  const double s = (y - lo) / (hi - lo) * n_bins;
  if (!(s > 0)) return 0;
  return std::min<Eigen::Index>(static_cast<Eigen::Index>(s), n_bins - 1);
}

UlamOperator effective_operator(const Trajectory& trajectory, const RCField& rc, const RCBinning& binning,
                                long lag_steps) {
  if (binning.n_bins < 2) throw std::invalid_argument("effective_operator: n_bins must be >= 2");
  if (trajectory.dimension() != rc.dimension()) throw std::invalid_argument("effective_operator: dimension mismatch");
  std::vector<Eigen::Index> labels(static_cast<std::size_t>(trajectory.size()));
#pragma omp parallel for schedule(static)
  for (Eigen::Index t = 0; t < trajectory.size(); ++t) {
    const auto x = trajectory.states.col(t);
    labels[static_cast<std::size_t>(t)] =
        rc.box().contains(x) ? binning.bin_of(rc(x)) : GridPartition::kOutside;
  }
  try {
    return ulam_from_labels(labels, binning.n_bins, lag_steps, trajectory.dt);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string("effective_operator: ") + e.what());
  }
}

LevelSetWeights level_set_weights(const RCField& rc, const UlamOperator& op, const GridPartition& grid,
                                  const RCBinning& binning) {
  if (op.partition_size != grid.size()) throw std::invalid_argument("level_set_weights: operator not built on grid");
  LevelSetWeights w{binning, {}, op.weights / op.weights.sum(), Eigen::VectorXd::Zero(binning.n_bins)};
  w.row_bin.resize(static_cast<std::size_t>(op.size()));
  for (Eigen::Index i = 0; i < op.size(); ++i) {
    const Eigen::Index bin = binning.bin_of(rc(grid.cell_center(op.labels[static_cast<std::size_t>(i)])));
    w.row_bin[static_cast<std::size_t>(i)] = bin;
    w.bin_weight[bin] += w.row_weight[i];
  }
  return w;
}

namespace {

void require_rows(const LevelSetWeights& w, const Eigen::VectorXd& f, const char* who) {
  if (f.size() != w.size()) throw std::invalid_argument(std::string(who) + ": function is not defined on the cells");
}

}  // namespace

Eigen::VectorXd bin_averages(const LevelSetWeights& w, const Eigen::VectorXd& f) {
  require_rows(w, f, "bin_averages");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(w.binning.n_bins);
  for (Eigen::Index i = 0; i < w.size(); ++i) sum[w.row_bin[static_cast<std::size_t>(i)]] += w.row_weight[i] * f[i];
  Eigen::VectorXd avg(w.binning.n_bins);
  for (Eigen::Index b = 0; b < avg.size(); ++b)
    avg[b] = w.bin_weight[b] > 0 ? sum[b] / w.bin_weight[b] : std::numeric_limits<double>::quiet_NaN();
  return avg;
}

Eigen::VectorXd apply_pi(const LevelSetWeights& w, const Eigen::VectorXd& f) {
  const Eigen::VectorXd avg = bin_averages(w, f);
  Eigen::VectorXd out(f.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) out[i] = avg[w.row_bin[static_cast<std::size_t>(i)]];
  return out;
}

double weighted_inner(const LevelSetWeights& w, const Eigen::VectorXd& f, const Eigen::VectorXd& g) {
  require_rows(w, f, "weighted_inner");
  require_rows(w, g, "weighted_inner");
  return (w.row_weight.array() * f.array() * g.array()).sum();
}

double weighted_norm(const LevelSetWeights& w, const Eigen::VectorXd& f) { return std::sqrt(weighted_inner(w, f, f)); }

LevelSetDeviation levelset_deviation(const LevelSetWeights& w, const Eigen::VectorXd& f) {
  const Eigen::VectorXd avg = bin_averages(w, f);
  const auto nb = w.binning.n_bins;
  LevelSetDeviation dev{Eigen::VectorXd::Zero(nb), Eigen::VectorXd::Zero(nb), {}, 0.0, 0.0};
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const Eigen::Index b = w.row_bin[static_cast<std::size_t>(i)];
    const double e = std::abs(f[i] - avg[b]);
    dev.avg[b] += w.row_weight[i] * e;
    dev.sup[b] = std::max(dev.sup[b], e);
  }
  for (Eigen::Index b = 0; b < nb; ++b) {
    if (!(w.bin_weight[b] > 0)) {
      dev.empty_bins.push_back(b);
      dev.avg[b] = dev.sup[b] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    dev.avg[b] = std::min(dev.avg[b] / w.bin_weight[b], dev.sup[b]);
    dev.max_avg = std::max(dev.max_avg, dev.avg[b]);
    dev.max_sup = std::max(dev.max_sup, dev.sup[b]);
  }
  return dev;
}

double projection_error(const LevelSetWeights& w, const Eigen::VectorXd& f) {
  return weighted_norm(w, f - apply_pi(w, f));
}

EigenvalueBound eigenvalue_bound_strong(double eps) {
  if (!(eps >= 0)) throw std::invalid_argument("eigenvalue_bound_strong: eps must be >= 0");
  if (eps >= 1.0) return {};
  return {eps / std::sqrt(1.0 - eps * eps), false};
}

EigenvalueBound eigenvalue_bound_weak(double eps, double lambda) {
  if (!(eps >= 0)) throw std::invalid_argument("eigenvalue_bound_weak: eps must be >= 0");
  if (lambda == 0.0) return {};
  return eigenvalue_bound_strong(2.0 * eps / std::abs(lambda));
}

SpectrumComparison compare_spectra(std::span<const EigenPair> full, std::span<const EigenPair> effective, double tau,
                                   int d) {
  if (d < 1) throw std::invalid_argument("compare_spectra: d must be >= 1");
  const auto need = static_cast<std::size_t>(d) + 1;
  if (full.size() < need || effective.size() < need)
    throw std::invalid_argument("compare_spectra: both spectra need at least d+1 eigenpairs");
  SpectrumComparison c;
  c.d = d;
  c.tau = tau;
  for (std::size_t i = 0; i < need; ++i) {
    c.lambda_full.push_back(full[i].value);
    c.lambda_eff.push_back(effective[i].value);
    c.gaps.push_back(std::abs(full[i].value - effective[i].value));
    c.sigma_full.push_back(relaxation_rate(full[i].value, tau));
    c.sigma_eff.push_back(relaxation_rate(effective[i].value, tau));
  }
  return c;
}

namespace {

Eigen::VectorXd ranks(const Eigen::VectorXd& v) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(v.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return v[a] < v[b]; });
  Eigen::VectorXd r(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j);
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("spearman: need two equal-length samples");
  const Eigen::ArrayXd ra = ranks(a).array() - ranks(a).mean();
  const Eigen::ArrayXd rb = ranks(b).array() - ranks(b).mean();
  const double denom = std::sqrt((ra * ra).sum() * (rb * rb).sum());
  if (!(denom > 0)) return 0.0;
  return (ra * rb).sum() / denom;
}

}  // namespace wtm
