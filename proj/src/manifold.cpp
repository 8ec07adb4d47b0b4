#include "wtm/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace wtm {

void ManifoldAtlas::validate() const {
  if (anchors.empty()) throw std::invalid_argument("atlas: no anchors");
  for (std::size_t k = 0; k < anchors.size(); ++k) {
    const Anchor& a = anchors[k];
    if (a.parameter.size() != r) throw std::invalid_argument("atlas: parameter dimension differs from r");
    if (a.cloud.size() != samples_per_anchor) throw std::invalid_argument("atlas: anchors must share M");
    if (std::abs(a.cloud.tau - tau) > 1e-12) throw std::invalid_argument("atlas: anchors must share tau");
    if (k > 0) {
      const Anchor& prev = anchors[k - 1];
      if (r == 1 && !(a.parameter[0] > prev.parameter[0]))
        throw std::invalid_argument("atlas: parameters must increase strictly along the anchors");
      for (std::size_t j = 0; j < k; ++j)
        if (anchors[j].parameter == a.parameter) throw std::invalid_argument("atlas: parameters must be distinct");
    }
  }
}

void ManifoldAtlas::attach_densities(const GridPartition& lattice, double bandwidth) {
#pragma omp parallel for schedule(dynamic)
  for (std::size_t k = 0; k < anchors.size(); ++k) anchors[k].density = kde(anchors[k].cloud, lattice, bandwidth);
}

Eigen::MatrixXd ManifoldAtlas::means() const {
  if (anchors.empty()) return {};
  Eigen::MatrixXd m(anchors.front().mean.size(), size());
  for (Eigen::Index k = 0; k < size(); ++k) m.col(k) = anchors[static_cast<std::size_t>(k)].mean;
  return m;
}

double mep_edge(const Box& domain) {
  if (domain.dimension() != 2) throw std::invalid_argument("mep_edge: domain must be two-dimensional");
  if (domain.upper[1] < 1.0) throw std::invalid_argument("mep_edge: domain must contain the saddle height x2 = 1");
  // x2 = 1 - x1^2 >= lower[1]  <=>  |x1| <= sqrt(1 - lower[1])
  double edge = std::min(-domain.lower[0], domain.upper[0]);
  if (domain.lower[1] < 1.0) edge = std::min(edge, std::sqrt(1.0 - domain.lower[1]));
  if (!(edge > 0)) throw std::invalid_argument("mep_edge: domain must straddle x1 = 0");
  return edge;
}

std::string to_string(Metric metric) { return metric == Metric::Embedded ? "embedded" : "density"; }

ProjectionResult project_embedded(const ManifoldAtlas& atlas, const EmbeddedPoint& point) {
  if (atlas.anchors.empty()) throw std::invalid_argument("project_embedded: empty atlas");
  Eigen::Index best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < atlas.size(); ++k) {
    const double d = (atlas.anchors[static_cast<std::size_t>(k)].mean - point.mean).norm();
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return {point.start, best, best_d, atlas.anchors[static_cast<std::size_t>(best)].parameter, Metric::Embedded};
}

ProjectionResult project_density(const ManifoldAtlas& atlas, const Eigen::VectorXd& start, const DensityField& field,
                                 const DensityField& rho, double floor) {
  if (atlas.anchors.empty()) throw std::invalid_argument("project_density: empty atlas");
  Eigen::Index best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < atlas.size(); ++k) {
    const auto& density = atlas.anchors[static_cast<std::size_t>(k)].density;
    if (!density) throw std::invalid_argument("project_density: anchor without density");
    const double d = weighted_l2_distance(*density, field, rho, floor);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return {start, best, best_d, atlas.anchors[static_cast<std::size_t>(best)].parameter, Metric::Density};
}

ProjectionResult project_density(const ManifoldAtlas& atlas, const EndpointCloud& cloud, const DensityField& rho,
                                 const GridPartition& lattice, double bandwidth, double floor) {
  return project_density(atlas, cloud.start, kde(cloud, lattice, bandwidth), rho, floor);
}

StrongScore strong_score(std::span<const ProjectionResult> results) {
  if (results.empty()) throw std::invalid_argument("strong_score: no results");
  StrongScore s{results[0].residual, 0, results[0].start};
  for (std::size_t i = 1; i < results.size(); ++i)
    if (results[i].residual > s.score) s = {results[i].residual, i, results[i].start};
  return s;
}

const LevelSetScore* ReducibilityReport::level_set_of(std::size_t i) const {
  const Eigen::Index anchor = results.at(i).anchor;
  for (const auto& ls : per_anchor)
    if (ls.anchor == anchor) return &ls;
  return nullptr;
}

ReducibilityReport weak_score(std::vector<ProjectionResult> results, std::vector<double> weights) {
  if (results.empty()) throw std::invalid_argument("weak_score: no results");
  if (weights.size() != results.size()) throw std::invalid_argument("weak_score: one weight per result");
  for (double w : weights)
    if (!(w >= 0) || !std::isfinite(w)) throw std::invalid_argument("weak_score: weights must be finite and >= 0");

  ReducibilityReport report;
  report.metric = results.front().metric;
  report.strong = strong_score(results);

  struct Accum {
    long count = 0;
    double weight = 0.0;
    double weighted_residual = 0.0;
    double max_residual = 0.0;
    Eigen::VectorXd parameter;
  };
  std::map<Eigen::Index, Accum> groups;
  for (std::size_t i = 0; i < results.size(); ++i) {
    Accum& g = groups[results[i].anchor];
    ++g.count;
    g.weight += weights[i];
    g.weighted_residual += weights[i] * results[i].residual;
    g.max_residual = std::max(g.max_residual, results[i].residual);
    g.parameter = results[i].parameter;
  }

  report.weak_score = 0.0;
  bool any = false;
  for (const auto& [anchor, g] : groups) {
    if (!(g.weight > 0)) {
      report.excluded_anchors.push_back(anchor);
      continue;
    }
    // Weighted mean can exceed the max by an ulp; clamp to keep weak_k <= max exact.
    const double weak = std::min(g.weighted_residual / g.weight, g.max_residual);
    report.per_anchor.push_back({anchor, g.parameter, g.count, g.weight, weak, g.max_residual});
    if (!any || weak > report.weak_score) {
      report.weak_score = weak;
      report.weak_argmax = anchor;
      any = true;
    }
  }
  report.results = std::move(results);
  report.start_weights = std::move(weights);
  return report;
}

ReducibilityReport weak_score(std::vector<ProjectionResult> results, const DensityField& rho) {
  std::vector<double> weights;
  weights.reserve(results.size());
  for (const auto& r : results) weights.push_back(rho.at(r.start));
  return weak_score(std::move(results), std::move(weights));
}

}  // namespace wtm
