#include "wtm/density.hpp"

#include <algorithm>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace wtm {

EmbeddedPoint mean_embedding(const EndpointCloud& cloud) {
  if (cloud.size() == 0) throw std::invalid_argument("mean_embedding: empty cloud");
  return {cloud.start, cloud.endpoints.rowwise().mean(), static_cast<long>(cloud.size())};
}

double DensityField::at(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const Box& box = lattice.box();
  if (x.size() != lattice.dimension()) throw std::invalid_argument("DensityField::at: dimension mismatch");
  if (!box.contains(x)) return 0.0;

  const Eigen::Index dim = lattice.dimension();
  const Eigen::VectorXi& n = lattice.cells_per_axis();
  std::vector<Eigen::Index> base(static_cast<std::size_t>(dim));
  std::vector<double> frac(static_cast<std::size_t>(dim));
  for (Eigen::Index d = 0; d < dim; ++d) {
    // Position in units of cells, measured from the first center.
    double s = (x[d] - box.lower[d]) / lattice.cell_width()[d] - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(n[d] - 1));
    auto i = static_cast<Eigen::Index>(std::floor(s));
    if (i >= n[d] - 1) i = std::max<Eigen::Index>(n[d] - 2, 0);
    base[static_cast<std::size_t>(d)] = i;
    frac[static_cast<std::size_t>(d)] = n[d] > 1 ? s - static_cast<double>(i) : 0.0;
  }

  double value = 0.0;
  for (unsigned corner = 0; corner < (1u << dim); ++corner) {
    double w = 1.0;
    Eigen::Index index = 0;
    for (Eigen::Index d = 0; d < dim; ++d) {
      const bool up = (corner >> d) & 1u;
      const double t = frac[static_cast<std::size_t>(d)];
      w *= up ? t : 1.0 - t;
      const Eigen::Index i = std::min<Eigen::Index>(base[static_cast<std::size_t>(d)] + (up ? 1 : 0), n[d] - 1);
      index = index * n[d] + i;
    }
    if (w != 0.0) value += w * values[index];
  }
  return value;
}

namespace {

void normalize(DensityField& field, const char* who) {
  const double mass = field.values.sum() * field.lattice.cell_volume();
  if (!(mass > 0) || !std::isfinite(mass)) throw NumericalError(std::string(who) + ": no mass on the lattice");
  field.values /= mass;
}

}  // namespace

DensityField kde(const Eigen::Ref<const Eigen::MatrixXd>& points, const GridPartition& lattice, double bandwidth) {
  if (!(bandwidth > 0) || !std::isfinite(bandwidth)) throw std::invalid_argument("kde: bandwidth must be positive");
  if (points.rows() != lattice.dimension()) throw std::invalid_argument("kde: dimension mismatch");
  if (points.cols() == 0) throw std::invalid_argument("kde: no points");

  const Eigen::Index dim = lattice.dimension();
  const Box& box = lattice.box();
  const Eigen::VectorXi& n = lattice.cells_per_axis();
  const Eigen::VectorXd& h = lattice.cell_width();
  const double cutoff = 6.0 * bandwidth;
  const double inv2s2 = 1.0 / (2.0 * bandwidth * bandwidth);

  DensityField field{lattice, Eigen::VectorXd::Zero(lattice.size()), bandwidth};
  // Per-axis kernel factors; the tensor product over axes is the isotropic kernel.
  std::vector<std::vector<double>> factor(static_cast<std::size_t>(dim));
  std::vector<Eigen::Index> lo(static_cast<std::size_t>(dim));
  std::vector<Eigen::Index> count(static_cast<std::size_t>(dim));
  std::vector<Eigen::Index> odo(static_cast<std::size_t>(dim));

  for (Eigen::Index p = 0; p < points.cols(); ++p) {
    bool empty = false;
    for (Eigen::Index d = 0; d < dim && !empty; ++d) {
      const auto du = static_cast<std::size_t>(d);
      const double v = points(d, p);
      const double first = (v - cutoff - box.lower[d]) / h[d] - 0.5;
      const double last = (v + cutoff - box.lower[d]) / h[d] - 0.5;
      const Eigen::Index a = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(std::ceil(first)));
      const Eigen::Index b = std::min<Eigen::Index>(n[d] - 1, static_cast<Eigen::Index>(std::floor(last)));
      if (!std::isfinite(v) || b < a) {
        empty = true;
        break;
      }
      lo[du] = a;
      count[du] = b - a + 1;
      factor[du].resize(static_cast<std::size_t>(count[du]));
      for (Eigen::Index i = 0; i < count[du]; ++i) {
        const double c = box.lower[d] + (static_cast<double>(a + i) + 0.5) * h[d];
        factor[du][static_cast<std::size_t>(i)] = std::exp(-(c - v) * (c - v) * inv2s2);
      }
    }
    if (empty) continue;

    std::fill(odo.begin(), odo.end(), 0);
    for (;;) {
      double w = 1.0;
      Eigen::Index index = 0;
      for (Eigen::Index d = 0; d < dim; ++d) {
        const auto du = static_cast<std::size_t>(d);
        w *= factor[du][static_cast<std::size_t>(odo[du])];
        index = index * n[d] + lo[du] + odo[du];
      }
      field.values[index] += w;
      Eigen::Index d = dim - 1;
      while (d >= 0 && ++odo[static_cast<std::size_t>(d)] == count[static_cast<std::size_t>(d)]) {
        odo[static_cast<std::size_t>(d)] = 0;
        --d;
      }
      if (d < 0) break;
    }
  }
  normalize(field, "kde");
  return field;
}

DensityField kde(const EndpointCloud& cloud, const GridPartition& lattice, double bandwidth) {
  return kde(cloud.endpoints, lattice, bandwidth);
}

DensityField histogram(const Eigen::Ref<const Eigen::MatrixXd>& points, const GridPartition& lattice) {
  if (points.rows() != lattice.dimension()) throw std::invalid_argument("histogram: dimension mismatch");
  if (points.cols() == 0) throw std::invalid_argument("histogram: no points");
  DensityField field{lattice, Eigen::VectorXd::Zero(lattice.size()), 0.0};
  for (Eigen::Index p = 0; p < points.cols(); ++p) {
    const Eigen::Index cell = lattice.cell_of(points.col(p));
    if (cell != GridPartition::kOutside) field.values[cell] += 1.0;
  }
  normalize(field, "histogram");
  return field;
}

DensityField estimate_stationary_density(const Trajectory& trajectory, const GridPartition& lattice, double bandwidth,
                                         long stride) {
  if (trajectory.size() == 0) throw std::invalid_argument("estimate_stationary_density: empty trajectory");
  if (stride < 1) throw std::invalid_argument("estimate_stationary_density: stride must be >= 1");
  if (bandwidth < 0) throw std::invalid_argument("estimate_stationary_density: bandwidth must be >= 0");
  const Eigen::Index kept = (trajectory.size() + stride - 1) / stride;
  Eigen::MatrixXd thinned(trajectory.dimension(), kept);
  for (Eigen::Index i = 0; i < kept; ++i) thinned.col(i) = trajectory.states.col(i * stride);
  return bandwidth == 0.0 ? histogram(thinned, lattice) : kde(thinned, lattice, bandwidth);
}

namespace {

void require_same_lattice(const DensityField& a, const DensityField& b, const char* who) {
  if (!(a.lattice == b.lattice) || a.values.size() != b.values.size())
    throw std::invalid_argument(std::string(who) + ": lattice mismatch");
}

}  // namespace

double weighted_l2_distance(const DensityField& f, const DensityField& g, const DensityField& rho, double floor) {
  require_same_lattice(f, g, "weighted_l2_distance");
  require_same_lattice(f, rho, "weighted_l2_distance");
  if (!(floor > 0)) throw std::invalid_argument("weighted_l2_distance: floor must be positive");
  const Eigen::ArrayXd diff = f.values.array() - g.values.array();
  const Eigen::ArrayXd weight = rho.values.array().max(floor).inverse();
  return std::sqrt((diff.square() * weight).sum() * f.lattice.cell_volume());
}

double l1_distance(const DensityField& f, const DensityField& g) {
  require_same_lattice(f, g, "l1_distance");
  return (f.values - g.values).cwiseAbs().sum() * f.lattice.cell_volume();
}

}  // namespace wtm
