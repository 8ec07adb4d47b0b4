#pragma once

#include <cmath>

#include <Eigen/Core>

#include "wtm/dynamics.hpp"
#include "wtm/errors.hpp"
#include "wtm/grid.hpp"
#include "wtm/potential.hpp"

namespace wtm {

/// First moment of a transition density, estimated from its cloud.
struct EmbeddedPoint {
  Eigen::VectorXd start;
  Eigen::VectorXd mean;
  long samples = 0;
};

EmbeddedPoint mean_embedding(const EndpointCloud& cloud);

/// Non-negative density values at the cell centers of `lattice`,
/// normalized so that sum(values) * cell_volume == 1.
struct DensityField {
  GridPartition lattice;
  Eigen::VectorXd values;
  /// Kernel bandwidth; 0 for histograms and closed-form densities.
  double bandwidth = 0.0;

  double integral() const { return values.sum() * lattice.cell_volume(); }
  /// Multilinear interpolation between cell centers, clamped to the outermost
  /// centers inside the box; 0 outside the box.
  double at(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

/// Isotropic Gaussian KDE of the columns of `points` on the lattice cell
/// centers, normalized on the lattice. Kernels are truncated at 6 bandwidths.
/// Throws std::invalid_argument for bandwidth <= 0 and NumericalError when
/// no kernel mass reaches the lattice.
DensityField kde(const Eigen::Ref<const Eigen::MatrixXd>& points, const GridPartition& lattice, double bandwidth);
DensityField kde(const EndpointCloud& cloud, const GridPartition& lattice, double bandwidth);

/// Cell-count histogram of the columns of `points` (points outside are dropped).
DensityField histogram(const Eigen::Ref<const Eigen::MatrixXd>& points, const GridPartition& lattice);

/// Stationary density from an equilibrated trajectory: KDE of every
/// `stride`-th state, or a histogram when bandwidth == 0.
DensityField estimate_stationary_density(const Trajectory& trajectory, const GridPartition& lattice, double bandwidth,
                                         long stride = 1);

/// exp(-beta V) at the cell centers, normalized on the lattice. For
/// overdamped Langevin dynamics this is the exact stationary density.
template <Potential P>
DensityField boltzmann_density(const P& potential, double beta, const GridPartition& lattice) {
  if (lattice.dimension() != P::Dimension) throw std::invalid_argument("boltzmann_density: dimension mismatch");
  Eigen::VectorXd energy(lattice.size());
  for (Eigen::Index i = 0; i < lattice.size(); ++i) {
    const typename P::State x = lattice.cell_center(i);
    energy[i] = static_cast<double>(potential.energy(x));
  }
  // Shift by the minimum so the largest weight is exp(0).
  Eigen::VectorXd values = (-beta * (energy.array() - energy.minCoeff())).exp();
  values /= values.sum() * lattice.cell_volume();
  return {lattice, std::move(values), 0.0};
}

/// sqrt( sum_nodes (f - g)^2 / max(rho, floor) * cell_volume ).
double weighted_l2_distance(const DensityField& f, const DensityField& g, const DensityField& rho, double floor);

/// sum_nodes |f - g| * cell_volume.
double l1_distance(const DensityField& f, const DensityField& g);

}  // namespace wtm
