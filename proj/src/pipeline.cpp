#include "wtm/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "wtm/io.hpp"

namespace wtm {

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json bound_json(const EigenvalueBound& b) {
  return json{{"value", b.vacuous ? json(nullptr) : json(b.value)}, {"vacuous", b.vacuous}};
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double m = *mid;
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), mid));
  return m;
}

std::string fmt(double v, int digits = 4) {
  if (!std::isfinite(v)) return io::format_number(v);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

json report_json(const ReducibilityReport& r) {
  json per = json::array();
  for (const auto& ls : r.per_anchor)
    per.push_back({{"anchor", ls.anchor},
                   {"y", ls.parameter[0]},
                   {"count", ls.count},
                   {"weight", ls.weight},
                   {"weak", ls.weak},
                   {"max_residual", ls.max_residual}});
  json excluded = json::array();
  for (auto k : r.excluded_anchors) excluded.push_back(k);
  const auto& argmax_ls = std::find_if(r.per_anchor.begin(), r.per_anchor.end(),
                                       [&](const LevelSetScore& ls) { return ls.anchor == r.weak_argmax; });
  return {{"metric", to_string(r.metric)},
          {"strong_score", r.strong.score},
          {"strong_argmax", {r.strong.start[0], r.strong.start[1]}},
          {"weak_score", r.weak_score},
          {"weak_argmax",
           {{"anchor", r.weak_argmax},
            {"y", argmax_ls != r.per_anchor.end() ? json(argmax_ls->parameter[0]) : json(nullptr)}}},
          {"per_anchor", per},
          {"excluded_anchors", excluded},
          {"rho_floor", r.rho_floor},
          {"bandwidth", r.bandwidth}};
}

json projection_json(const ProjectionResult& p) {
  return {{"anchor", p.anchor}, {"y", p.parameter[0]}, {"residual", p.residual}};
}

}  // namespace

QuadraticFit QuadraticFit::fit(const Eigen::MatrixXd& points) {
  if (points.rows() != 2 || points.cols() < 3) throw std::invalid_argument("QuadraticFit: need >= 3 planar points");
  const Eigen::Index n = points.cols();
  Eigen::MatrixXd A(n, 3);
  A.col(0).setOnes();
  A.col(1) = points.row(0).transpose();
  A.col(2) = points.row(0).transpose().array().square().matrix();
  const Eigen::VectorXd b = points.row(1).transpose();
  QuadraticFit f;
  f.coefficients = A.colPivHouseholderQr().solve(b);
  f.rms = std::sqrt((A * f.coefficients - b).squaredNorm() / static_cast<double>(n));
  f.t_min = points.row(0).minCoeff();
  f.t_max = points.row(0).maxCoeff();
  return f;
}

double QuadraticFit::distance(const Eigen::Vector2d& p) const {
  // Dense sampling, then a golden-section refinement around the best sample.
  const double lo = t_min - 1.0;
  const double hi = t_max + 1.0;
  constexpr int kSamples = 2000;
  const double step = (hi - lo) / kSamples;
  auto d2 = [&](double t) {
    const double dx = p[0] - t;
    const double dy = p[1] - (*this)(t);
    return dx * dx + dy * dy;
  };
  double best_t = lo;
  double best = d2(lo);
  for (int i = 1; i <= kSamples; ++i) {
    const double t = lo + i * step;
    if (const double v = d2(t); v < best) {
      best = v;
      best_t = t;
    }
  }
  double a = std::max(lo, best_t - step);
  double b = std::min(hi, best_t + step);
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 60; ++it) {
    const double c = b - g * (b - a);
    const double d = a + g * (b - a);
    if (d2(c) < d2(d)) b = d;
    else a = c;
  }
  return std::sqrt(std::min(best, d2(0.5 * (a + b))));
}

Eigen::MatrixXd uniform_starts(const Box& domain, long n, std::uint64_t seed) {
  CounterStream stream(seed, StreamTag::Sampling);
  Eigen::MatrixXd s(domain.dimension(), n);
  for (long i = 0; i < n; ++i)
    for (Eigen::Index d = 0; d < domain.dimension(); ++d)
      s(d, i) = domain.lower[d] + stream.next_uniform() * (domain.upper[d] - domain.lower[d]);
  return s;
}

Pipeline::Pipeline(PipelineConfig config, std::function<void(const std::string&)> log)
    : config_(std::move(config)), log_(std::move(log)) {
  config_.validate();
  sim_ = config_.simulation();
  grid_ = GridPartition::uniform(config_.domain(), config_.grid);
  lattice_ = GridPartition::uniform(config_.domain(), config_.density_lattice);
}

void Pipeline::log(const std::string& msg) const {
  if (log_) log_(msg);
}

json Pipeline::with_config(json body) const {
  json out = {{"config", config_.to_json()}};
  out.update(body);
  return out;
}

const Trajectory& Pipeline::trajectory() {
  if (trajectory_) return *trajectory_;
  const auto key = config_.trajectory_key();
  const auto path = config_.output_dir / "cache" / ("trajectory-" + io::hex64(key) + ".bin");
  Trajectory t;
  if (config_.cache && io::load_trajectory(path, key, t)) {
    trajectory_cached_ = true;
    log("trajectory: reused cache " + path.string());
  } else {
    log("trajectory: simulating " + std::to_string(config_.steps + config_.burn_in) + " steps");
    const BananaPotential<double>::State start(-1.0, 0.0);
    t = long_trajectory(potential_, sim_, start, config_.steps + config_.burn_in, config_.burn_in);
    if (config_.cache) io::save_trajectory(path, t, key);
  }
  trajectory_ = std::move(t);
  return *trajectory_;
}

const SpectrumResult& Pipeline::spectrum() {
  if (spectrum_) return *spectrum_;
  const Trajectory& t = trajectory();
  log("spectrum: Ulam operator on " + std::to_string(grid_.size()) + " cells");
  SpectrumResult s;
  s.op = build_ulam(t, sim_.lag_steps(), grid_);
  s.pairs = spectrum_of(s.op);
  s.rates = relaxation_rates(s.pairs, s.op.lag);
  spectrum_ = std::move(s);
  return *spectrum_;
}

std::vector<EigenPair> Pipeline::spectrum_of(const UlamOperator& op) const {
  return wtm::spectrum(op, std::min<Eigen::Index>(config_.n_eigen, op.size()));
}

const ManifoldAtlas& Pipeline::atlas() {
  if (atlas_) return *atlas_;
  log("atlas: " + std::to_string(config_.n_anchors) + " anchors x " + std::to_string(config_.M) + " samples");
  ManifoldAtlas a = mep_manifold(potential_, sim_, config_.n_anchors, config_.M);
  a.attach_densities(lattice_, config_.bandwidth);
  atlas_ = std::move(a);
  return *atlas_;
}

const DensityField& Pipeline::rho() {
  if (rho_) return *rho_;
  if (config_.rho_source == RhoSource::Boltzmann) {
    rho_ = boltzmann_density(potential_, config_.beta, lattice_);
  } else {
    const Trajectory& t = trajectory();
    const long stride = std::max<long>(1, static_cast<long>(t.size()) / 200'000);
    rho_ = estimate_stationary_density(t, lattice_, config_.bandwidth, stride);
  }
  return *rho_;
}

double Pipeline::rho_floor_absolute() { return config_.rho_floor * rho().values.maxCoeff(); }

Scan Pipeline::scan(const Eigen::MatrixXd& starts, StreamTag tag, bool with_density) {
  const ManifoldAtlas& a = atlas();
  const DensityField* density_rho = with_density ? &rho() : nullptr;
  const double floor = with_density ? rho_floor_absolute() : 0.0;
  const Eigen::Index n = starts.cols();
  Scan s{starts, Eigen::MatrixXd(2, n), std::vector<ProjectionResult>(static_cast<std::size_t>(n)), {}};
  if (with_density) s.density.resize(static_cast<std::size_t>(n));

  // Chunks bound the memory held by endpoint clouds.
  constexpr Eigen::Index kChunk = 256;
  for (Eigen::Index first = 0; first < n; first += kChunk) {
    const Eigen::Index count = std::min(kChunk, n - first);
    const auto clouds = sample_clouds(potential_, sim_, starts.middleCols(first, count), config_.M, tag,
                                      static_cast<std::uint32_t>(first));
#pragma omp parallel for schedule(dynamic)
    for (Eigen::Index j = 0; j < count; ++j) {
      const auto i = static_cast<std::size_t>(first + j);
      const EmbeddedPoint p = mean_embedding(clouds[static_cast<std::size_t>(j)]);
      s.means.col(first + j) = p.mean;
      s.embedded[i] = project_embedded(a, p);
      if (density_rho)
        s.density[i] = project_density(a, clouds[static_cast<std::size_t>(j)], *density_rho, lattice_,
                                       config_.bandwidth, floor);
    }
  }
  return s;
}

const Scan& Pipeline::uniform_scan() {
  if (uniform_) return *uniform_;
  atlas();
  log("scan: " + std::to_string(config_.n_starts) + " uniform starts");
  uniform_ = scan(uniform_starts(config_.domain(), config_.n_starts, config_.seed), StreamTag::ScanCloud, true);
  return *uniform_;
}

const Scan& Pipeline::equilibrium_scan() {
  if (equilibrium_) return *equilibrium_;
  const Trajectory& t = trajectory();
  atlas();
  const long n = config_.n_equilibrium;
  Eigen::MatrixXd starts(2, n);
  for (long k = 0; k < n; ++k) {
    const auto idx = static_cast<Eigen::Index>((static_cast<double>(k) + 0.5) * static_cast<double>(t.size()) / n);
    starts.col(k) = t.states.col(std::min<Eigen::Index>(idx, t.size() - 1));
  }
  log("scan: " + std::to_string(n) + " equilibrium starts");
  equilibrium_ = scan(starts, StreamTag::EquilibriumCloud, true);
  return *equilibrium_;
}

const EmbeddingSummary& Pipeline::embedding() {
  if (embedding_) return *embedding_;
  const ManifoldAtlas& a = atlas();
  const Scan& u = uniform_scan();
  const Scan& e = equilibrium_scan();

  EmbeddingSummary s;
  const Eigen::MatrixXd means = a.means();
  s.fit = QuadraticFit::fit(means);
  std::vector<double> spacing;
  for (Eigen::Index k = 1; k < means.cols(); ++k) spacing.push_back((means.col(k) - means.col(k - 1)).norm());
  s.median_anchor_spacing = median(spacing);

  for (Eigen::Index i = 0; i < u.means.cols(); ++i) s.uniform_distance.push_back(s.fit.distance(u.means.col(i)));
  const double med = median(s.uniform_distance);
  for (Eigen::Index i = 0; i < u.means.cols(); ++i) {
    if (!(s.uniform_distance[static_cast<std::size_t>(i)] > 3.0 * med)) continue;
    ++s.outliers;
    const double x1 = u.starts(0, i);
    if (u.starts(1, i) < 1.0 - x1 * x1) ++s.outliers_below_mep;
  }

  long within = 0;
  long exact = 0;
  long close = 0;
  long side = 0;
  for (Eigen::Index i = 0; i < e.means.cols(); ++i) {
    const double dist = s.fit.distance(e.means.col(i));
    s.equilibrium_distance.push_back(dist);
    if (dist < 3.0 * s.median_anchor_spacing) ++within;
    const auto& pe = e.embedded[static_cast<std::size_t>(i)];
    const auto& pd = e.density[static_cast<std::size_t>(i)];
    if (pe.anchor == pd.anchor) ++exact;
    if (std::abs(pe.parameter[0] - pd.parameter[0]) <= 0.25) ++close;
    if ((pe.parameter[0] < 0) == (pd.parameter[0] < 0)) ++side;
  }
  const auto n_eq = static_cast<double>(e.means.cols());
  s.equilibrium_within_fraction = within / n_eq;
  s.agreement_exact = exact / n_eq;
  s.agreement_close = close / n_eq;
  s.agreement_side = side / n_eq;
  embedding_ = std::move(s);
  return *embedding_;
}

const ReducibilitySummary& Pipeline::reducibility() {
  if (reducibility_) return *reducibility_;
  const Scan& u = uniform_scan();
  const DensityField& r = rho();
  const ManifoldAtlas& a = atlas();
  const double floor = rho_floor_absolute();

  std::vector<double> weights;
  for (Eigen::Index i = 0; i < u.starts.cols(); ++i) weights.push_back(r.at(u.starts.col(i)));

  ReducibilitySummary s;
  s.embedded = weak_score(u.embedded, weights);
  s.density = weak_score(u.density, weights);
  for (auto* rep : {&s.embedded, &s.density}) {
    rep->rho_floor = config_.rho_floor;
    rep->bandwidth = config_.bandwidth;
  }

  // Probes at the bottom of the domain and one unit below it.
  const double volume = (config_.domain_hi - config_.domain_lo) * (config_.domain_hi - config_.domain_lo);
  const std::vector<Eigen::Vector2d> probes = {{0.0, config_.domain_lo}, {0.0, config_.domain_lo - 1.0}};
  for (std::size_t j = 0; j < probes.size(); ++j) {
    const BananaPotential<double>::State start = probes[j];
    const EndpointCloud cloud =
        sample_endpoint_cloud(potential_, sim_, start, config_.M, static_cast<std::uint32_t>(j + 1), StreamTag::Sampling);
    XStarProbe p;
    p.start = probes[j];
    p.embedded = project_embedded(a, mean_embedding(cloud));
    p.density = project_density(a, cloud, r, lattice_, config_.bandwidth, floor);
    for (const auto& ls : s.density.per_anchor)
      if (ls.anchor == p.density.anchor) p.level_set = ls;
    double sum = 0.0;
    for (std::size_t i = 0; i < u.density.size(); ++i)
      if (u.density[i].anchor == p.density.anchor) sum += weights[i] * u.density[i].residual;
    p.level_set_mass_integral = volume / static_cast<double>(u.density.size()) * sum;
    s.probes.push_back(std::move(p));
  }
  reducibility_ = std::move(s);
  return *reducibility_;
}

const RCSummary& Pipeline::rc() {
  if (rc_) return *rc_;
  const Trajectory& t = trajectory();
  const SpectrumResult& full = spectrum();
  const Box domain = config_.domain();

  RCSummary s;
  if (config_.rc_mode == RcMode::Lattice) {
    const Eigen::MatrixXd nodes = node_lattice(domain, config_.rc_lattice);
    atlas();
    log("rc: " + std::to_string(nodes.cols()) + " lattice starts");
    const Scan lattice_scan = scan(nodes, StreamTag::LatticeCloud, false);
    s.xi1 = build_rc_ideal(domain, config_.rc_lattice, lattice_scan.embedded);
  } else {
    s.xi1 = build_rc_scattered(domain, config_.rc_lattice, uniform_scan().embedded);
  }
  s.xi2 = build_rc_coordinate(domain, config_.rc_lattice, 0);
  s.bins1 = RCBinning::over(s.xi1, config_.n_bins);
  s.bins2 = RCBinning::over(s.xi2, config_.n_bins);

  log("rc: effective operators");
  s.eff1 = effective_operator(t, s.xi1, s.bins1, sim_.lag_steps());
  s.eff2 = effective_operator(t, s.xi2, s.bins2, sim_.lag_steps());
  s.spec1 = spectrum_of(s.eff1);
  s.spec2 = spectrum_of(s.eff2);
  s.cmp1 = compare_spectra(full.pairs, s.spec1, full.op.lag, config_.d);
  s.cmp2 = compare_spectra(full.pairs, s.spec2, full.op.lag, config_.d);

  s.weights1 = level_set_weights(s.xi1, full.op, grid_, s.bins1);
  s.weights2 = level_set_weights(s.xi2, full.op, grid_, s.bins2);
  const Eigen::VectorXd& phi1 = full.pairs.at(1).function;
  s.dev1 = levelset_deviation(s.weights1, phi1);
  s.dev2 = levelset_deviation(s.weights2, phi1);
  s.proj_err1 = projection_error(s.weights1, phi1);
  s.proj_err2 = projection_error(s.weights2, phi1);
  const double lambda1 = full.pairs[1].value;
  s.bound_strong = eigenvalue_bound_strong(s.proj_err1);
  s.bound_weak = eigenvalue_bound_weak(s.dev1.max_avg, lambda1);
  s.bound_strong_ref = eigenvalue_bound_strong(0.06);
  s.bound_weak_ref = eigenvalue_bound_weak(0.06, lambda1);

  Eigen::VectorXd xi_cells(full.op.size());
  for (Eigen::Index i = 0; i < full.op.size(); ++i)
    xi_cells[i] = s.xi1(grid_.cell_center(full.op.labels[static_cast<std::size_t>(i)]));
  s.rank_correlation = spearman(xi_cells, phi1);
  rc_ = std::move(s);
  return *rc_;
}

const oracle::SweepSummary& Pipeline::oracle_sweep() {
  if (oracle_) return *oracle_;
  log("oracle: " + std::to_string(config_.oracle_trials) + " random chains");
  const auto t0 = std::chrono::steady_clock::now();
  oracle_ = oracle::theorem_sweep<double>(config_.oracle_trials, config_.seed, config_.oracle_max_states);
  oracle_seconds_ = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return *oracle_;
}

json Pipeline::spectrum_json() {
  const SpectrumResult& s = spectrum();
  json values = json::array();
  json rates = json::array();
  for (std::size_t i = 0; i < s.pairs.size(); ++i) {
    values.push_back(s.pairs[i].value);
    rates.push_back(optional_number(s.rates[i]));
  }
  return with_config({{"lag", s.op.lag},
                      {"lag_steps", s.op.lag_steps},
                      {"trajectory_length", trajectory().size()},
                      {"grid_cells", grid_.size()},
                      {"occupied_cells", s.op.size()},
                      {"transitions", s.op.transitions},
                      {"row_sum_residual", s.op.row_sum_residual()},
                      {"detailed_balance_residual", s.op.detailed_balance_residual()},
                      {"raw_count_asymmetry", s.op.raw_asymmetry},
                      {"eigenvalues", values},
                      {"rates", rates}});
}

json Pipeline::embedding_json() {
  const EmbeddingSummary& e = embedding();
  return with_config({{"n_starts", uniform_scan().starts.cols()},
                      {"n_anchors", atlas().size()},
                      {"fit",
                       {{"coefficients", {e.fit.coefficients[0], e.fit.coefficients[1], e.fit.coefficients[2]}},
                        {"rms", e.fit.rms}}},
                      {"median_anchor_spacing", e.median_anchor_spacing},
                      {"outliers", e.outliers},
                      {"outliers_below_mep", e.outliers_below_mep},
                      {"equilibrium_starts", static_cast<long>(e.equilibrium_distance.size())},
                      {"equilibrium_within_fraction", e.equilibrium_within_fraction},
                      {"projection_agreement",
                       {{"same_anchor", e.agreement_exact},
                        {"parameter_within_0.25", e.agreement_close},
                        {"same_side", e.agreement_side}}}});
}

json Pipeline::reducibility_json() {
  const ReducibilitySummary& r = reducibility();
  json probes = json::array();
  for (const auto& p : r.probes) {
    json ls = nullptr;
    if (p.level_set)
      ls = {{"anchor", p.level_set->anchor},
            {"y", p.level_set->parameter[0]},
            {"count", p.level_set->count},
            {"weight", p.level_set->weight},
            {"weak", p.level_set->weak},
            {"max_residual", p.level_set->max_residual}};
    probes.push_back({{"start", {p.start[0], p.start[1]}},
                      {"embedded", projection_json(p.embedded)},
                      {"density", projection_json(p.density)},
                      {"level_set", ls},
                      {"level_set_mass_integral", p.level_set_mass_integral}});
  }
  return with_config({{"rho_floor_absolute", rho_floor_absolute()},
                      {"embedded", report_json(r.embedded)},
                      {"density", report_json(r.density)},
                      {"x_star", probes}});
}

namespace {

json comparison_json(const SpectrumComparison& c, const LevelSetDeviation& dev, double proj_err,
                     const UlamOperator& eff) {
  json sf = json::array();
  json se = json::array();
  for (std::size_t i = 0; i < c.lambda_full.size(); ++i) {
    sf.push_back(optional_number(c.sigma_full[i]));
    se.push_back(optional_number(c.sigma_eff[i]));
  }
  json empty = json::array();
  for (auto b : dev.empty_bins) empty.push_back(b);
  return {{"d", c.d},
          {"lambda_full", c.lambda_full},
          {"lambda_eff", c.lambda_eff},
          {"gaps", c.gaps},
          {"sigma_full", sf},
          {"sigma_eff", se},
          {"occupied_bins", eff.size()},
          {"projection_error", proj_err},
          {"max_avg_deviation", dev.max_avg},
          {"max_sup_deviation", dev.max_sup},
          {"empty_bins", empty}};
}

}  // namespace

json Pipeline::rc_json() {
  const RCSummary& s = rc();
  json xi1 = comparison_json(s.cmp1, s.dev1, s.proj_err1, s.eff1);
  xi1["bounds"] = {{"strong", bound_json(s.bound_strong)}, {"weak", bound_json(s.bound_weak)}};
  xi1["rank_correlation"] = s.rank_correlation;
  json xi2 = comparison_json(s.cmp2, s.dev2, s.proj_err2, s.eff2);
  return with_config({{"xi1", xi1},
                      {"xi2", xi2},
                      {"reference_eps",
                       {{"eps", 0.06}, {"strong", bound_json(s.bound_strong_ref)}, {"weak", bound_json(s.bound_weak_ref)}}}});
}

json Pipeline::oracle_json() {
  const auto& o = oracle_sweep();
  return with_config({{"trials", o.trials},
                      {"vacuous", o.vacuous},
                      {"violations_eigenvalue_bound", o.violations_eigenvalue},
                      {"violations_projection_bound", o.violations_projection},
                      {"max_slack_eigenvalue_bound", o.max_slack_eigenvalue},
                      {"max_slack_projection_bound", o.max_slack_projection},
                      {"lumpable_trials", o.lumpable_trials},
                      {"max_lumpable_gap", o.max_lumpable_gap}});
}

namespace {

void write_json(const std::filesystem::path& path, const json& j) { io::atomic_write(path, j.dump(2) + "\n"); }

}  // namespace

void Pipeline::write_simulate() {
  const Trajectory& t = trajectory();
  io::CsvTable csv({"t", "x1", "x2"});
  for (Eigen::Index k = 0; k < t.size(); k += config_.trajectory_stride)
    csv.row({static_cast<double>(k) * t.dt, t.states(0, k), t.states(1, k)});
  io::atomic_write(config_.output_dir / "trajectory.csv", csv.str());
}

void Pipeline::write_spectrum() {
  const SpectrumResult& s = spectrum();
  io::CsvTable table({"index", "eigenvalue", "rate"});
  for (std::size_t i = 0; i < s.pairs.size(); ++i)
    table.row(std::vector<std::string>{std::to_string(i), io::format_number(s.pairs[i].value),
                                       s.rates[i] ? io::format_number(*s.rates[i]) : std::string()});
  io::atomic_write(config_.output_dir / "spectrum.csv", table.str());

  std::vector<std::string> header = {"cell_x1", "cell_x2"};
  for (std::size_t i = 0; i < s.pairs.size(); ++i) header.push_back("phi_" + std::to_string(i));
  io::CsvTable eig(header);
  for (Eigen::Index r = 0; r < s.op.size(); ++r) {
    const Eigen::VectorXd c = grid_.cell_center(s.op.labels[static_cast<std::size_t>(r)]);
    std::vector<double> row = {c[0], c[1]};
    for (const auto& p : s.pairs) row.push_back(p.function[r]);
    eig.row(row);
  }
  io::atomic_write(config_.output_dir / "eigenfunctions.csv", eig.str());
  write_json(config_.output_dir / "spectrum.json", spectrum_json());
}

void Pipeline::write_embed() {
  const Scan& u = uniform_scan();
  io::CsvTable csv({"start_id", "start_x1", "start_x2", "m_x1", "m_x2"});
  for (Eigen::Index i = 0; i < u.starts.cols(); ++i)
    csv.row({static_cast<double>(i), u.starts(0, i), u.starts(1, i), u.means(0, i), u.means(1, i)});
  io::atomic_write(config_.output_dir / "embedding.csv", csv.str());

  const ManifoldAtlas& a = atlas();
  io::CsvTable anchors({"anchor_id", "q_x1", "q_x2", "y", "m_x1", "m_x2"});
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    const Anchor& an = a.anchors[static_cast<std::size_t>(k)];
    anchors.row({static_cast<double>(k), an.state[0], an.state[1], an.parameter[0], an.mean[0], an.mean[1]});
  }
  io::atomic_write(config_.output_dir / "anchors.csv", anchors.str());

  io::CsvTable clouds({"start_id", "l", "x1", "x2"});
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    const EndpointCloud& c = a.anchors[static_cast<std::size_t>(k)].cloud;
    for (Eigen::Index l = 0; l < c.size(); ++l)
      clouds.row({static_cast<double>(k), static_cast<double>(l), c.endpoints(0, l), c.endpoints(1, l)});
  }
  io::atomic_write(config_.output_dir / "clouds.csv", clouds.str());
  write_json(config_.output_dir / "embedding.json", embedding_json());
}

void Pipeline::write_reducibility() {
  const ReducibilitySummary& r = reducibility();
  for (const auto* rep : {&r.embedded, &r.density}) {
    io::CsvTable csv({"start_x1", "start_x2", "anchor_y", "residual", "rho_hat"});
    for (std::size_t i = 0; i < rep->results.size(); ++i) {
      const auto& p = rep->results[i];
      csv.row({p.start[0], p.start[1], p.parameter[0], p.residual, rep->start_weights[i]});
    }
    io::atomic_write(config_.output_dir / ("residuals_" + to_string(rep->metric) + ".csv"), csv.str());
  }
  // Stationary density on the comparison lattice, as used for the 1/rho weight.
  const DensityField& field = rho();
  io::CsvTable density({"x1", "x2", "rho"});
  for (Eigen::Index i = 0; i < field.values.size(); ++i) {
    const Eigen::VectorXd x = field.lattice.cell_center(i);
    density.row({x[0], x[1], field.values[i]});
  }
  io::atomic_write(config_.output_dir / "density.csv", density.str());
  write_json(config_.output_dir / "reducibility.json", reducibility_json());
}

void Pipeline::write_rc_compare() {
  const RCSummary& s = rc();
  for (const auto& [name, field] : {std::pair{"rc_xi1.csv", &s.xi1}, std::pair{"rc_xi2.csv", &s.xi2}}) {
    io::CsvTable csv({"x1", "x2", "xi"});
    for (Eigen::Index i = 0; i < field->size(); ++i) {
      const Eigen::VectorXd x = field->node(i);
      csv.row({x[0], x[1], field->values()[i]});
    }
    io::atomic_write(config_.output_dir / name, csv.str());
  }
  write_json(config_.output_dir / "rc_compare.json", rc_json());
}

void Pipeline::write_oracle() { write_json(config_.output_dir / "oracle.json", oracle_json()); }

PiProperties check_pi_properties(const LevelSetWeights& w, int n_functions, std::uint64_t seed) {
  PiProperties out{0.0, 0.0, -std::numeric_limits<double>::infinity()};
  CounterStream stream(seed, StreamTag::Test, 8);
  auto draw = [&] {
    Eigen::VectorXd f(w.size());
    for (Eigen::Index i = 0; i < f.size(); ++i) f[i] = 2.0 * stream.next_uniform() - 1.0;
    return f;
  };
  for (int k = 0; k < n_functions; ++k) {
    const Eigen::VectorXd f = draw();
    const Eigen::VectorXd g = draw();
    const Eigen::VectorXd pf = apply_pi(w, f);
    out.idempotence = std::max(out.idempotence, (apply_pi(w, pf) - pf).cwiseAbs().maxCoeff());
    out.self_adjoint =
        std::max(out.self_adjoint, std::abs(weighted_inner(w, pf, g) - weighted_inner(w, f, apply_pi(w, g))));
    out.expansion = std::max(out.expansion, weighted_norm(w, pf) - weighted_norm(w, f));
  }
  return out;
}

namespace {

/// Largest |imaginary part| of a general (non-symmetric) eigensolve.
double max_imaginary(const Eigen::MatrixXd& K) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(K, false);
  if (es.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
  return es.eigenvalues().imag().cwiseAbs().maxCoeff();
}

bool in_band(double v, double center, double half) { return std::abs(v - center) <= half; }

}  // namespace

std::vector<CriterionResult> Pipeline::acceptance(std::optional<CriterionResult> determinism) {
  std::vector<CriterionResult> out;
  const SpectrumResult& full = spectrum();
  const double l0 = full.pairs.at(0).value;
  const double l1 = full.pairs.at(1).value;
  const double l2 = full.pairs.at(2).value;

  {
    const bool pass = std::abs(l0 - 1.0) <= 1e-10 && l1 - l2 > 0.2;
    out.push_back({1, "spectral gap", pass,
                   "lambda0-1=" + fmt(l0 - 1.0, 3) + " lambda1=" + fmt(l1, 6) + " lambda2=" + fmt(l2, 6) +
                       " gap=" + fmt(l1 - l2) + " (need |lambda0-1|<=1e-10, gap>0.2)"});
  }

  const RCSummary& s = rc();
  const double sf = full.rates.at(1).value_or(std::numeric_limits<double>::quiet_NaN());
  const double s1 = s.cmp1.sigma_eff.at(1).value_or(std::numeric_limits<double>::quiet_NaN());
  const double s2 = s.cmp2.sigma_eff.at(1).value_or(std::numeric_limits<double>::quiet_NaN());
  {
    const bool pass = in_band(sf, 0.43, 0.03) && in_band(s1, 0.43, 0.03) && in_band(s2, 0.46, 0.03) && s2 - s1 >= 0.01;
    out.push_back({2, "relaxation rates", pass,
                   "sigma_full=" + fmt(sf) + " sigma_xi1=" + fmt(s1) + " sigma_xi2=" + fmt(s2) +
                       " sigma_xi2-sigma_xi1=" + fmt(s2 - s1) + " (need 0.43+-0.03, 0.43+-0.03, 0.46+-0.03, >=0.01)"});
  }

  const double gap1 = s.cmp1.gaps.at(1);
  out.push_back({3, "eigenvalue preservation", gap1 <= 0.01,
                 "|lambda1-lambda_xi1|=" + fmt(gap1, 3) + " (need <=0.01)"});

  {
    const ReducibilitySummary& r = reducibility();
    const double strong = r.density.strong.score;
    const auto& probe = r.probes.at(0);
    const double weak = probe.level_set ? probe.level_set->weak : std::numeric_limits<double>::quiet_NaN();
    bool ordered = true;
    for (const auto* rep : {&r.embedded, &r.density}) {
      ordered = ordered && rep->weak_score <= rep->strong.score;
      for (const auto& ls : rep->per_anchor) ordered = ordered && ls.weak <= ls.max_residual;
    }
    const bool pass = strong >= 1.25 && strong <= 3.75 && weak >= 0.005 && weak <= 0.04 && ordered;
    out.push_back({4, "reducibility scores", pass,
                   "strong=" + fmt(strong) + " at (" + fmt(r.density.strong.start[0], 3) + "," +
                       fmt(r.density.strong.start[1], 3) + ") weak(x* level set)=" + fmt(weak) +
                       " weak<=strong:" + (ordered ? "yes" : "no") + " (need [1.25,3.75], [0.005,0.04]);" +
                       " unnormalized level-set integral=" + fmt(probe.level_set_mass_integral)});
  }

  {
    const bool chain = s.bound_strong.vacuous || gap1 <= s.bound_strong.value;
    const bool proj = s.proj_err1 <= 2.0 * s.dev1.max_avg;
    const bool headline = gap1 <= 0.06;
    out.push_back({5, "bound chain", chain && proj && headline,
                   "gap=" + fmt(gap1, 3) + " bound(proj_err=" + fmt(s.proj_err1) + ")=" +
                       (s.bound_strong.vacuous ? std::string("vacuous") : fmt(s.bound_strong.value)) +
                       " proj_err<=2*max_avg_dev(" + fmt(2.0 * s.dev1.max_avg) + "):" + (proj ? "yes" : "no") +
                       " gap<=0.06:" + (headline ? "yes" : "no")});
  }

  {
    const EmbeddingSummary& e = embedding();
    const bool pass = e.fit.rms < 0.1 && e.equilibrium_within_fraction >= 0.95;
    out.push_back({6, "embedding geometry", pass,
                   "anchor fit rms=" + fmt(e.fit.rms, 3) + " equilibrium within 3x spacing(" +
                       fmt(3.0 * e.median_anchor_spacing, 3) + ")=" + fmt(100.0 * e.equilibrium_within_fraction) +
                       "% (need rms<0.1, >=95%)"});
  }

  {
    const auto& o = oracle_sweep();
    const bool pass = o.violations() == 0 && o.max_lumpable_gap <= 1e-12 && oracle_seconds_ < 60.0;
    out.push_back({7, "oracle suite", pass,
                   std::to_string(o.trials) + " trials, " + std::to_string(o.violations()) + " violations, " +
                       std::to_string(o.vacuous) + " vacuous, lumpable gap=" + fmt(o.max_lumpable_gap, 3) + ", " +
                       fmt(oracle_seconds_, 3) + " s"});
  }

  {
    const PiProperties p1 = check_pi_properties(s.weights1, 100, config_.seed);
    const PiProperties p2 = check_pi_properties(s.weights2, 100, config_.seed + 1);
    const double idem = std::max(p1.idempotence, p2.idempotence);
    const double adj = std::max(p1.self_adjoint, p2.self_adjoint);
    const double exp = std::max(p1.expansion, p2.expansion);
    double stoch = full.op.row_sum_residual();
    double balance = full.op.detailed_balance_residual();
    double imag = 0.0;
    double range = 0.0;
    for (const auto* op : {&s.eff1, &s.eff2}) {
      stoch = std::max(stoch, op->row_sum_residual());
      balance = std::max(balance, op->detailed_balance_residual());
      imag = std::max(imag, max_imaginary(op->matrix));
    }
    for (const auto* spec : {&s.spec1, &s.spec2})
      for (const auto& p : *spec) range = std::max(range, std::abs(p.value) - 1.0);
    bool pass = idem <= 1e-12 && adj <= 1e-12 && exp <= 1e-12 && stoch <= 1e-12 && balance <= 1e-12 &&
                imag <= 1e-10 && range <= 1e-10;
    std::string detail = "Pi idempotence=" + fmt(idem, 2) + " self-adjoint=" + fmt(adj, 2) +
                         " expansion=" + fmt(exp, 2) + " row-sum=" + fmt(stoch, 2) + " balance=" + fmt(balance, 2) +
                         " imag=" + fmt(imag, 2);
    if (determinism) {
      pass = pass && determinism->pass;
      detail += " determinism: " + determinism->detail;
    } else {
      detail += " determinism: not run";
      pass = false;
    }
    out.push_back({8, "operator invariants", pass, detail});
  }

  out.push_back({9, "level-set rank correlation", std::abs(s.rank_correlation) > 0.95,
                 "|spearman(xi1, phi1)|=" + fmt(std::abs(s.rank_correlation)) + " (need >0.95)"});
  return out;
}

json Pipeline::acceptance_json(const std::vector<CriterionResult>& criteria) {
  json list = json::array();
  bool all = true;
  for (const auto& c : criteria) {
    list.push_back({{"id", c.id}, {"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    all = all && c.pass;
  }
  return with_config({{"all_pass", all}, {"criteria", list}});
}

PipelineConfig reduced_config(PipelineConfig c) {
  c.steps = 200'000;
  c.burn_in = 1000;
  c.grid = 20;
  c.n_starts = 64;
  c.M = 100;
  c.n_anchors = 12;
  c.density_lattice = 30;
  c.rc_lattice = 8;
  c.n_bins = 20;
  c.n_equilibrium = 32;
  c.oracle_trials = 200;
  return c;
}

CriterionResult determinism_check(PipelineConfig config) {
  config.cache = false;
  auto run = [&] {
    Pipeline p(config);
    std::string out = p.spectrum_json().dump();
    out += p.embedding_json().dump();
    out += p.reducibility_json().dump();
    out += p.rc_json().dump();
    out += p.oracle_json().dump();
    return out;
  };
  const std::string a = run();
  const std::string b = run();
  const bool same = a == b;
  return {8, "determinism", same,
          std::string(same ? "identical" : "DIFFERENT") + " reports (" + std::to_string(a.size()) + " bytes, hash " +
              io::hex64(io::fnv1a(a)) + ")"};
}

}  // namespace wtm
