#ifndef SPINCUT_DYNAMICS_HPP
#define SPINCUT_DYNAMICS_HPP

// Time evolution under H(t) = H0 + g(t) V and the observables tracked along it.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "spincut/control.hpp"
#include "spincut/errors.hpp"
#include "spincut/spin_core.hpp"

namespace spincut {

using DensityOperator = Eigen::MatrixXcd;

/// Eigenpairs of one H0 + g V, kept real when the Hamiltonian is real.
struct Eigenbasis {
  Eigen::VectorXd values;
  Eigen::MatrixXd real_vectors;
  OperatorMatrix complex_vectors;
  bool real = true;

  static Eigenbasis of(const Eigen::MatrixXd& h) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
    return {solver.eigenvalues(), solver.eigenvectors(), {}, true};
  }

  static Eigenbasis of(const OperatorMatrix& h) {
    Eigen::SelfAdjointEigenSolver<OperatorMatrix> solver(h);
    return {solver.eigenvalues(), {}, solver.eigenvectors(), false};
  }

  /// psi <- exp(-i H dt) psi
  void evolve(StateVector& psi, double dt) const {
    const StateVector phases = (values.array() * Complex(0.0, -dt)).exp().matrix();
    if (real) {
      const StateVector c = real_vectors.transpose() * psi;
      psi.noalias() = real_vectors * phases.cwiseProduct(c);
    } else {
      const StateVector c = complex_vectors.adjoint() * psi;
      psi.noalias() = complex_vectors * phases.cwiseProduct(c);
    }
  }

  OperatorMatrix unitary(double dt) const {
    const StateVector phases = (values.array() * Complex(0.0, -dt)).exp().matrix();
    const OperatorMatrix q = real ? OperatorMatrix(real_vectors.cast<Complex>()) : complex_vectors;
    return q * phases.asDiagonal() * q.adjoint();
  }

  SpectralDecomposition spectral() const {
    return {values, real ? OperatorMatrix(real_vectors.cast<Complex>()) : complex_vectors};
  }
};

/// exp(-i (h0 + g v) dt) from the spectral decomposition of the generator.
inline OperatorMatrix step_unitary(const OperatorMatrix& h0, const OperatorMatrix& v, double g_value, double dt) {
  check_same_shape(h0, v, "step_unitary");
  if (!(dt > 0.0)) throw ArgumentError("step_unitary: dt must be > 0");
  const OperatorMatrix h = h0 + g_value * v;
  const Eigenbasis basis = h.imag().cwiseAbs().maxCoeff() == 0.0 ? Eigenbasis::of(Eigen::MatrixXd(h.real()))
                                                                  : Eigenbasis::of(h);
  return basis.unitary(dt);
}

/// Holds a split Hamiltonian and hands out eigenbases of H0 + g V.
///
/// Decompositions requested with `memoize` are cached by g (bounded by
/// `memo_bytes`, cleared wholesale when full). The cache is mutex-guarded,
/// so one Propagator may be shared by concurrent trajectories.
class Propagator {
 public:
  explicit Propagator(SplitHamiltonian split, std::size_t memo_bytes = std::size_t{256} << 20)
      : split_(std::move(split)) {
    check_same_shape(split_.h0, split_.v, "Propagator");
    if (!is_hermitian(split_.h0, 1e-12) || !is_hermitian(split_.v, 1e-12)) {
      throw ArgumentError("Propagator: H0 and V must be Hermitian");
    }
    real_ = split_.h0.imag().cwiseAbs().maxCoeff() == 0.0 && split_.v.imag().cwiseAbs().maxCoeff() == 0.0;
    if (real_) {
      h0_real_ = split_.h0.real();
      v_real_ = split_.v.real();
    }
    const auto dim = static_cast<std::size_t>(std::max<Eigen::Index>(1, split_.h0.rows()));
    memo_capacity_ = std::max<std::size_t>(1, memo_bytes / (dim * dim * sizeof(double) * (real_ ? 1 : 2)));
  }

  const SplitHamiltonian& split() const { return split_; }
  Eigen::Index dimension() const { return split_.h0.rows(); }

  std::shared_ptr<const Eigenbasis> eigenbasis(double g, bool memoize = false) const {
    if (!memoize) return std::make_shared<const Eigenbasis>(compute(g));
    {
      std::lock_guard lock(mutex_);
      if (auto it = memo_.find(g); it != memo_.end()) {
        ++memo_hits_;
        return it->second;
      }
    }
    auto basis = std::make_shared<const Eigenbasis>(compute(g));
    std::lock_guard lock(mutex_);
    if (memo_.size() >= memo_capacity_) memo_.clear();
    memo_.emplace(g, basis);
    return basis;
  }

  std::size_t memo_hits() const {
    std::lock_guard lock(mutex_);
    return memo_hits_;
  }

 private:
  Eigenbasis compute(double g) const {
    if (real_) return Eigenbasis::of(Eigen::MatrixXd(h0_real_ + g * v_real_));
    return Eigenbasis::of(OperatorMatrix(split_.at(g)));
  }

  SplitHamiltonian split_;
  bool real_ = false;
  Eigen::MatrixXd h0_real_;
  Eigen::MatrixXd v_real_;
  std::size_t memo_capacity_ = 1;
  mutable std::mutex mutex_;
  mutable std::map<double, std::shared_ptr<const Eigenbasis>> memo_;
  mutable std::size_t memo_hits_ = 0;
};

inline int spin_count_of(Eigen::Index dim) {
  int n = 0;
  while ((Eigen::Index{1} << n) < dim) ++n;
  if ((Eigen::Index{1} << n) != dim || n == 0) throw ArgumentError("state dimension is not 2^N with N >= 1");
  return n;
}

/// Sites of 1..n_spins not in `sites`.
inline std::vector<int> complement_sites(const std::vector<int>& sites, int n_spins) {
  std::vector<int> rest;
  for (int s = 1; s <= n_spins; ++s) {
    if (std::find(sites.begin(), sites.end(), s) == sites.end()) rest.push_back(s);
  }
  return rest;
}

/// rho_A = Tr_B |psi><psi| with A = `subsystem_sites`, indexed in the product
/// basis of the kept sites taken in ascending order.
inline DensityOperator reduce_density(const StateVector& psi, std::vector<int> subsystem_sites) {
  const int n = spin_count_of(psi.size());
  std::sort(subsystem_sites.begin(), subsystem_sites.end());
  subsystem_sites.erase(std::unique(subsystem_sites.begin(), subsystem_sites.end()), subsystem_sites.end());
  if (subsystem_sites.empty() || static_cast<int>(subsystem_sites.size()) >= n) {
    throw ArgumentError("reduce_density: subsystem must be a nonempty proper subset of the sites");
  }
  for (int s : subsystem_sites) detail::check_site(s, n);
  const std::vector<int> traced = complement_sites(subsystem_sites, n);

  const auto dim_a = Eigen::Index{1} << subsystem_sites.size();
  const auto dim_b = Eigen::Index{1} << traced.size();
  // amplitudes reshaped to (A index, B index)
  OperatorMatrix m(dim_a, dim_b);
  for (Eigen::Index s = 0; s < psi.size(); ++s) {
    Eigen::Index a = 0;
    Eigen::Index b = 0;
    for (int site : subsystem_sites) a = (a << 1) | ((s >> (n - site)) & 1);
    for (int site : traced) b = (b << 1) | ((s >> (n - site)) & 1);
    m(a, b) = psi(s);
  }
  return m * m.adjoint();
}

inline double purity(const DensityOperator& rho) { return (rho * rho).trace().real(); }

/// Von Neumann entropy with the natural log; eigenvalues below 1e-14 are dropped.
inline double entropy(const DensityOperator& rho) {
  Eigen::SelfAdjointEigenSolver<DensityOperator> solver(rho, Eigen::EigenvaluesOnly);
  double s = 0.0;
  for (double lambda : solver.eigenvalues()) {
    if (lambda > 1e-14) s -= lambda * std::log(lambda);
  }
  return s;
}

/// sqrt(<phi|rho|phi>)
inline double cut_fidelity(const DensityOperator& rho_a, const StateVector& phi_0a) {
  if (rho_a.rows() != phi_0a.size() || rho_a.cols() != phi_0a.size()) {
    throw ArgumentError("cut_fidelity: dimension mismatch");
  }
  const double overlap = phi_0a.dot(rho_a * phi_0a).real();
  return std::sqrt(std::max(0.0, overlap));
}

/// |<psi_0|psi>| for the ground state psi_0 of `h_instant`.
inline double ground_fidelity(const StateVector& psi, const OperatorMatrix& h_instant) {
  if (h_instant.rows() != psi.size()) throw ArgumentError("ground_fidelity: dimension mismatch");
  return std::abs(ground_state(h_instant).state.dot(psi));
}

inline double ground_fidelity(const StateVector& psi, const OperatorMatrix& h_instant,
                              const OperatorMatrix& continuity_reference, double selection_offset = kSelectionOffset) {
  if (h_instant.rows() != psi.size()) throw ArgumentError("ground_fidelity: dimension mismatch");
  return std::abs(ground_state(h_instant, continuity_reference, selection_offset).state.dot(psi));
}

/// What to record while propagating. `stride` = 0 records nothing; otherwise
/// t = 0, every `stride`-th step boundary, and the final time are sampled.
struct SamplingPolicy {
  int stride = 0;
  std::vector<int> block;   // subsystem A sites
  StateVector block_ground; // ground state of A after the cut
  double selection_offset = kSelectionOffset;

  static SamplingPolicy none() { return {}; }
};

struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<double> g_values;
  std::vector<double> f_c;
  std::vector<double> f_g;
  std::vector<double> purity_a;
  std::vector<double> purity_b;
  std::vector<double> entropy_a;
  std::vector<double> entropy_b;
  std::vector<double> gap;
  std::vector<double> norm;
  std::vector<bool> degenerate;  // instantaneous ground space was degenerate at this sample

  std::size_t size() const { return times.size(); }
};

/// Columns t,g,f_c,f_g,purity_A,entropy_A,entropy_B,gap with 17 significant digits.
inline void write_trajectory_csv(std::ostream& out, const TrajectoryRecord& record) {
  out << "t,g,f_c,f_g,purity_A,entropy_A,entropy_B,gap\n";
  char line[512];
  for (std::size_t k = 0; k < record.size(); ++k) {
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", record.times[k],
                  record.g_values[k], record.f_c[k], record.f_g[k], record.purity_a[k], record.entropy_a[k],
                  record.entropy_b[k], record.gap[k]);
    out << line;
  }
}

struct PropagationResult {
  StateVector state;
  TrajectoryRecord record;
};

namespace detail {

class Sampler {
 public:
  Sampler(const Propagator& propagator, const SamplingPolicy& policy, Direction direction)
      : propagator_(propagator), policy_(policy), direction_(direction) {
    // TODO: accept an explicit previous-ground seed so a trajectory split
    // across two propagate calls keeps one continuity chain.
    const int n = spin_count_of(propagator.dimension());
    complement_ = complement_sites(policy.block, n);
    if (policy.block.empty() || complement_.empty()) throw ArgumentError("sampling needs a proper subsystem block");
    if (policy.block_ground.size() != (Eigen::Index{1} << policy.block.size())) {
      throw ArgumentError("sampling: block ground state has the wrong dimension");
    }
  }

  void sample(TrajectoryRecord& record, double t, double g, const StateVector& psi) {
    const DensityOperator rho_a = reduce_density(psi, policy_.block);
    const DensityOperator rho_b = reduce_density(psi, complement_);
    const SpectralDecomposition spectrum = propagator_.eigenbasis(g)->spectral();
    const Eigen::Index multiplicity = spectrum.ground_multiplicity();
    StateVector ground;
    if (multiplicity == 1) {
      ground = spectrum.eigenvectors.col(0);
    } else if (previous_ground_.size() == 0) {
      const int approach = direction_ == Direction::cut ? -1 : +1;
      ground = endpoint_ground_state(propagator_.split(), g, approach, policy_.selection_offset).state;
    } else {
      try {
        ground = project_onto_ground_space(spectrum, multiplicity, previous_ground_);
      } catch (const DegeneracyError&) {
        ground = spectrum.eigenvectors.col(0);
      }
    }
    previous_ground_ = ground;

    record.times.push_back(t);
    record.g_values.push_back(g);
    record.f_c.push_back(cut_fidelity(rho_a, policy_.block_ground));
    record.f_g.push_back(std::abs(ground.dot(psi)));
    record.purity_a.push_back(purity(rho_a));
    record.purity_b.push_back(purity(rho_b));
    record.entropy_a.push_back(entropy(rho_a));
    record.entropy_b.push_back(entropy(rho_b));
    record.gap.push_back(spectrum.eigenvalues.size() > 1 ? spectrum.eigenvalues(1) - spectrum.eigenvalues(0) : 0.0);
    record.norm.push_back(psi.norm());
    record.degenerate.push_back(multiplicity > 1);
  }

 private:
  const Propagator& propagator_;
  const SamplingPolicy& policy_;
  Direction direction_;
  std::vector<int> complement_;
  StateVector previous_ground_;
};

}  // namespace detail

/// Product of exp(-i H(t_k*) dt_k) over the schedule's step grid, with g
/// sampled at each step midpoint t_k*. Pulse trains step once per pulse, so
/// their factors are exact.
template <Schedule S>
PropagationResult propagate(const Propagator& propagator, const S& schedule, const StateVector& psi0, int n_steps,
                            const SamplingPolicy& policy = {}) {
  if (!(schedule.duration() > 0.0)) throw ArgumentError("propagate: schedule duration must be > 0");
  if (n_steps < 1) throw ArgumentError("propagate: n_steps must be >= 1");
  if (psi0.size() != propagator.dimension()) throw ArgumentError("propagate: state dimension mismatch");
  if (std::abs(psi0.norm() - 1.0) > 1e-10) throw ArgumentError("propagate: initial state is not normalized");

  const std::vector<double> grid = schedule.step_grid(n_steps);
  const bool memoize = schedule.piecewise_constant();
  PropagationResult result{psi0, {}};
  std::unique_ptr<detail::Sampler> sampler;
  if (policy.stride > 0) {
    sampler = std::make_unique<detail::Sampler>(propagator, policy, schedule.direction());
    sampler->sample(result.record, 0.0, schedule.value(0.0), result.state);
  }
  const std::size_t steps = grid.size() - 1;
  for (std::size_t k = 0; k < steps; ++k) {
    const double dt = grid[k + 1] - grid[k];
    const double g = schedule.value(0.5 * (grid[k] + grid[k + 1]));
    propagator.eigenbasis(g, memoize)->evolve(result.state, dt);
    if (sampler && ((k + 1) % static_cast<std::size_t>(policy.stride) == 0 || k + 1 == steps)) {
      const double t = grid[k + 1];
      sampler->sample(result.record, t, schedule.value(t), result.state);
    }
  }
  return result;
}

template <Schedule S>
PropagationResult propagate(const OperatorMatrix& h0, const OperatorMatrix& v, const S& schedule,
                            const StateVector& psi0, int n_steps, const SamplingPolicy& policy = {}) {
  return propagate(Propagator(SplitHamiltonian{h0, v}), schedule, psi0, n_steps, policy);
}

struct FinalFidelities {
  double f_c = 0.0;
  double f_g = 0.0;
};

/// A cut or stitch of a concrete chain: the split Hamiltonian, the initial
/// state, the detached block with its ground state, and the ground state of
/// the final Hamiltonian. Degenerate endpoints are resolved by approaching
/// g from inside [0, 1].
class SwitchingProcess {
 public:
  SwitchingProcess(const ChainSpec& chain, Direction direction, double selection_offset = kSelectionOffset)
      : chain_(chain),
        direction_(direction),
        selection_offset_(selection_offset),
        propagator_(std::make_shared<const Propagator>(assemble_hamiltonian(chain))),
        block_(detached_block(chain)) {
    const double g_start = direction == Direction::cut ? 1.0 : 0.0;
    const double g_end = 1.0 - g_start;
    const int inward_from_start = direction == Direction::cut ? -1 : +1;
    initial_ = endpoint_ground_state(propagator_->split(), g_start, inward_from_start, selection_offset);
    final_ = endpoint_ground_state(propagator_->split(), g_end, -inward_from_start, selection_offset);
    block_ground_ = ground_state(block_hamiltonian(chain, block_)).state;
  }

  const ChainSpec& chain() const { return chain_; }
  Direction direction() const { return direction_; }
  const Propagator& propagator() const { return *propagator_; }
  const GroundStateSelection& initial() const { return initial_; }
  const GroundStateSelection& final_ground() const { return final_; }
  const std::vector<int>& block() const { return block_; }
  const StateVector& block_ground() const { return block_ground_; }

  SamplingPolicy sampling(int stride) const { return {stride, block_, block_ground_, selection_offset_}; }

  template <Schedule S>
  PropagationResult run(const S& schedule, int n_steps, int stride = 0) const {
    check_direction(schedule.direction());
    return propagate(*propagator_, schedule, initial_.state, n_steps, sampling(stride));
  }

  FinalFidelities fidelities(const StateVector& final_state) const {
    return {cut_fidelity(reduce_density(final_state, block_), block_ground_),
            std::abs(final_.state.dot(final_state))};
  }

  template <Schedule S>
  FinalFidelities evaluate(const S& schedule, int n_steps) const {
    return fidelities(run(schedule, n_steps).state);
  }

 private:
  void check_direction(Direction d) const {
    if (d != direction_) throw ArgumentError("schedule direction does not match the process");
  }

  ChainSpec chain_;
  Direction direction_;
  double selection_offset_;
  std::shared_ptr<const Propagator> propagator_;
  std::vector<int> block_;
  GroundStateSelection initial_;
  GroundStateSelection final_;
  StateVector block_ground_;
};

}  // namespace spincut

#endif  // SPINCUT_DYNAMICS_HPP
