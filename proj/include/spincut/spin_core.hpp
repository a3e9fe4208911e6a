#ifndef SPINCUT_SPIN_CORE_HPP
#define SPINCUT_SPIN_CORE_HPP

// Spin-1/2 operators on the 2^N product space, the split Heisenberg
// Hamiltonian H = H0 + V, and ground-state selection.
//
// Basis convention: sigma-z product basis, site 1 is the most significant
// bit and |up> maps to bit value 0, so |up up ... up> is index 0.

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "spincut/errors.hpp"

namespace spincut {

using Complex = std::complex<double>;
using OperatorMatrix = Eigen::MatrixXcd;
using StateVector = Eigen::VectorXcd;

inline constexpr int kDefaultMaxSpins = 12;
/// Relative (to the spectral range) gap below which two levels count as degenerate.
inline constexpr double kDegeneracyTolerance = 1e-9;
/// Coupling offset used to split a degenerate ground space.
inline constexpr double kSelectionOffset = 1e-6;

enum class Topology { open, ring };
enum class Axis { x, y, z };

/// Nearest-neighbour bond between two 1-based sites, stored with first < second.
struct Bond {
  int first = 1;
  int second = 2;

  Bond() = default;
  Bond(int a, int b) : first(std::min(a, b)), second(std::max(a, b)) {}

  friend bool operator==(const Bond&, const Bond&) = default;
  friend auto operator<=>(const Bond&, const Bond&) = default;
};

struct ChainSpec {
  int n_spins = 2;
  Topology topology = Topology::open;
  double exchange = 1.0;  // J
  double field = 0.0;     // B, along z
  std::vector<Bond> cut_bonds;

  /// Detach site 1: bond (1,2) for an open chain, (1,2) and (1,N) for a ring.
  static ChainSpec single_spin_cut(int n, Topology topology, double exchange, double field) {
    ChainSpec spec;
    spec.n_spins = n;
    spec.topology = topology;
    spec.exchange = exchange;
    spec.field = field;
    spec.cut_bonds.emplace_back(1, 2);
    if (topology == Topology::ring) spec.cut_bonds.emplace_back(1, n);
    return spec;
  }

  std::vector<Bond> bonds() const {
    std::vector<Bond> all;
    for (int n = 1; n < n_spins; ++n) all.emplace_back(n, n + 1);
    if (topology == Topology::ring && n_spins > 2) all.emplace_back(1, n_spins);
    return all;
  }

  bool is_bond(const Bond& bond) const {
    const auto all = bonds();
    return std::find(all.begin(), all.end(), bond) != all.end();
  }

  bool is_cut(const Bond& bond) const {
    return std::find(cut_bonds.begin(), cut_bonds.end(), bond) != cut_bonds.end();
  }

  std::size_t dimension() const { return std::size_t{1} << n_spins; }

  /// Throws ArgumentError describing the first violated invariant.
  void validate(int max_spins = kDefaultMaxSpins) const {
    if (n_spins < 2) throw ArgumentError("n_spins must be >= 2, got " + std::to_string(n_spins));
    if (n_spins > max_spins) {
      throw ArgumentError("n_spins " + std::to_string(n_spins) + " exceeds the cap of " +
                          std::to_string(max_spins));
    }
    if (topology == Topology::ring && n_spins < 3) throw ArgumentError("a ring needs at least 3 spins");
    if (!std::isfinite(exchange) || !std::isfinite(field)) throw ArgumentError("J and B must be finite");
    if (cut_bonds.empty()) throw ArgumentError("cut_bonds must not be empty");
    for (std::size_t i = 0; i < cut_bonds.size(); ++i) {
      const Bond& b = cut_bonds[i];
      if (!is_bond(b)) {
        throw ArgumentError("cut bond (" + std::to_string(b.first) + "," + std::to_string(b.second) +
                            ") does not join adjacent sites");
      }
      if (std::find(cut_bonds.begin(), cut_bonds.begin() + static_cast<std::ptrdiff_t>(i), b) !=
          cut_bonds.begin() + static_cast<std::ptrdiff_t>(i)) {
        throw ArgumentError("duplicate cut bond (" + std::to_string(b.first) + "," +
                            std::to_string(b.second) + ")");
      }
    }
  }
};

namespace detail {

inline std::size_t site_mask(int site, int n_spins) { return std::size_t{1} << (n_spins - site); }

inline void check_site(int site, int n_spins) {
  if (n_spins < 1 || site < 1 || site > n_spins) {
    throw ArgumentError("site " + std::to_string(site) + " outside 1.." + std::to_string(n_spins));
  }
}

// sigma_i . sigma_j added in place: diagonal +-1, flip-flop amplitude 2 on antiparallel pairs.
inline void add_exchange(OperatorMatrix& h, int i, int j, int n_spins, double coupling) {
  const std::size_t mi = site_mask(i, n_spins);
  const std::size_t mj = site_mask(j, n_spins);
  const auto dim = static_cast<std::size_t>(h.rows());
  for (std::size_t s = 0; s < dim; ++s) {
    const bool ui = (s & mi) == 0;
    const bool uj = (s & mj) == 0;
    const auto si = static_cast<Eigen::Index>(s);
    if (ui == uj) {
      h(si, si) += coupling;
    } else {
      h(si, si) -= coupling;
      h(static_cast<Eigen::Index>(s ^ mi ^ mj), si) += 2.0 * coupling;
    }
  }
}

inline void add_zeeman(OperatorMatrix& h, int n_spins, double field) {
  const auto dim = static_cast<std::size_t>(h.rows());
  for (std::size_t s = 0; s < dim; ++s) {
    const int down = std::popcount(static_cast<std::uint64_t>(s));
    h(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s)) += field * (n_spins - 2 * down);
  }
}

}  // namespace detail

/// sigma_axis acting on `site` (1-based) of an n-spin register.
inline OperatorMatrix pauli_site_operator(int site, Axis axis, int n_spins) {
  detail::check_site(site, n_spins);
  const std::size_t dim = std::size_t{1} << n_spins;
  const std::size_t mask = detail::site_mask(site, n_spins);
  OperatorMatrix op = OperatorMatrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (std::size_t s = 0; s < dim; ++s) {
    const bool up = (s & mask) == 0;
    const auto col = static_cast<Eigen::Index>(s);
    const auto flipped = static_cast<Eigen::Index>(s ^ mask);
    switch (axis) {
      case Axis::x: op(flipped, col) = 1.0; break;
      // sigma_y |up> = i|down>, sigma_y |down> = -i|up>
      case Axis::y: op(flipped, col) = up ? Complex(0.0, 1.0) : Complex(0.0, -1.0); break;
      case Axis::z: op(col, col) = up ? 1.0 : -1.0; break;
    }
  }
  return op;
}

/// Sum of sigma^z over all sites.
inline OperatorMatrix total_magnetization(int n_spins) {
  const auto dim = static_cast<Eigen::Index>(std::size_t{1} << n_spins);
  OperatorMatrix m = OperatorMatrix::Zero(dim, dim);
  detail::add_zeeman(m, n_spins, 1.0);
  return m;
}

/// The static part H0 and the switched coupling V, with H(t) = H0 + g(t) V.
struct SplitHamiltonian {
  OperatorMatrix h0;
  OperatorMatrix v;

  OperatorMatrix at(double g) const { return h0 + g * v; }
};

inline SplitHamiltonian assemble_hamiltonian(const ChainSpec& spec) {
  spec.validate();
  const auto dim = static_cast<Eigen::Index>(spec.dimension());
  SplitHamiltonian split{OperatorMatrix::Zero(dim, dim), OperatorMatrix::Zero(dim, dim)};
  for (const Bond& b : spec.bonds()) {
    OperatorMatrix& target = spec.is_cut(b) ? split.v : split.h0;
    detail::add_exchange(target, b.first, b.second, spec.n_spins, spec.exchange);
  }
  detail::add_zeeman(split.h0, spec.n_spins, spec.field);
  return split;
}

inline void check_same_shape(const OperatorMatrix& a, const OperatorMatrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ArgumentError(std::string(what) + ": dimension mismatch (" + std::to_string(a.rows()) + " vs " +
                        std::to_string(b.rows()) + ")");
  }
}

inline double commutator_frobenius_norm(const OperatorMatrix& a, const OperatorMatrix& b) {
  check_same_shape(a, b, "commutator_frobenius_norm");
  return (a * b - b * a).norm();
}

inline bool is_hermitian(const OperatorMatrix& h, double tol = 1e-12) {
  if (h.rows() != h.cols()) return false;
  return (h - h.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

/// Eigenvalues ascending, eigenvectors as orthonormal columns.
struct SpectralDecomposition {
  Eigen::VectorXd eigenvalues;
  OperatorMatrix eigenvectors;

  double spectral_range() const {
    return eigenvalues.size() == 0 ? 0.0 : eigenvalues(eigenvalues.size() - 1) - eigenvalues(0);
  }

  /// Number of levels within `tol` * spectral range of the lowest one.
  Eigen::Index ground_multiplicity(double tol = kDegeneracyTolerance) const {
    const double window = tol * spectral_range();
    Eigen::Index count = 1;
    while (count < eigenvalues.size() && eigenvalues(count) - eigenvalues(0) <= window) ++count;
    return count;
  }
};

/// Dense Hermitian eigendecomposition. Takes the real symmetric path when
/// every imaginary part is exactly zero.
inline SpectralDecomposition spectral_decomposition(const OperatorMatrix& h) {
  if (h.rows() != h.cols()) throw ArgumentError("spectral_decomposition: matrix is not square");
  if (h.imag().cwiseAbs().maxCoeff() == 0.0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h.real());
    return {solver.eigenvalues(), solver.eigenvectors().cast<Complex>()};
  }
  Eigen::SelfAdjointEigenSolver<OperatorMatrix> solver(h);
  return {solver.eigenvalues(), solver.eigenvectors()};
}

struct GroundStateSelection {
  double energy = 0.0;
  StateVector state;
  bool degenerate = false;
  double selection_offset = kSelectionOffset;
};

/// Normalized projection of `target` onto the lowest `multiplicity` eigenvectors.
inline StateVector project_onto_ground_space(const SpectralDecomposition& decomposition,
                                             Eigen::Index multiplicity, const StateVector& target) {
  const auto subspace = decomposition.eigenvectors.leftCols(multiplicity);
  const StateVector coefficients = subspace.adjoint() * target;
  const double weight = coefficients.norm();
  if (weight < 1e-8) throw DegeneracyError("reference state is orthogonal to the degenerate ground space");
  return subspace * (coefficients / weight);
}

/// Lowest eigenpair; a degenerate ground space is an error here since there is
/// nothing to choose by.
inline GroundStateSelection ground_state(const OperatorMatrix& h) {
  const SpectralDecomposition d = spectral_decomposition(h);
  if (d.ground_multiplicity() > 1) {
    throw DegeneracyError("degenerate ground space (multiplicity " + std::to_string(d.ground_multiplicity()) +
                          ") and no continuity reference");
  }
  return {d.eigenvalues(0), d.eigenvectors.col(0), false, 0.0};
}

/// Lowest eigenpair of `h`. A degenerate ground space is resolved by taking
/// the vector in it closest to the unique ground state of `continuity_reference`,
/// usually H0 + (g +- offset) V.
inline GroundStateSelection ground_state(const OperatorMatrix& h, const OperatorMatrix& continuity_reference,
                                         double selection_offset = kSelectionOffset) {
  check_same_shape(h, continuity_reference, "ground_state");
  const SpectralDecomposition d = spectral_decomposition(h);
  const Eigen::Index multiplicity = d.ground_multiplicity();
  if (multiplicity == 1) return {d.eigenvalues(0), d.eigenvectors.col(0), false, selection_offset};

  const SpectralDecomposition reference = spectral_decomposition(continuity_reference);
  if (reference.ground_multiplicity() > 1) {
    throw DegeneracyError("unresolvable degeneracy: the perturbed Hamiltonian is degenerate as well");
  }
  return {d.eigenvalues(0), project_onto_ground_space(d, multiplicity, reference.eigenvectors.col(0)), true,
          selection_offset};
}

/// Ground state of H0 + g V. If degenerate it is selected as the limit of
/// the ground state of H0 + (g + approach * offset) V, approach = -1 or +1.
inline GroundStateSelection endpoint_ground_state(const SplitHamiltonian& split, double g, int approach,
                                                  double selection_offset = kSelectionOffset) {
  return ground_state(split.at(g), split.at(g + approach * selection_offset), selection_offset);
}

/// Sites (ascending, 1-based) still connected to site 1 once the cut bonds are removed.
inline std::vector<int> detached_block(const ChainSpec& spec) {
  std::vector<int> block{1};
  std::vector<bool> seen(static_cast<std::size_t>(spec.n_spins) + 1, false);
  seen[1] = true;
  for (std::size_t k = 0; k < block.size(); ++k) {
    for (const Bond& b : spec.bonds()) {
      if (spec.is_cut(b)) continue;
      int next = 0;
      if (b.first == block[k]) next = b.second;
      if (b.second == block[k]) next = b.first;
      if (next != 0 && !seen[static_cast<std::size_t>(next)]) {
        seen[static_cast<std::size_t>(next)] = true;
        block.push_back(next);
      }
    }
  }
  if (static_cast<int>(block.size()) == spec.n_spins) {
    throw ArgumentError("cut bonds do not separate the chain into two parts");
  }
  std::sort(block.begin(), block.end());
  return block;
}

/// H0 restricted to `sites`: intact bonds inside the block plus the Zeeman term,
/// with sites relabelled 1..k in ascending order.
inline OperatorMatrix block_hamiltonian(const ChainSpec& spec, const std::vector<int>& sites) {
  const int k = static_cast<int>(sites.size());
  if (k == 0) throw ArgumentError("block_hamiltonian: empty site set");
  auto local = [&](int site) {
    const auto it = std::find(sites.begin(), sites.end(), site);
    return it == sites.end() ? 0 : static_cast<int>(it - sites.begin()) + 1;
  };
  const auto dim = static_cast<Eigen::Index>(std::size_t{1} << k);
  OperatorMatrix h = OperatorMatrix::Zero(dim, dim);
  for (const Bond& b : spec.bonds()) {
    const int i = local(b.first);
    const int j = local(b.second);
    if (i != 0 && j != 0 && !spec.is_cut(b)) detail::add_exchange(h, i, j, k, spec.exchange);
  }
  detail::add_zeeman(h, k, spec.field);
  return h;
}

}  // namespace spincut

#endif  // SPINCUT_SPIN_CORE_HPP
