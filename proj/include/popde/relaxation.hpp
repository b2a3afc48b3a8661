#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "popde/pop.hpp"

namespace popde {

// Variable cliques covering every constraint support, plus an owner clique
// per constraint. Built either from a chordal extension of the correlative
// sparsity graph (running-intersection certified) or directly from merged
// constraint supports when the chordal route would blow up block sizes.
struct CliqueSet {
  std::vector<std::vector<int>> cliques;  // sorted variable lists
  std::vector<int> owner_eq;
  std::vector<int> owner_ineq;
  bool rip_certified = false;
  std::string mode;  // "chordal", "support" or "dense"

  int max_clique_size() const;
  void validate(const POPInstance& pop) const;
};

struct CliqueOptions {
  enum class Mode { auto_select, chordal, support, dense };
  Mode mode = Mode::auto_select;
  // auto_select keeps the chordal result only while its largest clique
  // stays below this cap, else falls back to merged constraint supports
  int chordal_size_cap = 16;
};

CliqueSet csp_cliques(const POPInstance& pop, const CliqueOptions& opt = {});

// Checks the running-intersection property of the clique ordering.
bool check_running_intersection(const std::vector<std::vector<int>>& cliques);

// Moment-vector layout: positions 0..nvars-1 are the degree-1 moments in POP
// variable order; higher monomials follow in deterministic discovery order.
// The constant monomial is not stored; it enters affine maps as the fixed
// value 1.
struct MomentIndex {
  int w = 0;
  int pop_nvars = 0;
  std::vector<Monomial> monomials;
  std::unordered_map<Monomial, int, MonomialHash> position;

  int size() const { return static_cast<int>(monomials.size()); }
  int find(const Monomial& m) const;  // -1 if absent
};

struct SdpBlockEntry {
  int row, col;  // row <= col
  int y;         // moment position, -1 for the constant part
  double coeff;
};

struct SdpBlock {
  int dim = 0;
  std::vector<SdpBlockEntry> entries;
  std::string label;
};

struct LinRow {
  std::vector<std::pair<int, double>> terms;  // (y position, coeff)
  double rhs = 0.0;
  std::string label;
};

// Block-structured SDP over the moment vector y:
//   min  c'y + c0   s.t.  rows: a'y = rhs,  per block: C + sum_s y_s A_s PSD,
//   box: lo <= y_s <= hi on the listed coordinates.
struct SDPInstance {
  int ny = 0;
  std::vector<double> c;
  double c0 = 0.0;
  std::vector<LinRow> equalities;
  std::vector<SdpBlock> blocks;
  std::vector<int> box_index;
  std::vector<double> box_lo, box_hi;

  void validate() const;
  void write(std::ostream& os) const;
  static SDPInstance read(std::istream& is);
};

struct RelaxationOptions {
  double perturb = 1e-5;
  std::uint64_t perturb_seed = 0x9e3779b97f4a7c15ull;
};

struct Relaxation {
  SDPInstance sdp;
  MomentIndex index;
  int w_min = 1;
  // subtracting this from the perturbed optimum yields a valid lower bound
  // for the unperturbed POP objective
  double perturb_bound_correction = 0.0;
};

int relaxation_order_min(const POPInstance& pop);

Relaxation build_relaxation(const POPInstance& pop, const CliqueSet& cliques, int w,
                            const RelaxationOptions& opt = {});

// Degree-1 moment coordinates in POP variable order.
std::vector<double> extract_point(const std::vector<double>& y, const MomentIndex& idx);

}  // namespace popde
