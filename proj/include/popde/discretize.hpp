#pragma once

#include "popde/pop.hpp"
#include "popde/problems.hpp"

namespace popde {

// (u_p1 - 2 u_0 + u_m1) / delta^2 over an nvars-dimensional space.
Polynomial fd_second(int nvars, int u_m1, int u_0, int u_p1, double delta);

// (u_p1 - u_m1) / (2 delta)
Polynomial fd_first_central(int nvars, int u_m1, int u_p1, double delta);

// Finite-difference transcription of the problem on the grid into a POP:
// one equality per interior node and equation (central scheme), one per
// consecutive node pair (trapezoid dynamics), one per boundary node and
// boundary equation; bounds copied node-wise; objective per objective kind.
POPInstance transcribe(const DiffProblem& p, const Grid& g);

// Max absolute violation of the transcribed equalities at the given grid
// function (plus scalar values for problems that have them).
double residual(const DiffProblem& p, const Grid& g, const GridFunction& u,
                const std::vector<double>& scalars = {});

// POP variable layout used by transcribe.
int pop_var_index(const Grid& g, int unknowns, int k, int i, int j);

}  // namespace popde
