#pragma once

#include <map>
#include <vector>

#include "ifseq/equilibrium_solver.hpp"
#include "ifseq/ifs_geometry.hpp"

namespace ifseq::testing {

inline IfsSystem ternary() { return IfsSystem::validate({{1.0 / 3.0, -1.0}, {1.0 / 3.0, 1.0}}); }
inline IfsSystem asymmetric() { return IfsSystem::validate({{0.8, -1.0}, {0.1, 1.0}}); }

// Solved generations shared by the test cases of one binary.
struct Solved {
    std::vector<BandSystem> bands;
    std::vector<EquilibriumSolution> solutions;

    const BandSystem& bands_at(int n) const { return bands.at(static_cast<std::size_t>(n - 1)); }
    const EquilibriumSolution& at(int n) const { return solutions.at(static_cast<std::size_t>(n - 1)); }
};

inline Solved solve_hierarchy(const IfsSystem& ifs, int n_max, const SolverConfig& cfg = {}) {
    Solved s;
    s.solutions = hierarchical_solve(ifs, n_max, cfg, [&](const BandSystem& b, const EquilibriumSolution&) {
        s.bands.push_back(b);
    });
    return s;
}

inline const Solved& ternary_solved() {
    static const Solved s = solve_hierarchy(ternary(), 7);
    return s;
}

} // namespace ifseq::testing
