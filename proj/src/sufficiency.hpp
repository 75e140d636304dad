#pragma once

#include "dynamics.hpp"
#include "singularity.hpp"

#include <vector>

namespace sdb {

enum class Sufficiency { Sufficient, InsufficientByHorizon, Undetermined };

const char* sufficiency_name(Sufficiency s);

struct CurvedHit {
    double t = 0.0;
    int component = -1;
    double r = 0.0;
};

struct SufficiencyVerdict {
    Sufficiency status = Sufficiency::Undetermined;
    std::vector<CurvedHit> witnesses;  // first curved collision per explored branch
    int branches = 1;
    bool budget_exhausted = false;
    bool tangential_arc_hits = false;  // grazing arc passes seen (never count as hits)
};

inline constexpr int kBranchBudget = 64;

// Every branch of the orbit segment between flow times [t0, t1] from x must
// collide with a curved component; corner events spawn one branch per side.
SufficiencyVerdict is_sufficient_segment(const Table& table, const FlowPoint& x,
                                         double t0, double t1,
                                         int branch_budget = kBranchBudget);

// Truncated semitrajectory variants: sufficient when witnessed within the first
// `horizon` collisions on every branch, otherwise undetermined (an infinite
// semitrajectory can never be refuted by a finite run).
SufficiencyVerdict is_future_sufficient(const Table& table, const FlowPoint& x,
                                        int horizon, int branch_budget = kBranchBudget);
SufficiencyVerdict is_future_sufficient(const Table& table, const Coord& x, int horizon,
                                        int branch_budget = kBranchBudget);
SufficiencyVerdict is_past_sufficient(const Table& table, const Coord& x, int horizon,
                                      int branch_budget = kBranchBudget);

// Empirical check of the sampling hypothesis on S_1: draw points uniformly by
// chart arc length on the traced curves and test each for past sufficiency.
struct AnsatzRow {
    int curve = 0;
    double r = 0.0, phi = 0.0;
    Sufficiency status = Sufficiency::Undetermined;
};

struct AnsatzReport {
    long n_samples = 0;
    long n_sufficient = 0;
    long n_undetermined = 0;
    int horizon = 0;
    uint64_t seed = 0;
    double sufficient_fraction = 0.0;
    double undetermined_fraction = 0.0;
    std::vector<AnsatzRow> rows;  // filled when keep_rows
    std::vector<long> per_curve_sufficient, per_curve_total;
};

AnsatzReport ansatz_sampler(const Table& table, const std::vector<SingCurve>& s1,
                            long n_samples, int horizon, uint64_t seed,
                            bool keep_rows = false);

}  // namespace sdb
