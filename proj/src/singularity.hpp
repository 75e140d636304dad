#pragma once

#include "dynamics.hpp"

#include <vector>

namespace sdb {

// ---- tube radius -----------------------------------------------------------------

// What terminated the growth of the singularity-free beam on one side.
enum class Obstruction {
    None,            // never stopped (radius capped at kTubeCapFactor * total length)
    AnchorTangency,  // beam leaves the collision space sideways (grazing anchor)
    AnchorCorner,    // anchor walk ran into a material corner
    LinkTangency,    // a beam ray becomes tangent to some component
    LinkCorner,      // a beam ray hits a material corner
    LinkBranch,      // landing jumps to a different smooth branch
};

struct TubeSide {
    double radius = 0.0;
    Obstruction obstruction = Obstruction::None;
};

struct TubeResult {
    double z = 0.0;  // min of the two sides
    TubeSide pos, neg;
};

// Radius of the widest parallel beam around the free-flight link of the material
// coordinate x in which the next material collision stays on one smooth branch.
// Transparent crossings do not obstruct the beam.  Returns 0 when the link itself
// is tangential or ends in a corner; throws SingularBase when x is tangential.
TubeResult z_tub_info(const Table& table, const Coord& x);
double z_tub(const Table& table, const Coord& x);

// Early-exit predicate: true iff z_tub(x) >= bound.  Much cheaper than the full
// radius when bound is small.
bool z_tub_at_least(const Table& table, const Coord& x, double bound);

// ---- singularity curves ----------------------------------------------------------

enum class SingSource {
    ArcTangency,  // grazing collisions on a dispersing arc
    Corner,       // fiber over a material corner
    WallCorner,   // fiber over a rectangle corner (torus tables)
};

const char* sing_source_name(SingSource s);

struct SingCurve {
    int order = 0;  // this curve is part of S_order
    SingSource source = SingSource::ArcTangency;
    int source_id = 0;  // component index (ArcTangency) or corner index
    int branch = 0;     // running index among the pieces of one seed family
    std::vector<Coord> pts;
    bool closed = false;

    double chart_length() const;  // polyline length in the (r, phi) chart
};

// ---- orbit and ray probes ------------------------------------------------------

// Walk n steps of the event map from a raw phase: trace_back starts from the
// arrival phase (q, w) and walks the orbit backward; trace_forward starts from
// the outgoing phase (q, v).  `sig` records one component/class code per step;
// ok == false when a corner or tangency interrupts the walk.
struct OrbitTrace {
    bool ok = false;
    Coord coord;  // coordinate reached by the n-th step
    std::vector<int> sig;
};

OrbitTrace trace_back(const Table& table, Vec2 q, Vec2 w, int n_steps);
OrbitTrace trace_forward(const Table& table, Vec2 q, Vec2 v, int n_steps);

// First material element met by the ray from q along d, sliding through
// transparent walls.  ok == false when the crossing budget runs out or the ray
// escapes.  `point` is in the base chart; `point_lifted` is the same landing
// lifted to the universal cover of the start chart.
struct RayProbe {
    bool ok = false;
    int component = -1;
    double s_land = 0.0;  // arc length along the landing component
    double r = 0.0;       // global boundary coordinate
    int crossings = 0;
    double t = 0.0;  // total flight length
    Vec2 point, point_lifted, normal;
    double cos_incidence = 0.0;
    int corner_id = -1;
    bool tangential = false;
};

RayProbe probe_material(const Table& table, const Vec2& q, const Vec2& d);

// True when b landed on a different smooth branch than a (or singularly): a
// changed component or crossing count, a corner/tangential landing, or a jump
// of more than 0.45 component lengths along the same component.
bool probe_branch_changed(const Table& table, const RayProbe& a, const RayProbe& b);

// Point on a traced curve at a given arc length along its (r, phi) polyline.
Coord curve_point_at(const SingCurve& c, double along);

// The singularity set S_0 itself: grazing phases over every dispersing arc plus
// the fibers over material and rectangle corners, sampled at `resolution` chart
// spacing.
std::vector<SingCurve> s0_set(const Table& table, double resolution);

// S_n = T^{-n} S_0 for order = n != 0: the points whose n-th forward (n > 0) or
// backward (n < 0) iterate lands on S_0.  Curves are produced by marching the
// S_0 seed families and mapping each seed phase through n steps; the march is
// split wherever the itinerary changes or the branch dies.
std::vector<SingCurve> trace_singularities(const Table& table, int order,
                                           double resolution);

}  // namespace sdb
