#pragma once

#include "dynamics.hpp"
#include "rng.hpp"
#include "singularity.hpp"

#include <string>
#include <vector>

namespace sdb {

// ---- two-ray divergent front embedding -------------------------------------------

// Places two nearby unit rays on a common divergent circular front by sliding
// each along its own line (q_i + tau_i v_i).  kind 1 pivots on the ray that is
// farther from the line crossing; kind 2 pushes both out to a fixed radius;
// kind 0 is the flat front used when the rays are (numerically) parallel.
struct FrontEmbedding {
    int kind = 0;
    bool flat = false;
    bool swapped = false;  // labels were exchanged so that t1 > 0
    double t1 = 0.0, t2 = 0.0;      // distances from the line crossing, input order
    double tau1 = 0.0, tau2 = 0.0;  // slide times, input order
    double radius = 0.0;            // 0 for the flat front
    Vec2 center;                    // line crossing (= circle center); unset when flat
    Vec2 p1, p2;                    // slid base points
    double circle_residual = 0.0;     // max | ||p_i - center|| - radius |
    double alignment_residual = 0.0;  // max |sin(angle(v_i, p_i - center))|
};

FrontEmbedding embed_divergent_front(Vec2 q1, Vec2 v1, Vec2 q2, Vec2 v2, double eps0);

struct FuzzPair {
    Vec2 q1, v1, q2, v2;
};

struct FuzzReport {
    long n = 0, n_case1 = 0, n_case2 = 0, n_flat = 0;
    long n_violations = 0;  // |tau| bound or residual breaches
    double tau_bound = 0.0;  // 10000 * eps0
    double max_abs_tau = 0.0;
    double max_circle_residual = 0.0;   // relative to the radius
    double max_alignment_residual = 0.0;
};

// Admissible random pair: ||q1-q2|| < eps0, ||v1-v2|| < eps0, <q1-q2,v1-v2> >= 0.
// The mixture keeps both embedding kinds heavily represented.
FuzzPair random_front_pair(Rng& rng, double eps0);
FuzzReport fuzz_embeddings(long n, double eps0, uint64_t seed);

// ---- synchronized front at a near-singular orbit leg ------------------------------

enum class FrameMode { PostSingularity, PreSingularity };

const char* frame_mode_name(FrameMode m);

struct FrameParams {
    double eps1_floor_frac = 1e-9;  // smallest eps1 tried, as a fraction of tau
    double curvature_scale = 1e-3;  // front curvature = scale / tau (nearly flat)
    double e_cap_frac = 0.5;        // sideways search cap, fraction of table scale
};

// The frame: a slightly divergent front seeded inside the free leg after the
// n-th collision of x, extended sideways until one more step of the dynamics
// stops being smooth across it, together with the tangency chord H and the
// projected companion point x3 = (q3, v_eps).
struct SyncFrame {
    Coord x;
    int n = 0;
    double eps1 = 0.0;
    double tau_next = 0.0;  // free flight time of the n-th collision
    FrameMode mode = FrameMode::PostSingularity;

    Vec2 q_anchor, v_leg;  // n-th collision footpoint and outgoing velocity
    Vec2 q_eps, v_eps;     // x_eps = (q_anchor + eps1 v_leg, -v_leg)
    Vec2 center;           // carrier circle center (far behind the front)
    double radius = 0.0;   // carrier radius = 1 / front curvature

    int side = +1;         // carrier side (sign of the sideways arc) that closed first
    double e_star = 0.0;   // arc length from q_eps to the singular endpoint
    double e_bracket = 0.0;  // bisection bracket width at acceptance
    Vec2 q1, v1;             // front endpoint x1 (last smooth carrier phase)

    SingSource obstruction = SingSource::ArcTangency;  // ArcTangency or Corner
    int obstruction_comp = -1;
    int obstruction_corner = -1;
    Vec2 q_star;  // tangency footpoint / corner, lifted to the frame chart
    double h_fwd = 0.0, h_bwd = 0.0;  // chord extent from q_star along +/- v_eps
    Vec2 q3;                // orthogonal projection of q_eps onto the chord line
    double q3_param = 0.0;  // chord parameter of q3 (t such that q3 = q_star + t v_eps)
    bool q3_on_chord = false;  // -h_bwd <= q3_param <= h_fwd
    Vec2 q3_tilde;  // chord line ∩ carrier circle
    Vec2 v3;        // outward carrier normal at q3_tilde

    // verification probes
    double sing_gap = 0.0;  // distance from the obstruction element to the closing ray
    double sing_cos = 1.0;  // landing incidence of the mid-bracket closing ray
    double open_cos = 0.0;  // incidence of x1's step away from the obstruction
};

SyncFrame build_sync_frame(const Table& table, const Coord& x, int n,
                           const FrameParams& params = {});

// Scalar products behind the frame's divergence certificate; all must be >= 0
// up to rounding for a valid frame.
struct FrameCertificate {
    double p1 = 0.0;   // <q1 - q3, v1 - v_eps>
    double p2 = 0.0;   // <q_eps - q3, v_eps - v_eps> (identically zero)
    double c1 = 0.0;   // <q1 - q3~, v3 - v_eps>
    double c2 = 0.0;   // <q1 - q3~, v1 - v3>
    double eta = 0.0;  // q3 = q3~ + eta v_eps
    double min_product() const;
};

FrameCertificate lmf_check(const SyncFrame& frame);

// ---- the swept strip and orbit containment ----------------------------------------

struct StripParams {
    int n_samples = 200;
    double u0_radius = 0.1;  // chart radius of the landing neighborhood
};

struct StripSample {
    double e = 0.0;               // carrier arc parameter
    std::vector<Vec2> foot;       // lifted footpoints: carrier point + n+1 events
    Coord landing;                // (n+1)-st event coordinate
    double landing_dist = 0.0;    // chart distance to the landing of sample 0
    double tau_total = 0.0;
};

struct StripRegion {
    int n = 0;  // samples flow to their (n+1)-st event
    std::vector<StripSample> samples;
    Coord u0_center;  // landing coordinate of sample 0
    double u0_radius = 0.1;
    bool monotone = true;   // landing curve monotone in (r, phi)
    bool all_in_u0 = true;
    double max_landing_dist = 0.0;
    double area = 0.0;  // shoelace area of the swept polygon
};

// Flows every carrier sample of the frame to its (n+1)-st event.  Throws
// SingularEncounter when the front is cut by a singularity mid-flight.
StripRegion build_strip(const Table& table, const SyncFrame& frame,
                        const StripParams& params = {});

struct ContainmentReport {
    bool inside_at_start = false;
    bool entered = false;
    double entry_time = -1.0;
    bool crossed_edge = false;
    double crossing_time = -1.0;
    double min_edge_clearance = 0.0;  // over the whole flown polyline
    Coord landing;
    double landing_dist = 0.0;
    bool landing_in_u0 = false;
    bool contained = false;  // entered, never crossed an orbit edge, landed in U0
};

// Follows x3 = (q3, v_eps) of the frame for n+1 events and tests it against the
// two orbit edges of the strip (the no-focal-point containment argument).
ContainmentReport strip_contains_orbit(const Table& table, const StripRegion& strip,
                                       const SyncFrame& frame);

// ---- grazing fixtures --------------------------------------------------------------

// Constructed near-singular data: a leg that passes a dispersing arc at a small
// perpendicular miss, pulled back n_back collisions to a regular base point.
struct AimSpec {
    int component = 0;   // arc to graze
    double place = 0.5;  // grazing point, as a fraction of the arc length
    int dir = +1;        // tangent orientation of the grazing flight
    double miss = 1e-4;  // perpendicular miss distance
    int n_back = 2;
};

struct BadFixture {
    bool ok = false;
    std::string note;
    Coord x;
    int n = 0;
    double graze_t = 0.0;  // flight length from the anchor to the grazing point
    AimSpec aim;
};

BadFixture make_grazing_fixture(const Table& table, const AimSpec& aim);

// ---- singularity foliation ---------------------------------------------------------

// Constant-velocity fibers through anchor points of a traced curve: each fiber
// is carried by the straight line through the midpoint of the anchor's forward
// leg, orthogonal to its velocity, and parametrized by arc length s with
// Psi(y0, 0) = y0 exactly.
struct FoliationFiber {
    Coord anchor;
    Vec2 q0, v0;
    double s_min = 0.0, s_max = 0.0;
    bool truncated_lo = false, truncated_hi = false;  // fiber hit a singular element
    std::vector<std::pair<double, Coord>> points;
};

struct FoliationChart {
    double eps0 = 0.0, resolution = 0.0;
    std::vector<FoliationFiber> fibers;
    double min_fiber_gap = 0.0;  // min chart distance between adjacent fibers
    bool disjoint = true;
};

FoliationChart foliation_chart(const Table& table, const SingCurve& curve, int n_fibers,
                               double eps0, double resolution);

}  // namespace sdb
