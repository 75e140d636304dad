#pragma once

#include <optional>
#include <string>
#include <vector>

#include "geometry.hpp"
#include "rng.hpp"
#include "vec2.hpp"

namespace sdb {

// Events with |cos(phi)| below this are classified tangential.
inline constexpr double kTangencyTol = 1e-10;
// Hits closer along the ray than this are discarded as numerical residue of the
// launch point itself.
inline constexpr double kRayMinT = 1e-12;

struct FlowPoint {
    Vec2 q;
    Vec2 v;  // unit speed
};

// Collision-space coordinate: global boundary arc length r and the signed angle
// phi in [-pi/2, pi/2] between the outgoing velocity and the inward normal
// (phi > 0 when the velocity lies counterclockwise from the normal).
struct Coord {
    int component = -1;
    double r = 0.0;
    double phi = 0.0;

    Coord() = default;
    Coord(double r_, double phi_) : r(r_), phi(phi_) {}
    Coord(int component_, double r_, double phi_) : component(component_), r(r_), phi(phi_) {}
};

enum class EventClass { Regular, Tangential, Corner, Transparent };

const char* event_class_name(EventClass c);

struct CollisionEvent {
    double t = 0.0;  // flight time from the query point (unit speed)
    Coord coord;     // landing coordinate; transparent crossings are recorded on the
                     // wall through which the orbit re-enters the rectangle
    EventClass cls = EventClass::Regular;
    Vec2 q;          // landing point (wrapped to the re-entry side when transparent)
    Vec2 v_in;
    Vec2 v_out;      // reflected (material), or v_in for transparent/tangential passes
    double cos_phi = 1.0;

    int corner_id = -1;  // into Table::corners when cls == Corner
    Vec2 corner_normal_prev, corner_normal_next;

    Vec2 wrap_shift;  // entry point minus raw hit point (nonzero only when transparent)
};

// ---- coordinate plumbing -------------------------------------------------------

Vec2 reflect(const Vec2& v, const Vec2& n);

double phi_of(const Vec2& v, const Vec2& n);
Vec2 velocity_from_phi(const Vec2& n, double phi);

FlowPoint coord_to_flow(const Table& table, const Coord& m);
// q must lie on the boundary (within tol); v must point into Q (cos phi >= 0).
Coord flow_to_coord(const Table& table, const Vec2& q, const Vec2& v, double tol = 1e-9);

// Time reversal on the collision space: material coordinates map to (r, -phi);
// transparent crossings move to the identified point on the opposite wall.
Coord involution(const Table& table, const Coord& m);

// ---- ray casting and the event map ----------------------------------------------

struct RayHit {
    double t = 0.0;
    int component = -1;
    double s_local = 0.0;
    Vec2 point;
    Vec2 normal;
    double cos_incidence = 0.0;  // <dir, -normal>, positive for an approaching hit
};

std::optional<RayHit> raycast(const Table& table, const Vec2& origin, const Vec2& dir,
                              double t_min = kRayMinT);

// First event reached by the free flight from x (walls included on torus tables).
// Throws OutsideDomain if the ray escapes (invalid geometry or starting point).
CollisionEvent first_event(const Table& table, const FlowPoint& x);

// One step of the billiard map T on the enlarged collision space.  The landing
// event may be transparent; corner landings are reported with cls == Corner and
// both branch normals (v_out is left equal to v_in).
CollisionEvent collision_map(const Table& table, const Coord& m);

// Iterate T for n steps collecting events (cumulative times).  Stops early at a
// corner; tangential events continue straight through.
std::vector<CollisionEvent> simulate(const Table& table, const Coord& m, int n_events);

// Flow for time t from a phase point, reflecting and wrapping as needed.
// Returns the reached point; sets *hit_corner when the flow stopped early.
FlowPoint flow(const Table& table, const FlowPoint& x, double t, bool* hit_corner = nullptr);

// First material collision at or after the current coordinate's next event.
// Returns false if no material event occurs within max_events.
bool material_map(const Table& table, const Coord& m, Coord* out, int max_events = 1 << 20,
                  CollisionEvent* last_event = nullptr);

// ---- sampling -------------------------------------------------------------------

// Draw from the invariant measure cos(phi) dr dphi restricted to the material
// boundary (r uniform, phi = arcsin(2u-1)); corner and tangential starts are
// rejected and redrawn.
Coord sample_coord(const Table& table, Rng& rng);

// Accumulates lattice shifts so footpoints can be lifted to the universal cover.
struct UnwrapState {
    Vec2 offset;  // add to wrapped positions to get lifted positions
    void absorb(const CollisionEvent& ev) { offset -= ev.wrap_shift; }
    Vec2 lift(const Vec2& wrapped) const { return wrapped + offset; }
};

}  // namespace sdb
