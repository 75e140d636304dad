#pragma once

#include "dynamics.hpp"

#include <vector>

namespace sdb {

// Curvature of an infinitesimal divergent front after a free flight of
// length t.  B is the signed curvature of the orthogonal wavefront in the
// flow-sync parametrization; B >= 0 stays >= 0 because t >= 0.
double transport_free(double B, double t);

// Arc-length growth factor of a flow-sync front over a free flight.
double flight_factor(double B, double t);

// Curvature jump at a collision with boundary curvature K (K >= 0 on
// dispersing arcs, 0 on segments) and incidence cosine cos_phi > 0.
double collision_kick_term(double K, double cos_phi);

// One step of the orbit, reduced to what curvature transport needs.
struct Leg {
  double tau = 0.0;       // flight time into this collision
  double kick = 0.0;      // 2K/cos(phi) at this collision, 0 across walls
  bool material = false;  // false for wall crossings
  Coord coord;            // landing coordinate
  EventClass cls = EventClass::Regular;
};

enum class Clock { Enlarged, Material };

// Forward orbit of x reduced to transport legs.  With Clock::Material the
// wall crossings are folded into the flight times, so legs(i) is the i-th
// material collision.  Collection stops early at a tangential or corner
// event; `truncated` reports how many complete legs were produced.
struct OrbitLegs {
  std::vector<Leg> legs;
  bool truncated = false;
  EventClass stop_class = EventClass::Regular;
};

OrbitLegs collect_legs(const Table& table, const Coord& x, int n, Clock clock);

// Forward transport of a front with initial curvature B0 launched at x,
// over n steps of the chosen clock.  `log_growth` is the accumulated
// log arc-length expansion of the flow-sync front.
struct ExpansionStep {
  double tau = 0.0;
  double B_before = 0.0;  // curvature on arrival, before the kick
  double B_after = 0.0;   // curvature after the kick (== B_before on walls)
  double factor = 1.0;    // |1 + tau * B| over the flight
};

struct ExpansionResult {
  std::vector<ExpansionStep> steps;
  double B_final = 0.0;
  double log_growth = 0.0;
  bool truncated = false;
};

ExpansionResult expansion(const Table& table, const Coord& x, int n,
                          double B0, Clock clock = Clock::Enlarged);

// Expansion of the reversed orbit: the growth factor kappa_n(x) of a front
// launched flat at -T^n x and transported back to the base point.  Tracked
// projectively as a 2x2 matrix product, so pushing one more leg is O(1).
class KappaLadder {
 public:
  // Push the leg arriving at the next collision: flight tau, then kick.
  // kappa(n) only ever uses the kicks of collisions 1..n-1, so the kick of
  // the most recent collision is kept pending until the next push.
  void push(double tau, double kick);

  int size() const { return n_; }
  double log_kappa() const;     // log kappa_{n,0} for the legs pushed so far
  double kappa() const;
  double kappa_of(double B0) const;          // growth of an initial curvature B0
  double reversed_curvature() const;         // arrival curvature of the flat front

 private:
  // a, b, c, d := matrix [[a,b],[c,d]] acting on (p,q), B = p/q.
  double a_ = 1.0, b_ = 0.0, c_ = 0.0, d_ = 1.0;
  double log_scale_ = 0.0;
  double pending_kick_ = 0.0;
  int n_ = 0;
  void renorm();
};

// kappa_{n,0} and kappa_{n,delta} at x (material clock).  kappa_{n,delta}
// is searched over a grid of initial front curvatures; the extent
// constraint only caps the front from above and never excludes the flat
// front, so the minimum sits at B0 = 0 and equals kappa_{n,0}.  The search
// is kept because the grid minimum is a cheap structural check.
struct KappaResult {
  double kappa0 = 1.0;
  double kappa_delta = 1.0;
  double log_kappa0 = 0.0;
  double B_argmin = 0.0;        // grid curvature attaining kappa_delta
  double base_extent = 0.0;     // delta / kappa0: pullback of the image extent
  int n = 0;
  bool truncated = false;       // orbit hit a singularity before n steps
  std::vector<double> kappa_by_step;  // kappa_{k,0} for k = 1..n
};

KappaResult kappa(const Table& table, const Coord& x, int n, double delta);

// Lower bound for the stable-manifold extent at x from n_max pullback
// steps: min_k kappa_k(x) * z_tub(T^{k-1} x), together with the stable
// front curvature at x (negative of the reversed flat-front arrival
// curvature).  Throws Err::ImmediateSingularity when the backward step of
// x is already singular, Err::SingularBase when x itself is tangential.
struct StableStep {
  int k = 0;
  double kappa_k = 1.0;
  double z_k = 0.0;       // tube radius at T^{k-1} x
  double bound = 0.0;     // kappa_k * z_k
};

struct StableManifold {
  double B_stable = 0.0;
  double extent = 0.0;          // min_k bound, possibly 0 near a singularity
  int n_used = 0;
  bool truncated = false;
  std::vector<StableStep> steps;
};

StableManifold approx_stable_manifold(const Table& table, const Coord& x,
                                      int n_max);

}  // namespace sdb
