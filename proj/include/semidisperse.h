/* Public C interface of the semi-dispersing billiard engine.
 *
 * Every function returns an sdb_status; SDB_OK means the out-parameters are
 * valid.  On failure sdb_last_error() holds a thread-local description of what
 * went wrong.  Handles returned through sdb_*_free-able pointers own their
 * data; all other out-parameters are plain value copies.  A loaded table is
 * immutable, so one sdb_table may be shared by any number of threads.
 */
#ifndef SEMIDISPERSE_H
#define SEMIDISPERSE_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sdb_status {
    SDB_OK = 0,
    SDB_ERR_IO = 1,
    SDB_ERR_PARSE = 2,
    SDB_ERR_OPEN_BOUNDARY_CHAIN = 3,
    SDB_ERR_NON_CONVEX_ARC = 4,
    SDB_ERR_OVERLAPPING_COMPONENTS = 5,
    SDB_ERR_BAD_TABLE = 6,
    SDB_ERR_CORNER_POINT = 7,
    SDB_ERR_TRANSPARENT_WALL = 8,
    SDB_ERR_OUTSIDE_DOMAIN = 9,
    SDB_ERR_SINGULAR_BASE = 10,
    SDB_ERR_SINGULAR_ENCOUNTER = 11,
    SDB_ERR_IMMEDIATE_SINGULARITY = 12,
    SDB_ERR_BAD_ARGUMENT = 13,
    SDB_ERR_NO_WITNESS = 14,
    SDB_ERR_INTERNAL = 15
} sdb_status;

const char* sdb_version(void);
const char* sdb_status_name(sdb_status s);
/* Thread-local message of the most recent failure on this thread. */
const char* sdb_last_error(void);

/* ---- tables --------------------------------------------------------------- */

typedef struct sdb_table sdb_table;

sdb_status sdb_table_load(const char* path, sdb_table** out);
sdb_status sdb_table_parse(const char* json_text, sdb_table** out);
void sdb_table_free(sdb_table* t);

typedef struct sdb_table_info {
    int n_components;
    int n_material;
    int n_corners;
    int torus; /* 1 when the table lives on a torus with transparent walls */
    int has_arc;
    double rect_w, rect_h;
    double material_length;
    double total_length;
} sdb_table_info;

sdb_status sdb_table_get_info(const sdb_table* t, sdb_table_info* out);

typedef struct sdb_component_info {
    int kind; /* 0 segment, 1 arc */
    int material;
    double length;
    double curvature;
    double r_offset;       /* global arc-length coordinate of the start */
    double ax, ay, bx, by; /* traversal endpoints */
    double cx, cy, radius; /* arc data (zero for segments) */
} sdb_component_info;

sdb_status sdb_table_component(const sdb_table* t, int index, sdb_component_info* out);

typedef struct sdb_corner_info {
    double qx, qy;
    int comp_prev, comp_next;
    double turn_angle;
    int transparent;
} sdb_corner_info;

sdb_status sdb_table_corner(const sdb_table* t, int index, sdb_corner_info* out);

/* ---- dynamics --------------------------------------------------------------- */

/* Event classes: 0 regular, 1 tangential, 2 corner, 3 transparent. */
const char* sdb_event_class_name(int cls);

typedef struct sdb_event {
    double t; /* cumulative flight time from the start */
    int component;
    double r, phi;
    double qx, qy;
    double vx, vy; /* outgoing velocity */
    int cls;
} sdb_event;

/* Deterministic draw from cos(phi) dr dphi on the material boundary: the pair
 * (seed, index) fully determines the result. */
sdb_status sdb_sample_coord(const sdb_table* t, uint64_t seed, uint64_t index, double* r,
                            double* phi);

/* Iterates the event map up to n_events times (stops early at a corner).
 * Writes at most cap events and reports the count in *n_out. */
sdb_status sdb_simulate(const sdb_table* t, double r, double phi, int n_events,
                        sdb_event* out, int cap, int* n_out);

sdb_status sdb_involution(const sdb_table* t, double r, double phi, double* r_out,
                          double* phi_out);

/* Tube half-width to the nearest singular element along the forward ray. */
sdb_status sdb_z_tub(const sdb_table* t, double r, double phi, double* z);

/* ---- wavefront transport ---------------------------------------------------- */

typedef struct sdb_expansion_step {
    double tau;
    double B_before; /* curvature after the free flight, before the kick */
    double B_after;
    double factor; /* |1 + tau B| of the flight */
} sdb_expansion_step;

/* Transports a front of initial curvature B0 along the orbit of (r, phi).
 * material_clock = 1 folds wall crossings into the legs; 0 keeps them as
 * zero-kick legs. */
sdb_status sdb_expansion(const sdb_table* t, double r, double phi, int n, double B0,
                         int material_clock, sdb_expansion_step* steps, int cap, int* n_out,
                         double* B_final, double* log_growth, int* truncated);

typedef struct sdb_kappa_result {
    double kappa0;
    double kappa_delta;
    double log_kappa0;
    double B_argmin;
    double base_extent;
    int n;
    int truncated;
} sdb_kappa_result;

/* Reversed-front growth over the first n material collisions.  kappa_by_step
 * (optional, pass 0/0) receives kappa_k for k = 1..n. */
sdb_status sdb_kappa(const sdb_table* t, double r, double phi, int n, double delta,
                     sdb_kappa_result* out, double* kappa_by_step, int cap, int* n_steps);

/* ---- singularity curves ------------------------------------------------------ */

typedef struct sdb_curves sdb_curves;

/* Traces the singularity set of the given order (sign picks the time direction)
 * as polylines in the (r, phi) chart. */
sdb_status sdb_trace_singularities(const sdb_table* t, int order, double resolution,
                                   sdb_curves** out);
void sdb_curves_free(sdb_curves* c);
int sdb_curves_count(const sdb_curves* c);

/* Singular sources: 0 arc tangency, 1 corner, 2 wall corner. */
const char* sdb_sing_source_name(int source);

typedef struct sdb_curve_info {
    int order;
    int source;
    int source_id;
    int branch;
    int closed;
    int n_points;
    double chart_length;
} sdb_curve_info;

sdb_status sdb_curves_info(const sdb_curves* c, int index, sdb_curve_info* out);
sdb_status sdb_curves_points(const sdb_curves* c, int index, double* r, double* phi,
                             int cap, int* n_out);

/* ---- divergent front embedding ----------------------------------------------- */

typedef struct sdb_embedding {
    int kind; /* 1 pivot, 2 fixed radius, 0 flat */
    int flat;
    int swapped;
    double t1, t2;
    double tau1, tau2;
    double radius;
    double cx, cy;
    double p1x, p1y, p2x, p2y;
    double circle_residual;
    double alignment_residual;
} sdb_embedding;

/* Slides two nearby diverging unit rays onto a common circular front. */
sdb_status sdb_embed_divergent_front(double q1x, double q1y, double v1x, double v1y,
                                     double q2x, double q2y, double v2x, double v2y,
                                     double eps0, sdb_embedding* out);

typedef struct sdb_fuzz_report {
    long n, n_case1, n_case2, n_flat;
    long n_violations;
    double tau_bound; /* 10000 * eps0 */
    double max_abs_tau;
    double max_circle_residual; /* relative to the radius */
    double max_alignment_residual;
} sdb_fuzz_report;

/* Randomized embedding sweep over admissible ray pairs. */
sdb_status sdb_fuzz_embeddings(long n, double eps0, uint64_t seed, sdb_fuzz_report* out);

/* ---- synchronized frames, strips, containment --------------------------------- */

typedef struct sdb_frame sdb_frame;

sdb_status sdb_frame_build(const sdb_table* t, double r, double phi, int n,
                           sdb_frame** out);
void sdb_frame_free(sdb_frame* f);

/* Frame modes: 0 post-singularity, 1 pre-singularity. */
const char* sdb_frame_mode_name(int mode);

typedef struct sdb_frame_info {
    double r, phi;
    int n;
    double eps1, tau_next;
    int mode;
    double q_anchor_x, q_anchor_y, v_leg_x, v_leg_y;
    double q_eps_x, q_eps_y, v_eps_x, v_eps_y;
    double center_x, center_y, radius;
    int side;
    double e_star, e_bracket;
    double q1x, q1y, v1x, v1y;
    int obstruction; /* singular source hit by the widening front */
    int obstruction_comp, obstruction_corner;
    double q_star_x, q_star_y;
    double h_fwd, h_bwd;
    double q3x, q3y, q3_param;
    int q3_on_chord;
    double q3t_x, q3t_y; /* chord line intersected with the carrier circle */
    double v3x, v3y;
    double sing_gap, sing_cos, open_cos;
    /* divergence certificate: all products must be >= 0 up to rounding */
    double p1, p2, c1, c2, eta, min_product;
} sdb_frame_info;

sdb_status sdb_frame_get_info(const sdb_frame* f, sdb_frame_info* out);

typedef struct sdb_strip sdb_strip;

/* n_samples <= 0 and u0_radius <= 0 select the defaults (200 and 0.1). */
sdb_status sdb_strip_build(const sdb_table* t, const sdb_frame* f, int n_samples,
                           double u0_radius, sdb_strip** out);
void sdb_strip_free(sdb_strip* s);

typedef struct sdb_strip_info {
    int n;
    int n_samples;
    double u0_r, u0_phi, u0_radius;
    int monotone;
    int all_in_u0;
    double max_landing_dist;
    double area;
} sdb_strip_info;

sdb_status sdb_strip_get_info(const sdb_strip* s, sdb_strip_info* out);

typedef struct sdb_strip_sample {
    double e; /* carrier arc parameter */
    double r, phi;
    double landing_dist;
    double tau_total;
} sdb_strip_sample;

sdb_status sdb_strip_get_sample(const sdb_strip* s, int index, sdb_strip_sample* out);

typedef struct sdb_containment {
    int inside_at_start;
    int entered;
    double entry_time;
    int crossed_edge;
    double crossing_time;
    double min_edge_clearance;
    double landing_r, landing_phi, landing_dist;
    int landing_in_u0;
    int contained;
} sdb_containment;

/* Follows the frame companion x3 and tests it against the strip's orbit edges. */
sdb_status sdb_strip_contains(const sdb_table* t, const sdb_strip* s, const sdb_frame* f,
                              sdb_containment* out);

typedef struct sdb_fixture {
    int ok;
    char note[256];
    double r, phi;
    int n;
    double graze_t;
} sdb_fixture;

/* Builds a near-grazing base point: a leg missing the arc `component` by `miss`
 * at fraction `place`, pulled back n_back collisions. */
sdb_status sdb_grazing_fixture(const sdb_table* t, int component, double place, int dir,
                               double miss, int n_back, sdb_fixture* out);

/* ---- diagnostics --------------------------------------------------------------- */

typedef struct sdb_diag_config {
    double c3;        /* <= 0 selects the default 0.1 */
    double lambda;    /* <= 1 selects the default 2 */
    int horizon;      /* <= 0 selects the default 64 */
    int suff_horizon; /* <= 0 selects the default 200 */
} sdb_diag_config;

/* Point classes: 0 good, 1 bad, 2 undetermined. */
const char* sdb_point_class_name(int cls);

typedef struct sdb_point_verdict {
    int cls;
    int bad_n;
    double kappa_n;
    double z_n;
    int steps;
} sdb_point_verdict;

sdb_status sdb_classify_point(const sdb_table* t, double r, double phi, double delta,
                              const sdb_diag_config* cfg, sdb_point_verdict* out);

typedef struct sdb_tail sdb_tail;

sdb_status sdb_tail_estimate(const sdb_table* t, const double* deltas, int n_deltas,
                             long n_samples, uint64_t seed, const sdb_diag_config* cfg,
                             int workers, sdb_tail** out);
void sdb_tail_free(sdb_tail* r);

int sdb_tail_rows(const sdb_tail* r);

typedef struct sdb_tail_row {
    double delta;
    long n_samples, n_good, n_bad, n_undetermined;
    long n_tail, n_witnessed;
    double nu_tail_hat, std_err, ratio;
    int insufficient;
} sdb_tail_row;

sdb_status sdb_tail_get_row(const sdb_tail* r, int index, sdb_tail_row* out);
/* Histogram of the first bad step (counts[k] = samples first bad at k). */
sdb_status sdb_tail_get_hist(const sdb_tail* r, int index, long* counts, int cap,
                             int* n_out);
int sdb_tail_tilde_count(const sdb_tail* r, int index);
sdb_status sdb_tail_get_tilde(const sdb_tail* r, int index, int k, int* n, int* m,
                              long* count);

typedef struct sdb_ansatz_report {
    long n_samples, n_sufficient, n_undetermined;
    int horizon;
    double sufficient_fraction, undetermined_fraction;
    int n_curves;
} sdb_ansatz_report;

typedef struct sdb_ansatz_row {
    int curve;
    double r, phi;
    int status; /* 0 sufficient, 1 insufficient-by-horizon, 2 undetermined */
} sdb_ansatz_row;

/* Uniform arc-length sampling of the first-order singularity curves, each
 * sample tested for past sufficiency.  rows may be 0 (with cap 0). */
sdb_status sdb_ansatz(const sdb_table* t, double resolution, long n_samples, int horizon,
                      uint64_t seed, sdb_ansatz_report* out, sdb_ansatz_row* rows, long cap,
                      long* n_rows);

sdb_status sdb_lyapunov_orbit(const sdb_table* t, double r, double phi, long n_collisions,
                              double* exponent, int* restarts, double* trace, int trace_cap,
                              int* trace_len);

sdb_status sdb_lyapunov_ensemble(const sdb_table* t, long n_collisions, int n_starts,
                                 uint64_t seed, int workers, double* mean,
                                 double* dispersion, int* restarts, double* exponents,
                                 int cap, int* n_out);

/* Observables: 0 cos(phi), 1 indicator of a component, 2 constant one. */
const char* sdb_test_fn_name(int fn);

typedef struct sdb_birkhoff_row {
    int fn;
    int component;
    double mean;
    double dispersion; /* cross-start standard deviation */
} sdb_birkhoff_row;

/* Birkhoff averages over n_starts points drawn from the ball (whole = 1 uses
 * the full material boundary).  rows must hold n_fns entries. */
sdb_status sdb_birkhoff(const sdb_table* t, double center_r, double center_phi, int whole,
                        double ball_radius, const int* fns, const int* components,
                        int n_fns, long n_collisions, int n_starts, uint64_t seed,
                        int workers, sdb_birkhoff_row* rows, int* truncated_starts,
                        int* center_sufficient);

typedef struct sdb_invariance {
    long n_samples;
    double ks_r, p_r;
    double ks_phi, p_phi;
    double chi2, chi2_dof, p_chi2;
    double ks_identity, chi2_identity; /* identity-map control, exactly zero */
} sdb_invariance;

sdb_status sdb_invariance_check(const sdb_table* t, long n_samples, uint64_t seed,
                                int workers, sdb_invariance* out);

typedef struct sdb_c3_row {
    double c3, delta;
    long n_samples;
    double frac_good, frac_bad, frac_tail, frac_undetermined;
} sdb_c3_row;

/* Classification sweep over a c3 grid at fixed delta; rows must hold n_c3. */
sdb_status sdb_calibrate_c3(const sdb_table* t, const double* c3s, int n_c3, double delta,
                            long n_samples, uint64_t seed, const sdb_diag_config* cfg,
                            int workers, sdb_c3_row* rows);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* SEMIDISPERSE_H */
