#include "semidisperse.h"

#include <algorithm>
#include <cstring>
#include <string>
#include <vector>

#include "constructions.hpp"
#include "diagnostics.hpp"
#include "dynamics.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "rng.hpp"
#include "singularity.hpp"
#include "sufficiency.hpp"
#include "wavefront.hpp"

struct sdb_table {
    sdb::Table t;
};

struct sdb_curves {
    std::vector<sdb::SingCurve> curves;
};

struct sdb_frame {
    sdb::SyncFrame frame;
    sdb::FrameCertificate cert;
};

struct sdb_strip {
    sdb::StripRegion strip;
};

struct sdb_tail {
    sdb::TailReport report;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
sdb_status guarded(F&& f) {
    try {
        f();
        return SDB_OK;
    } catch (const sdb::SdbError& e) {
        g_last_error = e.what();
        return static_cast<sdb_status>(static_cast<int>(e.code()));
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return SDB_ERR_INTERNAL;
    }
}

sdb_status need(bool ok, const char* what) {
    if (ok) return SDB_OK;
    g_last_error = what;
    return SDB_ERR_BAD_ARGUMENT;
}

sdb::DiagnosticsConfig to_cfg(const sdb_diag_config* cfg) {
    sdb::DiagnosticsConfig out;
    if (!cfg) return out;
    if (cfg->c3 > 0.0) out.c3 = cfg->c3;
    if (cfg->lambda > 1.0) out.lambda = cfg->lambda;
    if (cfg->horizon > 0) out.horizon = cfg->horizon;
    if (cfg->suff_horizon > 0) out.suff_horizon = cfg->suff_horizon;
    return out;
}

void copy_note(char (&dst)[256], const std::string& src) {
    std::size_t n = std::min(src.size(), sizeof(dst) - 1);
    std::memcpy(dst, src.data(), n);
    dst[n] = '\0';
}

}  // namespace

const char* sdb_version(void) { return "0.1.0"; }

const char* sdb_last_error(void) { return g_last_error.c_str(); }

const char* sdb_status_name(sdb_status s) {
    switch (s) {
        case SDB_OK: return "ok";
        case SDB_ERR_IO: return "io";
        case SDB_ERR_PARSE: return "parse";
        case SDB_ERR_OPEN_BOUNDARY_CHAIN: return "open-boundary-chain";
        case SDB_ERR_NON_CONVEX_ARC: return "non-convex-arc";
        case SDB_ERR_OVERLAPPING_COMPONENTS: return "overlapping-components";
        case SDB_ERR_BAD_TABLE: return "bad-table";
        case SDB_ERR_CORNER_POINT: return "corner-point";
        case SDB_ERR_TRANSPARENT_WALL: return "transparent-wall";
        case SDB_ERR_OUTSIDE_DOMAIN: return "outside-domain";
        case SDB_ERR_SINGULAR_BASE: return "singular-base";
        case SDB_ERR_SINGULAR_ENCOUNTER: return "singular-encounter";
        case SDB_ERR_IMMEDIATE_SINGULARITY: return "immediate-singularity";
        case SDB_ERR_BAD_ARGUMENT: return "bad-argument";
        case SDB_ERR_NO_WITNESS: return "no-witness";
        case SDB_ERR_INTERNAL: return "internal";
    }
    return "?";
}

/* ---- tables ----------------------------------------------------------------- */

sdb_status sdb_table_load(const char* path, sdb_table** out) {
    if (sdb_status s = need(path && out, "path and out must be non-null")) return s;
    return guarded([&] {
        auto* handle = new sdb_table{sdb::load_table(path)};
        *out = handle;
    });
}

sdb_status sdb_table_parse(const char* json_text, sdb_table** out) {
    if (sdb_status s = need(json_text && out, "json_text and out must be non-null")) return s;
    return guarded([&] {
        auto* handle = new sdb_table{sdb::parse_table(json_text)};
        *out = handle;
    });
}

void sdb_table_free(sdb_table* t) { delete t; }

sdb_status sdb_table_get_info(const sdb_table* t, sdb_table_info* out) {
    if (sdb_status s = need(t && out, "table and out must be non-null")) return s;
    const sdb::Table& tab = t->t;
    out->n_components = static_cast<int>(tab.components.size());
    out->n_material = tab.n_material;
    out->n_corners = static_cast<int>(tab.corners.size());
    out->torus = tab.ambient == sdb::Ambient::Torus ? 1 : 0;
    out->has_arc = tab.has_arc ? 1 : 0;
    out->rect_w = tab.rect_w;
    out->rect_h = tab.rect_h;
    out->material_length = tab.material_length;
    out->total_length = tab.total_length;
    return SDB_OK;
}

sdb_status sdb_table_component(const sdb_table* t, int index, sdb_component_info* out) {
    if (sdb_status s = need(t && out, "table and out must be non-null")) return s;
    if (sdb_status s = need(index >= 0 && index < static_cast<int>(t->t.components.size()),
                            "component index out of range"))
        return s;
    const sdb::BoundaryComponent& c = t->t.comp(index);
    out->kind = c.kind == sdb::ComponentKind::Arc ? 1 : 0;
    out->material = c.material ? 1 : 0;
    out->length = c.length();
    out->curvature = c.curvature();
    out->r_offset = c.r_offset;
    sdb::Vec2 a = c.start(), b = c.end();
    out->ax = a.x;
    out->ay = a.y;
    out->bx = b.x;
    out->by = b.y;
    out->cx = c.kind == sdb::ComponentKind::Arc ? c.center.x : 0.0;
    out->cy = c.kind == sdb::ComponentKind::Arc ? c.center.y : 0.0;
    out->radius = c.kind == sdb::ComponentKind::Arc ? c.radius : 0.0;
    return SDB_OK;
}

sdb_status sdb_table_corner(const sdb_table* t, int index, sdb_corner_info* out) {
    if (sdb_status s = need(t && out, "table and out must be non-null")) return s;
    if (sdb_status s = need(index >= 0 && index < static_cast<int>(t->t.corners.size()),
                            "corner index out of range"))
        return s;
    const sdb::Corner& c = t->t.corners[static_cast<size_t>(index)];
    out->qx = c.q.x;
    out->qy = c.q.y;
    out->comp_prev = c.comp_prev;
    out->comp_next = c.comp_next;
    out->turn_angle = c.turn_angle;
    out->transparent = c.transparent ? 1 : 0;
    return SDB_OK;
}

/* ---- dynamics --------------------------------------------------------------- */

const char* sdb_event_class_name(int cls) {
    return sdb::event_class_name(static_cast<sdb::EventClass>(cls));
}

sdb_status sdb_sample_coord(const sdb_table* t, uint64_t seed, uint64_t index, double* r,
                            double* phi) {
    if (sdb_status s = need(t && r && phi, "table and outputs must be non-null")) return s;
    return guarded([&] {
        sdb::Rng rng(sdb::child_seed(seed, index));
        sdb::Coord m = sdb::sample_coord(t->t, rng);
        *r = m.r;
        *phi = m.phi;
    });
}

sdb_status sdb_simulate(const sdb_table* t, double r, double phi, int n_events,
                        sdb_event* out, int cap, int* n_out) {
    if (sdb_status s = need(t && n_out && (out || cap == 0), "bad output buffer")) return s;
    return guarded([&] {
        std::vector<sdb::CollisionEvent> evs = sdb::simulate(t->t, {r, phi}, n_events);
        int n = std::min<int>(static_cast<int>(evs.size()), cap);
        for (int i = 0; i < n; ++i) {
            const sdb::CollisionEvent& ev = evs[static_cast<size_t>(i)];
            double s_local = 0.0;
            out[i].t = ev.t;
            out[i].component = t->t.component_at(ev.coord.r, &s_local);
            out[i].r = ev.coord.r;
            out[i].phi = ev.coord.phi;
            out[i].qx = ev.q.x;
            out[i].qy = ev.q.y;
            out[i].vx = ev.v_out.x;
            out[i].vy = ev.v_out.y;
            out[i].cls = static_cast<int>(ev.cls);
        }
        *n_out = n;
    });
}

sdb_status sdb_involution(const sdb_table* t, double r, double phi, double* r_out,
                          double* phi_out) {
    if (sdb_status s = need(t && r_out && phi_out, "table and outputs must be non-null"))
        return s;
    return guarded([&] {
        sdb::Coord m = sdb::involution(t->t, {r, phi});
        *r_out = m.r;
        *phi_out = m.phi;
    });
}

sdb_status sdb_z_tub(const sdb_table* t, double r, double phi, double* z) {
    if (sdb_status s = need(t && z, "table and output must be non-null")) return s;
    return guarded([&] { *z = sdb::z_tub(t->t, {r, phi}); });
}

/* ---- wavefront ---------------------------------------------------------------- */

sdb_status sdb_expansion(const sdb_table* t, double r, double phi, int n, double B0,
                         int material_clock, sdb_expansion_step* steps, int cap, int* n_out,
                         double* B_final, double* log_growth, int* truncated) {
    if (sdb_status s = need(t && n_out && (steps || cap == 0), "bad output buffer")) return s;
    return guarded([&] {
        sdb::ExpansionResult res =
            sdb::expansion(t->t, {r, phi}, n, B0,
                           material_clock ? sdb::Clock::Material : sdb::Clock::Enlarged);
        int m = std::min<int>(static_cast<int>(res.steps.size()), cap);
        for (int i = 0; i < m; ++i) {
            const sdb::ExpansionStep& st = res.steps[static_cast<size_t>(i)];
            steps[i].tau = st.tau;
            steps[i].B_before = st.B_before;
            steps[i].B_after = st.B_after;
            steps[i].factor = st.factor;
        }
        *n_out = m;
        if (B_final) *B_final = res.B_final;
        if (log_growth) *log_growth = res.log_growth;
        if (truncated) *truncated = res.truncated ? 1 : 0;
    });
}

sdb_status sdb_kappa(const sdb_table* t, double r, double phi, int n, double delta,
                     sdb_kappa_result* out, double* kappa_by_step, int cap, int* n_steps) {
    if (sdb_status s = need(t && out, "table and out must be non-null")) return s;
    return guarded([&] {
        sdb::KappaResult res = sdb::kappa(t->t, {r, phi}, n, delta);
        out->kappa0 = res.kappa0;
        out->kappa_delta = res.kappa_delta;
        out->log_kappa0 = res.log_kappa0;
        out->B_argmin = res.B_argmin;
        out->base_extent = res.base_extent;
        out->n = res.n;
        out->truncated = res.truncated ? 1 : 0;
        if (kappa_by_step && cap > 0) {
            int m = std::min<int>(static_cast<int>(res.kappa_by_step.size()), cap);
            for (int i = 0; i < m; ++i) kappa_by_step[i] = res.kappa_by_step[static_cast<size_t>(i)];
            if (n_steps) *n_steps = m;
        } else if (n_steps) {
            *n_steps = 0;
        }
    });
}

/* ---- singularity curves --------------------------------------------------------- */

sdb_status sdb_trace_singularities(const sdb_table* t, int order, double resolution,
                                   sdb_curves** out) {
    if (sdb_status s = need(t && out, "table and out must be non-null")) return s;
    return guarded([&] {
        auto* handle = new sdb_curves{sdb::trace_singularities(t->t, order, resolution)};
        *out = handle;
    });
}

void sdb_curves_free(sdb_curves* c) { delete c; }

int sdb_curves_count(const sdb_curves* c) {
    return c ? static_cast<int>(c->curves.size()) : 0;
}

const char* sdb_sing_source_name(int source) {
    return sdb::sing_source_name(static_cast<sdb::SingSource>(source));
}

sdb_status sdb_curves_info(const sdb_curves* c, int index, sdb_curve_info* out) {
    if (sdb_status s = need(c && out, "curves and out must be non-null")) return s;
    if (sdb_status s = need(index >= 0 && index < static_cast<int>(c->curves.size()),
                            "curve index out of range"))
        return s;
    const sdb::SingCurve& cur = c->curves[static_cast<size_t>(index)];
    out->order = cur.order;
    out->source = static_cast<int>(cur.source);
    out->source_id = cur.source_id;
    out->branch = cur.branch;
    out->closed = cur.closed ? 1 : 0;
    out->n_points = static_cast<int>(cur.pts.size());
    out->chart_length = cur.chart_length();
    return SDB_OK;
}

sdb_status sdb_curves_points(const sdb_curves* c, int index, double* r, double* phi,
                             int cap, int* n_out) {
    if (sdb_status s = need(c && r && phi && n_out, "curves and outputs must be non-null"))
        return s;
    if (sdb_status s = need(index >= 0 && index < static_cast<int>(c->curves.size()),
                            "curve index out of range"))
        return s;
    const sdb::SingCurve& cur = c->curves[static_cast<size_t>(index)];
    int n = std::min<int>(static_cast<int>(cur.pts.size()), cap);
    for (int i = 0; i < n; ++i) {
        r[i] = cur.pts[static_cast<size_t>(i)].r;
        phi[i] = cur.pts[static_cast<size_t>(i)].phi;
    }
    *n_out = n;
    return SDB_OK;
}

/* ---- embedding / fuzz ------------------------------------------------------------ */

sdb_status sdb_embed_divergent_front(double q1x, double q1y, double v1x, double v1y,
                                     double q2x, double q2y, double v2x, double v2y,
                                     double eps0, sdb_embedding* out) {
    if (sdb_status s = need(out != nullptr, "out must be non-null")) return s;
    return guarded([&] {
        sdb::FrontEmbedding e = sdb::embed_divergent_front({q1x, q1y}, {v1x, v1y},
                                                           {q2x, q2y}, {v2x, v2y}, eps0);
        out->kind = e.kind;
        out->flat = e.flat ? 1 : 0;
        out->swapped = e.swapped ? 1 : 0;
        out->t1 = e.t1;
        out->t2 = e.t2;
        out->tau1 = e.tau1;
        out->tau2 = e.tau2;
        out->radius = e.radius;
        out->cx = e.center.x;
        out->cy = e.center.y;
        out->p1x = e.p1.x;
        out->p1y = e.p1.y;
        out->p2x = e.p2.x;
        out->p2y = e.p2.y;
        out->circle_residual = e.circle_residual;
        out->alignment_residual = e.alignment_residual;
    });
}

sdb_status sdb_fuzz_embeddings(long n, double eps0, uint64_t seed, sdb_fuzz_report* out) {
    if (sdb_status s = need(out != nullptr, "out must be non-null")) return s;
    return guarded([&] {
        sdb::FuzzReport rep = sdb::fuzz_embeddings(n, eps0, seed);
        out->n = rep.n;
        out->n_case1 = rep.n_case1;
        out->n_case2 = rep.n_case2;
        out->n_flat = rep.n_flat;
        out->n_violations = rep.n_violations;
        out->tau_bound = rep.tau_bound;
        out->max_abs_tau = rep.max_abs_tau;
        out->max_circle_residual = rep.max_circle_residual;
        out->max_alignment_residual = rep.max_alignment_residual;
    });
}

/* ---- frames / strips --------------------------------------------------------------- */

const char* sdb_frame_mode_name(int mode) {
    return sdb::frame_mode_name(static_cast<sdb::FrameMode>(mode));
}

sdb_status sdb_frame_build(const sdb_table* t, double r, double phi, int n,
                           sdb_frame** out) {
    if (sdb_status s = need(t && out, "table and out must be non-null")) return s;
    return guarded([&] {
        auto* handle = new sdb_frame;
        try {
            handle->frame = sdb::build_sync_frame(t->t, {r, phi}, n);
            handle->cert = sdb::lmf_check(handle->frame);
        } catch (...) {
            delete handle;
            throw;
        }
        *out = handle;
    });
}

void sdb_frame_free(sdb_frame* f) { delete f; }

sdb_status sdb_frame_get_info(const sdb_frame* f, sdb_frame_info* out) {
    if (sdb_status s = need(f && out, "frame and out must be non-null")) return s;
    const sdb::SyncFrame& fr = f->frame;
    out->r = fr.x.r;
    out->phi = fr.x.phi;
    out->n = fr.n;
    out->eps1 = fr.eps1;
    out->tau_next = fr.tau_next;
    out->mode = static_cast<int>(fr.mode);
    out->q_anchor_x = fr.q_anchor.x;
    out->q_anchor_y = fr.q_anchor.y;
    out->v_leg_x = fr.v_leg.x;
    out->v_leg_y = fr.v_leg.y;
    out->q_eps_x = fr.q_eps.x;
    out->q_eps_y = fr.q_eps.y;
    out->v_eps_x = fr.v_eps.x;
    out->v_eps_y = fr.v_eps.y;
    out->center_x = fr.center.x;
    out->center_y = fr.center.y;
    out->radius = fr.radius;
    out->side = fr.side;
    out->e_star = fr.e_star;
    out->e_bracket = fr.e_bracket;
    out->q1x = fr.q1.x;
    out->q1y = fr.q1.y;
    out->v1x = fr.v1.x;
    out->v1y = fr.v1.y;
    out->obstruction = static_cast<int>(fr.obstruction);
    out->obstruction_comp = fr.obstruction_comp;
    out->obstruction_corner = fr.obstruction_corner;
    out->q_star_x = fr.q_star.x;
    out->q_star_y = fr.q_star.y;
    out->h_fwd = fr.h_fwd;
    out->h_bwd = fr.h_bwd;
    out->q3x = fr.q3.x;
    out->q3y = fr.q3.y;
    out->q3_param = fr.q3_param;
    out->q3_on_chord = fr.q3_on_chord ? 1 : 0;
    out->q3t_x = fr.q3_tilde.x;
    out->q3t_y = fr.q3_tilde.y;
    out->v3x = fr.v3.x;
    out->v3y = fr.v3.y;
    out->sing_gap = fr.sing_gap;
    out->sing_cos = fr.sing_cos;
    out->open_cos = fr.open_cos;
    out->p1 = f->cert.p1;
    out->p2 = f->cert.p2;
    out->c1 = f->cert.c1;
    out->c2 = f->cert.c2;
    out->eta = f->cert.eta;
    out->min_product = f->cert.min_product();
    return SDB_OK;
}

sdb_status sdb_strip_build(const sdb_table* t, const sdb_frame* f, int n_samples,
                           double u0_radius, sdb_strip** out) {
    if (sdb_status s = need(t && f && out, "table, frame and out must be non-null")) return s;
    return guarded([&] {
        sdb::StripParams params;
        if (n_samples > 0) params.n_samples = n_samples;
        if (u0_radius > 0.0) params.u0_radius = u0_radius;
        auto* handle = new sdb_strip;
        try {
            handle->strip = sdb::build_strip(t->t, f->frame, params);
        } catch (...) {
            delete handle;
            throw;
        }
        *out = handle;
    });
}

void sdb_strip_free(sdb_strip* s) { delete s; }

sdb_status sdb_strip_get_info(const sdb_strip* s, sdb_strip_info* out) {
    if (sdb_status st = need(s && out, "strip and out must be non-null")) return st;
    const sdb::StripRegion& strip = s->strip;
    out->n = strip.n;
    out->n_samples = static_cast<int>(strip.samples.size());
    out->u0_r = strip.u0_center.r;
    out->u0_phi = strip.u0_center.phi;
    out->u0_radius = strip.u0_radius;
    out->monotone = strip.monotone ? 1 : 0;
    out->all_in_u0 = strip.all_in_u0 ? 1 : 0;
    out->max_landing_dist = strip.max_landing_dist;
    out->area = strip.area;
    return SDB_OK;
}

sdb_status sdb_strip_get_sample(const sdb_strip* s, int index, sdb_strip_sample* out) {
    if (sdb_status st = need(s && out, "strip and out must be non-null")) return st;
    if (sdb_status st = need(index >= 0 && index < static_cast<int>(s->strip.samples.size()),
                             "sample index out of range"))
        return st;
    const sdb::StripSample& sm = s->strip.samples[static_cast<size_t>(index)];
    out->e = sm.e;
    out->r = sm.landing.r;
    out->phi = sm.landing.phi;
    out->landing_dist = sm.landing_dist;
    out->tau_total = sm.tau_total;
    return SDB_OK;
}

sdb_status sdb_strip_contains(const sdb_table* t, const sdb_strip* s, const sdb_frame* f,
                              sdb_containment* out) {
    if (sdb_status st = need(t && s && f && out, "all handles must be non-null")) return st;
    return guarded([&] {
        sdb::ContainmentReport rep = sdb::strip_contains_orbit(t->t, s->strip, f->frame);
        out->inside_at_start = rep.inside_at_start ? 1 : 0;
        out->entered = rep.entered ? 1 : 0;
        out->entry_time = rep.entry_time;
        out->crossed_edge = rep.crossed_edge ? 1 : 0;
        out->crossing_time = rep.crossing_time;
        out->min_edge_clearance = rep.min_edge_clearance;
        out->landing_r = rep.landing.r;
        out->landing_phi = rep.landing.phi;
        out->landing_dist = rep.landing_dist;
        out->landing_in_u0 = rep.landing_in_u0 ? 1 : 0;
        out->contained = rep.contained ? 1 : 0;
    });
}

sdb_status sdb_grazing_fixture(const sdb_table* t, int component, double place, int dir,
                               double miss, int n_back, sdb_fixture* out) {
    if (sdb_status s = need(t && out, "table and out must be non-null")) return s;
    return guarded([&] {
        sdb::AimSpec aim;
        aim.component = component;
        aim.place = place;
        aim.dir = dir;
        aim.miss = miss;
        aim.n_back = n_back;
        sdb::BadFixture fx = sdb::make_grazing_fixture(t->t, aim);
        out->ok = fx.ok ? 1 : 0;
        copy_note(out->note, fx.note);
        out->r = fx.x.r;
        out->phi = fx.x.phi;
        out->n = fx.n;
        out->graze_t = fx.graze_t;
    });
}

/* ---- diagnostics -------------------------------------------------------------------- */

const char* sdb_point_class_name(int cls) {
    return sdb::point_class_name(static_cast<sdb::PointClass>(cls));
}

sdb_status sdb_classify_point(const sdb_table* t, double r, double phi, double delta,
                              const sdb_diag_config* cfg, sdb_point_verdict* out) {
    if (sdb_status s = need(t && out, "table and out must be non-null")) return s;
    return guarded([&] {
        sdb::PointVerdict v = sdb::classify_point(t->t, {r, phi}, delta, to_cfg(cfg));
        out->cls = static_cast<int>(v.cls);
        out->bad_n = v.bad_n;
        out->kappa_n = v.kappa_n;
        out->z_n = v.z_n;
        out->steps = v.steps;
    });
}

sdb_status sdb_tail_estimate(const sdb_table* t, const double* deltas, int n_deltas,
                             long n_samples, uint64_t seed, const sdb_diag_config* cfg,
                             int workers, sdb_tail** out) {
    if (sdb_status s = need(t && deltas && n_deltas > 0 && out, "bad tail arguments"))
        return s;
    return guarded([&] {
        std::vector<double> ds(deltas, deltas + n_deltas);
        auto* handle = new sdb_tail;
        try {
            handle->report =
                sdb::tail_estimate(t->t, ds, n_samples, seed, to_cfg(cfg), workers);
        } catch (...) {
            delete handle;
            throw;
        }
        *out = handle;
    });
}

void sdb_tail_free(sdb_tail* r) { delete r; }

int sdb_tail_rows(const sdb_tail* r) {
    return r ? static_cast<int>(r->report.rows.size()) : 0;
}

sdb_status sdb_tail_get_row(const sdb_tail* r, int index, sdb_tail_row* out) {
    if (sdb_status s = need(r && out, "report and out must be non-null")) return s;
    if (sdb_status s = need(index >= 0 && index < static_cast<int>(r->report.rows.size()),
                            "row index out of range"))
        return s;
    const sdb::TailRow& row = r->report.rows[static_cast<size_t>(index)];
    out->delta = row.delta;
    out->n_samples = row.n_samples;
    out->n_good = row.n_good;
    out->n_bad = row.n_bad;
    out->n_undetermined = row.n_undetermined;
    out->n_tail = row.n_tail;
    out->n_witnessed = row.n_witnessed;
    out->nu_tail_hat = row.nu_tail_hat;
    out->std_err = row.std_err;
    out->ratio = row.ratio;
    out->insufficient = row.insufficient ? 1 : 0;
    return SDB_OK;
}

sdb_status sdb_tail_get_hist(const sdb_tail* r, int index, long* counts, int cap,
                             int* n_out) {
    if (sdb_status s = need(r && counts && n_out, "report and outputs must be non-null"))
        return s;
    if (sdb_status s = need(index >= 0 && index < static_cast<int>(r->report.rows.size()),
                            "row index out of range"))
        return s;
    const std::vector<long>& hist = r->report.rows[static_cast<size_t>(index)].bad_at_n;
    int n = std::min<int>(static_cast<int>(hist.size()), cap);
    for (int i = 0; i < n; ++i) counts[i] = hist[static_cast<size_t>(i)];
    *n_out = n;
    return SDB_OK;
}

int sdb_tail_tilde_count(const sdb_tail* r, int index) {
    if (!r || index < 0 || index >= static_cast<int>(r->report.rows.size())) return 0;
    return static_cast<int>(r->report.rows[static_cast<size_t>(index)].tilde_nm.size());
}

sdb_status sdb_tail_get_tilde(const sdb_tail* r, int index, int k, int* n, int* m,
                              long* count) {
    if (sdb_status s = need(r && n && m && count, "report and outputs must be non-null"))
        return s;
    if (sdb_status s = need(index >= 0 && index < static_cast<int>(r->report.rows.size()),
                            "row index out of range"))
        return s;
    const auto& nm = r->report.rows[static_cast<size_t>(index)].tilde_nm;
    if (sdb_status s = need(k >= 0 && k < static_cast<int>(nm.size()),
                            "tilde index out of range"))
        return s;
    auto it = nm.begin();
    std::advance(it, k);
    *n = it->first.first;
    *m = it->first.second;
    *count = it->second;
    return SDB_OK;
}

sdb_status sdb_ansatz(const sdb_table* t, double resolution, long n_samples, int horizon,
                      uint64_t seed, sdb_ansatz_report* out, sdb_ansatz_row* rows, long cap,
                      long* n_rows) {
    if (sdb_status s = need(t && out, "table and out must be non-null")) return s;
    return guarded([&] {
        std::vector<sdb::SingCurve> s1 = sdb::trace_singularities(t->t, 1, resolution);
        sdb::AnsatzReport rep =
            sdb::ansatz_sampler(t->t, s1, n_samples, horizon, seed, rows != nullptr);
        out->n_samples = rep.n_samples;
        out->n_sufficient = rep.n_sufficient;
        out->n_undetermined = rep.n_undetermined;
        out->horizon = rep.horizon;
        out->sufficient_fraction = rep.sufficient_fraction;
        out->undetermined_fraction = rep.undetermined_fraction;
        out->n_curves = static_cast<int>(s1.size());
        if (rows && cap > 0) {
            long n = std::min<long>(static_cast<long>(rep.rows.size()), cap);
            for (long i = 0; i < n; ++i) {
                const sdb::AnsatzRow& row = rep.rows[static_cast<size_t>(i)];
                rows[i].curve = row.curve;
                rows[i].r = row.r;
                rows[i].phi = row.phi;
                rows[i].status = static_cast<int>(row.status);
            }
            if (n_rows) *n_rows = n;
        } else if (n_rows) {
            *n_rows = 0;
        }
    });
}

sdb_status sdb_lyapunov_orbit(const sdb_table* t, double r, double phi, long n_collisions,
                              double* exponent, int* restarts, double* trace, int trace_cap,
                              int* trace_len) {
    if (sdb_status s = need(t && exponent, "table and exponent must be non-null")) return s;
    return guarded([&] {
        sdb::LyapunovEstimate est = sdb::lyapunov_orbit(t->t, {r, phi}, n_collisions);
        *exponent = est.exponent;
        if (restarts) *restarts = est.restarts;
        if (trace && trace_cap > 0) {
            int n = std::min<int>(static_cast<int>(est.trace.size()), trace_cap);
            for (int i = 0; i < n; ++i) trace[i] = est.trace[static_cast<size_t>(i)];
            if (trace_len) *trace_len = n;
        } else if (trace_len) {
            *trace_len = 0;
        }
    });
}

sdb_status sdb_lyapunov_ensemble(const sdb_table* t, long n_collisions, int n_starts,
                                 uint64_t seed, int workers, double* mean,
                                 double* dispersion, int* restarts, double* exponents,
                                 int cap, int* n_out) {
    if (sdb_status s = need(t && mean && dispersion, "table and outputs must be non-null"))
        return s;
    return guarded([&] {
        sdb::LyapunovEnsemble ens =
            sdb::lyapunov_ensemble(t->t, n_collisions, n_starts, seed, workers);
        *mean = ens.mean;
        *dispersion = ens.dispersion;
        if (restarts) *restarts = ens.restarts;
        if (exponents && cap > 0) {
            int n = std::min<int>(static_cast<int>(ens.exponents.size()), cap);
            for (int i = 0; i < n; ++i) exponents[i] = ens.exponents[static_cast<size_t>(i)];
            if (n_out) *n_out = n;
        } else if (n_out) {
            *n_out = 0;
        }
    });
}

const char* sdb_test_fn_name(int fn) {
    return sdb::test_fn_name(static_cast<sdb::TestFn>(fn));
}

sdb_status sdb_birkhoff(const sdb_table* t, double center_r, double center_phi, int whole,
                        double ball_radius, const int* fns, const int* components,
                        int n_fns, long n_collisions, int n_starts, uint64_t seed,
                        int workers, sdb_birkhoff_row* rows, int* truncated_starts,
                        int* center_sufficient) {
    if (sdb_status s = need(t && fns && rows && n_fns > 0, "bad observable arguments"))
        return s;
    return guarded([&] {
        sdb::U0Ball ball;
        ball.whole = whole != 0;
        ball.r0 = center_r;
        ball.phi0 = center_phi;
        ball.radius = ball_radius;
        std::vector<std::pair<sdb::TestFn, int>> obs;
        for (int i = 0; i < n_fns; ++i)
            obs.emplace_back(static_cast<sdb::TestFn>(fns[i]), components ? components[i] : 0);
        sdb::BirkhoffReport rep =
            sdb::birkhoff_probe(t->t, {center_r, center_phi}, ball, obs, n_collisions,
                                n_starts, seed, workers);
        for (int i = 0; i < n_fns; ++i) {
            const sdb::BirkhoffRow& row = rep.rows[static_cast<size_t>(i)];
            rows[i].fn = static_cast<int>(row.fn);
            rows[i].component = row.component;
            rows[i].mean = row.mean;
            rows[i].dispersion = row.dispersion;
        }
        if (truncated_starts) *truncated_starts = rep.truncated_starts;
        if (center_sufficient) *center_sufficient = rep.center_sufficient ? 1 : 0;
    });
}

sdb_status sdb_invariance_check(const sdb_table* t, long n_samples, uint64_t seed,
                                int workers, sdb_invariance* out) {
    if (sdb_status s = need(t && out, "table and out must be non-null")) return s;
    return guarded([&] {
        sdb::InvarianceReport rep = sdb::invariance_check(t->t, n_samples, seed, workers);
        out->n_samples = rep.n_samples;
        out->ks_r = rep.ks_r;
        out->p_r = rep.p_r;
        out->ks_phi = rep.ks_phi;
        out->p_phi = rep.p_phi;
        out->chi2 = rep.chi2;
        out->chi2_dof = rep.chi2_dof;
        out->p_chi2 = rep.p_chi2;
        out->ks_identity = rep.ks_identity;
        out->chi2_identity = rep.chi2_identity;
    });
}

sdb_status sdb_calibrate_c3(const sdb_table* t, const double* c3s, int n_c3, double delta,
                            long n_samples, uint64_t seed, const sdb_diag_config* cfg,
                            int workers, sdb_c3_row* rows) {
    if (sdb_status s = need(t && c3s && rows && n_c3 > 0, "bad calibration arguments"))
        return s;
    return guarded([&] {
        std::vector<double> grid(c3s, c3s + n_c3);
        std::vector<sdb::C3Row> res =
            sdb::calibrate_c3(t->t, grid, delta, n_samples, seed, to_cfg(cfg), workers);
        for (int i = 0; i < n_c3; ++i) {
            const sdb::C3Row& row = res[static_cast<size_t>(i)];
            rows[i].c3 = row.c3;
            rows[i].delta = row.delta;
            rows[i].n_samples = row.n_samples;
            rows[i].frac_good = row.frac_good;
            rows[i].frac_bad = row.frac_bad;
            rows[i].frac_tail = row.frac_tail;
            rows[i].frac_undetermined = row.frac_undetermined;
        }
    });
}
