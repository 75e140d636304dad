// Command-line front end over the public C interface.  Every subcommand writes
// plot-ready tabular files plus a run manifest that echoes the full
// configuration; fixed seed and flags reproduce every output byte.
#include "semidisperse.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

using nlohmann::json;

namespace {

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

struct Common {
    std::string table;
    uint64_t seed = 1;
    int workers = 1;
    std::string out = ".";
};

void add_common(CLI::App* cmd, Common& c, bool with_table = true) {
    if (with_table)
        cmd->add_option("table,--table", c.table, "path to the table description");
    cmd->add_option("--seed", c.seed, "random seed (determinism anchor)");
    cmd->add_option("--workers", c.workers, "worker threads for sample-parallel runs")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--out", c.out, "output directory (SEMIDISPERSE_OUT overrides)");
}

struct TableHandle {
    sdb_table* t = nullptr;
    TableHandle() = default;
    TableHandle(const TableHandle&) = delete;
    TableHandle& operator=(const TableHandle&) = delete;
    ~TableHandle() { sdb_table_free(t); }
};

struct CurvesHandle {
    sdb_curves* c = nullptr;
    ~CurvesHandle() { sdb_curves_free(c); }
};

struct FrameHandle {
    sdb_frame* f = nullptr;
    ~FrameHandle() { sdb_frame_free(f); }
};

struct StripHandle {
    sdb_strip* s = nullptr;
    ~StripHandle() { sdb_strip_free(s); }
};

struct TailHandle {
    sdb_tail* t = nullptr;
    ~TailHandle() { sdb_tail_free(t); }
};

// Exit codes: 0 success, 1 configuration problem, 2 numerical failure.
int exit_class(sdb_status s) {
    switch (s) {
        case SDB_OK:
            return 0;
        case SDB_ERR_IO:
        case SDB_ERR_PARSE:
        case SDB_ERR_OPEN_BOUNDARY_CHAIN:
        case SDB_ERR_NON_CONVEX_ARC:
        case SDB_ERR_OVERLAPPING_COMPONENTS:
        case SDB_ERR_BAD_TABLE:
        case SDB_ERR_BAD_ARGUMENT:
            return 1;
        default:
            return 2;
    }
}

struct Run {
    std::string command;
    Common common;
    json config;
    std::vector<std::string> outputs;
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

    Run(std::string cmd, const Common& c) : command(std::move(cmd)), common(c) {
        if (const char* env = std::getenv("SEMIDISPERSE_OUT")) common.out = env;
        std::error_code ec;
        std::filesystem::create_directories(common.out, ec);
        config["table"] = common.table;
        config["seed"] = common.seed;
        config["workers"] = common.workers;
        config["out"] = common.out;
    }

    std::string path(const std::string& name) const { return common.out + "/" + name; }

    bool open(const std::string& name, std::ofstream* f) {
        f->open(path(name));
        if (!*f) {
            std::fprintf(stderr, "error: cannot write %s\n", path(name).c_str());
            return false;
        }
        outputs.push_back(path(name));
        return true;
    }

    int fail_config(const std::string& msg) {
        std::fprintf(stderr, "error: %s\n", msg.c_str());
        return 1;
    }

    // Numerical failures leave a machine-readable diagnostic next to the outputs.
    int fail_api(sdb_status st, const std::string& context) {
        std::string msg = sdb_last_error();
        std::fprintf(stderr, "error (%s): %s: %s\n", sdb_status_name(st), context.c_str(),
                     msg.c_str());
        int code = exit_class(st);
        if (code == 2) {
            json diag;
            diag["command"] = command;
            diag["status"] = sdb_status_name(st);
            diag["context"] = context;
            diag["message"] = msg;
            diag["config"] = config;
            std::ofstream f;
            if (open(command + "-error.json", &f)) f << diag.dump(2) << "\n";
        }
        return code;
    }

    int finish() {
        json manifest;
        manifest["command"] = command;
        manifest["config"] = config;
        manifest["seed"] = common.seed;
        manifest["version"] = sdb_version();
        manifest["outputs"] = outputs;
        manifest["duration_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::ofstream f;
        if (!open(command + "-manifest.json", &f)) return 1;
        f << manifest.dump(2) << "\n";
        for (const std::string& p : outputs) std::printf("wrote %s\n", p.c_str());
        return 0;
    }
};

int load_table(Run& run, TableHandle* th) {
    if (run.common.table.empty())
        return run.fail_config("no table given (pass it positionally or via --table)");
    sdb_status st = sdb_table_load(run.common.table.c_str(), &th->t);
    if (st != SDB_OK) return run.fail_api(st, "loading " + run.common.table);
    return 0;
}

// Start coordinate for orbit subcommands: explicit (r, phi) or a seeded draw.
int start_coord(Run& run, const TableHandle& th, bool have_r, bool have_phi, double* r,
                double* phi) {
    if (have_r != have_phi) return run.fail_config("give both --r and --phi or neither");
    if (have_r) return 0;
    sdb_status st = sdb_sample_coord(th.t, run.common.seed, 0, r, phi);
    if (st != SDB_OK) return run.fail_api(st, "drawing a start coordinate");
    return 0;
}

// ---- validate -----------------------------------------------------------------

int run_validate(const Common& common) {
    Run run("validate", common);
    TableHandle th;
    if (int rc = load_table(run, &th)) return rc;

    sdb_table_info info{};
    if (sdb_status st = sdb_table_get_info(th.t, &info)) return run.fail_api(st, "info");

    std::printf("table %s: %d components (%d material), %d corners, %s\n",
                run.common.table.c_str(), info.n_components, info.n_material, info.n_corners,
                info.torus ? "torus" : "plane");
    std::printf("  material length %s, total length %s\n", fmt(info.material_length).c_str(),
                fmt(info.total_length).c_str());

    json j;
    j["table"] = run.common.table;
    j["n_components"] = info.n_components;
    j["n_material"] = info.n_material;
    j["n_corners"] = info.n_corners;
    j["torus"] = info.torus != 0;
    j["has_arc"] = info.has_arc != 0;
    j["rect"] = {info.rect_w, info.rect_h};
    j["material_length"] = info.material_length;
    j["total_length"] = info.total_length;
    j["components"] = json::array();
    for (int i = 0; i < info.n_components; ++i) {
        sdb_component_info ci{};
        if (sdb_status st = sdb_table_component(th.t, i, &ci))
            return run.fail_api(st, "component info");
        json c;
        c["index"] = i;
        c["kind"] = ci.kind ? "arc" : "segment";
        c["material"] = ci.material != 0;
        c["length"] = ci.length;
        c["curvature"] = ci.curvature;
        c["r_offset"] = ci.r_offset;
        c["a"] = {ci.ax, ci.ay};
        c["b"] = {ci.bx, ci.by};
        if (ci.kind) {
            c["center"] = {ci.cx, ci.cy};
            c["radius"] = ci.radius;
        }
        j["components"].push_back(c);
        std::printf("  component %d: %s%s, length %s\n", i, ci.kind ? "arc" : "segment",
                    ci.material ? "" : " (transparent)", fmt(ci.length).c_str());
    }
    j["corners"] = json::array();
    for (int i = 0; i < info.n_corners; ++i) {
        sdb_corner_info ci{};
        if (sdb_status st = sdb_table_corner(th.t, i, &ci))
            return run.fail_api(st, "corner info");
        json c;
        c["index"] = i;
        c["q"] = {ci.qx, ci.qy};
        c["comp_prev"] = ci.comp_prev;
        c["comp_next"] = ci.comp_next;
        c["turn_angle"] = ci.turn_angle;
        c["transparent"] = ci.transparent != 0;
        j["corners"].push_back(c);
    }

    std::ofstream f;
    if (!run.open("validate.json", &f)) return 1;
    f << j.dump(2) << "\n";
    return run.finish();
}

// ---- simulate -----------------------------------------------------------------

int run_simulate(const Common& common, double r, double phi, bool have_r, bool have_phi,
                 int n) {
    Run run("simulate", common);
    run.config["n"] = n;
    TableHandle th;
    if (int rc = load_table(run, &th)) return rc;
    if (int rc = start_coord(run, th, have_r, have_phi, &r, &phi)) return rc;
    run.config["r"] = r;
    run.config["phi"] = phi;

    std::vector<sdb_event> events(static_cast<size_t>(n));
    int n_out = 0;
    if (sdb_status st = sdb_simulate(th.t, r, phi, n, events.data(), n, &n_out))
        return run.fail_api(st, "simulate");

    std::ofstream f;
    if (!run.open("trajectory.csv", &f)) return 1;
    f << "# event map trajectory; unit speed, t is cumulative flight time from the start\n";
    f << "# columns: event_index (0-based), t, component_id (landing component), r (global "
         "arc length), phi (radians), qx,qy (landing point), vx,vy (outgoing velocity), "
         "class (regular|tangential|corner|transparent)\n";
    f << "event_index,t,component_id,r,phi,qx,qy,vx,vy,class\n";
    for (int i = 0; i < n_out; ++i) {
        const sdb_event& e = events[static_cast<size_t>(i)];
        f << i << ',' << fmt(e.t) << ',' << e.component << ',' << fmt(e.r) << ','
          << fmt(e.phi) << ',' << fmt(e.qx) << ',' << fmt(e.qy) << ',' << fmt(e.vx) << ','
          << fmt(e.vy) << ',' << sdb_event_class_name(e.cls) << '\n';
    }
    std::printf("simulated %d events from (r=%s, phi=%s)\n", n_out, fmt(r).c_str(),
                fmt(phi).c_str());
    return run.finish();
}

// ---- trace-sing ----------------------------------------------------------------

int run_trace_sing(const Common& common, int order, double resolution) {
    Run run("trace-sing", common);
    run.config["order"] = order;
    run.config["resolution"] = resolution;
    TableHandle th;
    if (int rc = load_table(run, &th)) return rc;

    CurvesHandle ch;
    if (sdb_status st = sdb_trace_singularities(th.t, order, resolution, &ch.c))
        return run.fail_api(st, "tracing");

    std::ofstream f;
    if (!run.open("curves.csv", &f)) return 1;
    f << "# singularity curves in the (r, phi) collision chart, one polyline per curve_id\n";
    f << "# columns: curve_id, order_n (curve belongs to S_order_n), source "
         "(arc-tangency|corner|wall-corner), r (global arc length), phi (radians)\n";
    f << "curve_id,order_n,source,r,phi\n";
    int n_curves = sdb_curves_count(ch.c);
    long total_pts = 0;
    for (int i = 0; i < n_curves; ++i) {
        sdb_curve_info info{};
        if (sdb_status st = sdb_curves_info(ch.c, i, &info)) return run.fail_api(st, "curve");
        std::vector<double> rs(static_cast<size_t>(info.n_points));
        std::vector<double> ps(static_cast<size_t>(info.n_points));
        int n_pts = 0;
        if (sdb_status st =
                sdb_curves_points(ch.c, i, rs.data(), ps.data(), info.n_points, &n_pts))
            return run.fail_api(st, "curve points");
        for (int k = 0; k < n_pts; ++k)
            f << i << ',' << info.order << ',' << sdb_sing_source_name(info.source) << ','
              << fmt(rs[static_cast<size_t>(k)]) << ',' << fmt(ps[static_cast<size_t>(k)])
              << '\n';
        total_pts += n_pts;
    }
    std::printf("traced %d curves (%ld chart points) of order %d\n", n_curves, total_pts,
                order);
    return run.finish();
}

// ---- ztub-map -----------------------------------------------------------------

int run_ztub_map(const Common& common, int nr, int nphi) {
    Run run("ztub-map", common);
    run.config["nr"] = nr;
    run.config["nphi"] = nphi;
    TableHandle th;
    if (int rc = load_table(run, &th)) return rc;

    sdb_table_info info{};
    if (sdb_status st = sdb_table_get_info(th.t, &info)) return run.fail_api(st, "info");

    const double half_pi = std::asin(1.0);
    std::vector<double> z(static_cast<size_t>(nr) * static_cast<size_t>(nphi));
    auto worker = [&](int i0, int i1) {
        for (int i = i0; i < i1; ++i) {
            double r = (i + 0.5) / nr * info.material_length;
            for (int j = 0; j < nphi; ++j) {
                double phi = -half_pi + (j + 0.5) / nphi * 2.0 * half_pi;
                double v = std::nan("");
                sdb_z_tub(th.t, r, phi, &v);  // singular grid points stay NaN
                z[static_cast<size_t>(i) * nphi + j] = v;
            }
        }
    };
    int workers = std::max(1, run.common.workers);
    if (workers == 1) {
        worker(0, nr);
    } else {
        std::vector<std::thread> pool;
        int chunk = (nr + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            int lo = w * chunk, hi = std::min(nr, lo + chunk);
            if (lo < hi) pool.emplace_back(worker, lo, hi);
        }
        for (std::thread& t : pool) t.join();
    }

    std::ofstream f;
    if (!run.open("ztub.csv", &f)) return 1;
    f << "# singularity tube half-width over the material collision chart\n";
    f << "# columns: r (global arc length, cell centers), phi (radians, cell centers), z "
         "(tube half-width; NaN where the base point is singular)\n";
    f << "r,phi,z\n";
    for (int i = 0; i < nr; ++i) {
        double r = (i + 0.5) / nr * info.material_length;
        for (int j = 0; j < nphi; ++j) {
            double phi = -half_pi + (j + 0.5) / nphi * 2.0 * half_pi;
            f << fmt(r) << ',' << fmt(phi) << ','
              << fmt(z[static_cast<size_t>(i) * nphi + j]) << '\n';
        }
    }
    return run.finish();
}

// ---- kappa ----------------------------------------------------------------------

int run_kappa(const Common& common, double r, double phi, bool have_r, bool have_phi, int n,
              double delta, double b0) {
    Run run("kappa", common);
    run.config["n"] = n;
    run.config["delta"] = delta;
    run.config["b0"] = b0;
    TableHandle th;
    if (int rc = load_table(run, &th)) return rc;
    if (int rc = start_coord(run, th, have_r, have_phi, &r, &phi)) return rc;
    run.config["r"] = r;
    run.config["phi"] = phi;

    std::vector<sdb_expansion_step> steps(static_cast<size_t>(2 * n + 16));
    int n_steps = 0, truncated = 0;
    double b_final = 0.0, log_growth = 0.0;
    if (sdb_status st =
            sdb_expansion(th.t, r, phi, n, b0, 0, steps.data(),
                          static_cast<int>(steps.size()), &n_steps, &b_final, &log_growth,
                          &truncated))
        return run.fail_api(st, "expansion");

    std::ofstream f;
    if (!run.open("expansion.csv", &f)) return 1;
    f << "# front curvature transport along the orbit (wall crossings appear as "
         "zero-kick legs)\n";
    f << "# columns: leg (1-based), t (leg flight time), B_before (curvature after the "
         "flight), B_after (after the collision kick), factor (|1 + t B| of the flight)\n";
    f << "leg,t,B_before,B_after,factor\n";
    for (int i = 0; i < n_steps; ++i) {
        const sdb_expansion_step& s = steps[static_cast<size_t>(i)];
        f << (i + 1) << ',' << fmt(s.tau) << ',' << fmt(s.B_before) << ',' << fmt(s.B_after)
          << ',' << fmt(s.factor) << '\n';
    }

    sdb_kappa_result kr{};
    std::vector<double> by_step(static_cast<size_t>(n));
    int n_by = 0;
    if (sdb_status st =
            sdb_kappa(th.t, r, phi, n, delta, &kr, by_step.data(), n, &n_by))
        return run.fail_api(st, "kappa");

    json j;
    j["r"] = r;
    j["phi"] = phi;
    j["n"] = kr.n;
    j["delta"] = delta;
    j["kappa0"] = kr.kappa0;
    j["kappa_delta"] = kr.kappa_delta;
    j["log_kappa0"] = kr.log_kappa0;
    j["B_argmin"] = kr.B_argmin;
    j["base_extent"] = kr.base_extent;
    j["truncated"] = kr.truncated != 0;
    j["expansion"] = {{"B0", b0},
                      {"B_final", b_final},
                      {"log_growth", log_growth},
                      {"legs", n_steps},
                      {"truncated", truncated != 0}};
    j["kappa_by_step"] = std::vector<double>(by_step.begin(), by_step.begin() + n_by);
    std::ofstream jf;
    if (!run.open("kappa.json", &jf)) return 1;
    jf << j.dump(2) << "\n";

    std::printf("kappa_%d = %s (log %s), delta-pinched %s\n", kr.n, fmt(kr.kappa0).c_str(),
                fmt(kr.log_kappa0).c_str(), fmt(kr.kappa_delta).c_str());
    return run.finish();
}

// ---- lemma21-fuzz ----------------------------------------------------------------

int run_fuzz(const Common& common, long n, double eps0) {
    Run run("lemma21-fuzz", common);
    run.config["n"] = n;
    run.config["eps0"] = eps0;

    sdb_fuzz_report rep{};
    if (sdb_status st = sdb_fuzz_embeddings(n, eps0, run.common.seed, &rep))
        return run.fail_api(st, "fuzzing");

    json j;
    j["n"] = rep.n;
    j["eps0"] = eps0;
    j["n_case1"] = rep.n_case1;
    j["n_case2"] = rep.n_case2;
    j["n_flat"] = rep.n_flat;
    j["n_violations"] = rep.n_violations;
    j["tau_bound"] = rep.tau_bound;
    j["max_abs_tau"] = rep.max_abs_tau;
    j["max_circle_residual"] = rep.max_circle_residual;
    j["max_alignment_residual"] = rep.max_alignment_residual;
    std::ofstream f;
    if (!run.open("fuzz.json", &f)) return 1;
    f << j.dump(2) << "\n";

    std::printf("%ld pairs: %ld pivot-case, %ld fixed-radius, %ld flat; %ld violations\n",
                rep.n, rep.n_case1, rep.n_case2, rep.n_flat, rep.n_violations);
    std::printf("max |tau| %s (bound %s), circle residual %s, alignment %s\n",
                fmt(rep.max_abs_tau).c_str(), fmt(rep.tau_bound).c_str(),
                fmt(rep.max_circle_residual).c_str(),
                fmt(rep.max_alignment_residual).c_str());
    if (rep.n_violations > 0) {
        json diag;
        diag["violations"] = rep.n_violations;
        std::ofstream df;
        if (run.open("lemma21-fuzz-error.json", &df)) df << diag.dump(2) << "\n";
        run.finish();
        return 2;
    }
    return run.finish();
}

// ---- sync-frame / strip-check -----------------------------------------------------

struct FrameFlags {
    double r = 0.0, phi = 0.0;
    bool have_r = false, have_phi = false;
    int n = 1;
    // fixture mode
    int component = -1;
    double place = 0.5;
    int dir = +1;
    double miss = 1e-4;
    int n_back = 2;
};

void add_frame_flags(CLI::App* cmd, FrameFlags& ff) {
    cmd->add_option("--r", ff.r, "base coordinate r")->each([&ff](const std::string&) {
        ff.have_r = true;
    });
    cmd->add_option("--phi", ff.phi, "base coordinate phi")->each([&ff](const std::string&) {
        ff.have_phi = true;
    });
    cmd->add_option("--n", ff.n, "frame is seeded after the n-th collision")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--component", ff.component,
                    "fixture mode: dispersing arc to graze (builds the base point)");
    cmd->add_option("--place", ff.place, "fixture: grazing point as a fraction of the arc");
    cmd->add_option("--dir", ff.dir, "fixture: tangent orientation (+1/-1)");
    cmd->add_option("--miss", ff.miss, "fixture: perpendicular miss distance");
    cmd->add_option("--n-back", ff.n_back, "fixture: collisions pulled back from the graze");
}

int resolve_frame_base(Run& run, const TableHandle& th, const FrameFlags& ff, double* r,
                       double* phi, int* n, json* fixture_out) {
    if (ff.component >= 0) {
        sdb_fixture fx{};
        if (sdb_status st = sdb_grazing_fixture(th.t, ff.component, ff.place, ff.dir,
                                                ff.miss, ff.n_back, &fx))
            return run.fail_api(st, "building the grazing fixture");
        if (!fx.ok) return run.fail_api(SDB_ERR_NO_WITNESS, fx.note);
        *r = fx.r;
        *phi = fx.phi;
        *n = fx.n;
        (*fixture_out)["component"] = ff.component;
        (*fixture_out)["place"] = ff.place;
        (*fixture_out)["dir"] = ff.dir;
        (*fixture_out)["miss"] = ff.miss;
        (*fixture_out)["n_back"] = ff.n_back;
        (*fixture_out)["graze_t"] = fx.graze_t;
        return 0;
    }
    if (!ff.have_r || !ff.have_phi)
        return run.fail_config("give --r and --phi, or a fixture via --component");
    *r = ff.r;
    *phi = ff.phi;
    *n = ff.n;
    return 0;
}

json frame_to_json(const sdb_frame_info& fi) {
    json j;
    j["x"] = {{"r", fi.r}, {"phi", fi.phi}};
    j["n"] = fi.n;
    j["eps1"] = fi.eps1;
    j["tau_next"] = fi.tau_next;
    j["mode"] = sdb_frame_mode_name(fi.mode);
    j["anchor"] = {{"q", {fi.q_anchor_x, fi.q_anchor_y}}, {"v", {fi.v_leg_x, fi.v_leg_y}}};
    j["x_eps"] = {{"q", {fi.q_eps_x, fi.q_eps_y}}, {"v", {fi.v_eps_x, fi.v_eps_y}}};
    j["carrier"] = {{"center", {fi.center_x, fi.center_y}}, {"radius", fi.radius}};
    j["side"] = fi.side;
    j["e_star"] = fi.e_star;
    j["e_bracket"] = fi.e_bracket;
    j["x1"] = {{"q", {fi.q1x, fi.q1y}}, {"v", {fi.v1x, fi.v1y}}};
    j["obstruction"] = {{"source", sdb_sing_source_name(fi.obstruction)},
                        {"component", fi.obstruction_comp},
                        {"corner", fi.obstruction_corner},
                        {"q_star", {fi.q_star_x, fi.q_star_y}},
                        {"gap", fi.sing_gap},
                        {"closing_cos", fi.sing_cos},
                        {"open_cos", fi.open_cos}};
    j["chord"] = {{"h_fwd", fi.h_fwd},
                  {"h_bwd", fi.h_bwd},
                  {"q3", {fi.q3x, fi.q3y}},
                  {"q3_param", fi.q3_param},
                  {"q3_on_chord", fi.q3_on_chord != 0},
                  {"q3_tilde", {fi.q3t_x, fi.q3t_y}},
                  {"v3", {fi.v3x, fi.v3y}}};
    j["certificate"] = {{"p1", fi.p1},       {"p2", fi.p2},   {"c1", fi.c1},
                        {"c2", fi.c2},       {"eta", fi.eta}, {"min_product", fi.min_product}};
    return j;
}

int run_sync_frame(const Common& common, const FrameFlags& ff) {
    Run run("sync-frame", common);
    TableHandle th;
    if (int rc = load_table(run, &th)) return rc;

    double r = 0.0, phi = 0.0;
    int n = 1;
    json fixture;
    if (int rc = resolve_frame_base(run, th, ff, &r, &phi, &n, &fixture)) return rc;
    run.config["r"] = r;
    run.config["phi"] = phi;
    run.config["n"] = n;
    if (!fixture.empty()) run.config["fixture"] = fixture;

    FrameHandle fh;
    if (sdb_status st = sdb_frame_build(th.t, r, phi, n, &fh.f))
        return run.fail_api(st, "building the frame");
    sdb_frame_info fi{};
    if (sdb_status st = sdb_frame_get_info(fh.f, &fi)) return run.fail_api(st, "frame info");

    json j = frame_to_json(fi);
    if (!fixture.empty()) j["fixture"] = fixture;
    std::ofstream f;
    if (!run.open("frame.json", &f)) return 1;
    f << j.dump(2) << "\n";

    std::printf("%s frame at n=%d: side %+d, e*=%s, certificate min %s\n",
                sdb_frame_mode_name(fi.mode), fi.n, fi.side, fmt(fi.e_star).c_str(),
                fmt(fi.min_product).c_str());
    return run.finish();
}

int run_strip_check(const Common& common, const FrameFlags& ff, int samples,
                    double u0_radius) {
    Run run("strip-check", common);
    run.config["samples"] = samples;
    run.config["u0_radius"] = u0_radius;
    TableHandle th;
    if (int rc = load_table(run, &th)) return rc;

    double r = 0.0, phi = 0.0;
    int n = 1;
    json fixture;
    if (int rc = resolve_frame_base(run, th, ff, &r, &phi, &n, &fixture)) return rc;
    run.config["r"] = r;
    run.config["phi"] = phi;
    run.config["n"] = n;
    if (!fixture.empty()) run.config["fixture"] = fixture;

    FrameHandle fh;
    if (sdb_status st = sdb_frame_build(th.t, r, phi, n, &fh.f))
        return run.fail_api(st, "building the frame");
    sdb_frame_info fi{};
    if (sdb_status st = sdb_frame_get_info(fh.f, &fi)) return run.fail_api(st, "frame info");

    StripHandle sh;
    if (sdb_status st = sdb_strip_build(th.t, fh.f, samples, u0_radius, &sh.s))
        return run.fail_api(st, "sweeping the strip");
    sdb_strip_info si{};
    if (sdb_status st = sdb_strip_get_info(sh.s, &si)) return run.fail_api(st, "strip info");

    std::ofstream f;
    if (!run.open("strip.csv", &f)) return 1;
    f << "# swept front samples: carrier parameter and the landing after n+1 events\n";
    f << "# columns: sample, e (carrier arc length), r,phi (landing coordinate), "
         "landing_dist (chart distance to the landing of sample 0), tau_total (flight "
         "time)\n";
    f << "sample,e,r,phi,landing_dist,tau_total\n";
    for (int i = 0; i < si.n_samples; ++i) {
        sdb_strip_sample sm{};
        if (sdb_status st = sdb_strip_get_sample(sh.s, i, &sm))
            return run.fail_api(st, "strip sample");
        f << i << ',' << fmt(sm.e) << ',' << fmt(sm.r) << ',' << fmt(sm.phi) << ','
          << fmt(sm.landing_dist) << ',' << fmt(sm.tau_total) << '\n';
    }

    sdb_containment co{};
    if (sdb_status st = sdb_strip_contains(th.t, sh.s, fh.f, &co))
        return run.fail_api(st, "containment");

    json j;
    j["frame"] = frame_to_json(fi);
    if (!fixture.empty()) j["fixture"] = fixture;
    j["strip"] = {{"n", si.n},
                  {"n_samples", si.n_samples},
                  {"u0", {{"r", si.u0_r}, {"phi", si.u0_phi}, {"radius", si.u0_radius}}},
                  {"monotone", si.monotone != 0},
                  {"all_in_u0", si.all_in_u0 != 0},
                  {"max_landing_dist", si.max_landing_dist},
                  {"area", si.area}};
    j["containment"] = {{"inside_at_start", co.inside_at_start != 0},
                        {"entered", co.entered != 0},
                        {"entry_time", co.entry_time},
                        {"crossed_edge", co.crossed_edge != 0},
                        {"crossing_time", co.crossing_time},
                        {"min_edge_clearance", co.min_edge_clearance},
                        {"landing", {{"r", co.landing_r}, {"phi", co.landing_phi}}},
                        {"landing_dist", co.landing_dist},
                        {"landing_in_u0", co.landing_in_u0 != 0},
                        {"contained", co.contained != 0}};
    std::ofstream jf;
    if (!run.open("strip.json", &jf)) return 1;
    jf << j.dump(2) << "\n";

    std::printf("strip: %d samples, monotone %s, area %s; companion contained: %s\n",
                si.n_samples, si.monotone ? "yes" : "no", fmt(si.area).c_str(),
                co.contained ? "yes" : "no");
    return run.finish();
}

// ---- tail ---------------------------------------------------------------------------

struct DiagFlags {
    double c3 = 0.1;
    double lambda = 2.0;
    int horizon = 64;
    int suff_horizon = 200;
};

void add_diag_flags(CLI::App* cmd, DiagFlags& d) {
    cmd->add_option("--c3", d.c3, "tube-clearance constant");
    cmd->add_option("--lambda", d.lambda, "dyadic base of the expansion strata");
    cmd->add_option("--horizon", d.horizon, "collisions examined per classified point");
    cmd->add_option("--suff-horizon", d.suff_horizon,
                    "past-sufficiency horizon for tail witnesses");
}

sdb_diag_config to_c_cfg(const DiagFlags& d) {
    sdb_diag_config cfg{};
    cfg.c3 = d.c3;
    cfg.lambda = d.lambda;
    cfg.horizon = d.horizon;
    cfg.suff_horizon = d.suff_horizon;
    return cfg;
}

int run_tail(const Common& common, const DiagFlags& dflags, std::vector<double> deltas,
             long samples) {
    Run run("tail", common);
    run.config["deltas"] = deltas;
    run.config["samples"] = samples;
    run.config["c3"] = dflags.c3;
    run.config["lambda"] = dflags.lambda;
    run.config["horizon"] = dflags.horizon;
    run.config["suff_horizon"] = dflags.suff_horizon;
    TableHandle th;
    if (int rc = load_table(run, &th)) return rc;

    sdb_diag_config cfg = to_c_cfg(dflags);
    TailHandle rh;
    if (sdb_status st = sdb_tail_estimate(th.t, deltas.data(),
                                          static_cast<int>(deltas.size()), samples,
                                          run.common.seed, &cfg, run.common.workers, &rh.t))
        return run.fail_api(st, "tail estimate");

    std::ofstream f;
    if (!run.open("tail.csv", &f)) return 1;
    f << "# measure of the late-violation tail across the delta grid\n";
    f << "# columns: delta (length), nu_tail_hat (estimated measure of points first bad "
         "beyond log2(1/delta) collisions), stderr (binomial standard error of "
         "nu_tail_hat), ratio (nu_tail_hat / delta)\n";
    f << "delta,nu_tail_hat,stderr,ratio\n";

    json detail;
    detail["rows"] = json::array();
    int n_rows = sdb_tail_rows(rh.t);
    for (int i = 0; i < n_rows; ++i) {
        sdb_tail_row row{};
        if (sdb_status st = sdb_tail_get_row(rh.t, i, &row)) return run.fail_api(st, "row");
        f << fmt(row.delta) << ',' << fmt(row.nu_tail_hat) << ',' << fmt(row.std_err) << ','
          << fmt(row.ratio) << '\n';

        json jr;
        jr["delta"] = row.delta;
        jr["n_samples"] = row.n_samples;
        jr["n_good"] = row.n_good;
        jr["n_bad"] = row.n_bad;
        jr["n_undetermined"] = row.n_undetermined;
        jr["n_tail"] = row.n_tail;
        jr["n_witnessed"] = row.n_witnessed;
        jr["nu_tail_hat"] = row.nu_tail_hat;
        jr["stderr"] = row.std_err;
        jr["ratio"] = row.ratio;
        jr["insufficient_samples"] = row.insufficient != 0;

        std::vector<long> hist(static_cast<size_t>(dflags.horizon) + 1, 0);
        int n_hist = 0;
        if (sdb_status st = sdb_tail_get_hist(rh.t, i, hist.data(),
                                              static_cast<int>(hist.size()), &n_hist))
            return run.fail_api(st, "histogram");
        json jh = json::object();
        for (int k = 0; k < n_hist; ++k)
            if (hist[static_cast<size_t>(k)] > 0)
                jh[std::to_string(k)] = hist[static_cast<size_t>(k)];
        jr["bad_at_n"] = jh;

        json jt = json::array();
        int n_tilde = sdb_tail_tilde_count(rh.t, i);
        for (int k = 0; k < n_tilde; ++k) {
            int nn = 0, mm = 0;
            long count = 0;
            if (sdb_status st = sdb_tail_get_tilde(rh.t, i, k, &nn, &mm, &count))
                return run.fail_api(st, "tilde");
            jt.push_back({{"n", nn}, {"m", mm}, {"count", count}});
        }
        jr["tilde_nm"] = jt;
        detail["rows"].push_back(jr);

        std::printf("delta %-12s tail %ld/%ld  measure %s +- %s  ratio %s%s\n",
                    fmt(row.delta).c_str(), row.n_tail, row.n_samples,
                    fmt(row.nu_tail_hat).c_str(), fmt(row.std_err).c_str(),
                    fmt(row.ratio).c_str(), row.insufficient ? "  [insufficient samples]" : "");
    }
    std::ofstream jf;
    if (!run.open("tail-detail.json", &jf)) return 1;
    jf << detail.dump(2) << "\n";
    return run.finish();
}

// ---- ansatz -------------------------------------------------------------------------

int run_ansatz(const Common& common, double resolution, long samples, int horizon) {
    Run run("ansatz", common);
    run.config["resolution"] = resolution;
    run.config["samples"] = samples;
    run.config["horizon"] = horizon;
    TableHandle th;
    if (int rc = load_table(run, &th)) return rc;

    sdb_ansatz_report rep{};
    std::vector<sdb_ansatz_row> rows(static_cast<size_t>(samples));
    long n_rows = 0;
    if (sdb_status st = sdb_ansatz(th.t, resolution, samples, horizon, run.common.seed,
                                   &rep, rows.data(), samples, &n_rows))
        return run.fail_api(st, "sampling");

    std::ofstream f;
    if (!run.open("ansatz.csv", &f)) return 1;
    f << "# past-sufficiency of points drawn uniformly by arc length from the first-order "
         "singularity curves\n";
    f << "# columns: curve_id, r, phi, status (sufficient|insufficient-by-horizon|"
         "undetermined)\n";
    f << "curve_id,r,phi,status\n";
    const char* status_names[] = {"sufficient", "insufficient-by-horizon", "undetermined"};
    for (long i = 0; i < n_rows; ++i) {
        const sdb_ansatz_row& row = rows[static_cast<size_t>(i)];
        int s = row.status >= 0 && row.status <= 2 ? row.status : 2;
        f << row.curve << ',' << fmt(row.r) << ',' << fmt(row.phi) << ',' << status_names[s]
          << '\n';
    }

    json j;
    j["n_curves"] = rep.n_curves;
    j["n_samples"] = rep.n_samples;
    j["n_sufficient"] = rep.n_sufficient;
    j["n_undetermined"] = rep.n_undetermined;
    j["horizon"] = rep.horizon;
    j["sufficient_fraction"] = rep.sufficient_fraction;
    j["undetermined_fraction"] = rep.undetermined_fraction;
    std::ofstream jf;
    if (!run.open("ansatz.json", &jf)) return 1;
    jf << j.dump(2) << "\n";

    std::printf("%ld samples on %d curves: %s sufficient, %s undetermined\n", rep.n_samples,
                rep.n_curves, fmt(rep.sufficient_fraction).c_str(),
                fmt(rep.undetermined_fraction).c_str());
    return run.finish();
}

// ---- lyapunov -------------------------------------------------------------------------

int run_lyapunov(const Common& common, long n, int starts) {
    Run run("lyapunov", common);
    run.config["n"] = n;
    run.config["starts"] = starts;
    TableHandle th;
    if (int rc = load_table(run, &th)) return rc;

    double mean = 0.0, dispersion = 0.0;
    int restarts = 0, n_out = 0;
    std::vector<double> exps(static_cast<size_t>(starts));
    if (sdb_status st =
            sdb_lyapunov_ensemble(th.t, n, starts, run.common.seed, run.common.workers,
                                  &mean, &dispersion, &restarts, exps.data(), starts, &n_out))
        return run.fail_api(st, "ensemble");

    std::ofstream f;
    if (!run.open("lyapunov.csv", &f)) return 1;
    f << "# flat-front expansion exponents per material collision, one ensemble start per "
         "row\n";
    f << "start,exponent\n";
    for (int i = 0; i < n_out; ++i) f << i << ',' << fmt(exps[static_cast<size_t>(i)]) << '\n';

    // convergence trace of the first ensemble start (same seeded coordinate)
    double r0 = 0.0, phi0 = 0.0;
    std::vector<double> trace(64, 0.0);
    int trace_len = 0;
    double exp0 = 0.0;
    int restarts0 = 0;
    if (sdb_status st = sdb_sample_coord(th.t, run.common.seed, 4000037ULL, &r0, &phi0))
        return run.fail_api(st, "trace start");
    if (sdb_status st = sdb_lyapunov_orbit(th.t, r0, phi0, n, &exp0, &restarts0,
                                           trace.data(), 64, &trace_len))
        return run.fail_api(st, "trace orbit");
    std::ofstream tf;
    if (!run.open("lyapunov-trace.csv", &tf)) return 1;
    tf << "# running exponent of the first ensemble start at doubling checkpoints\n";
    tf << "collisions,exponent\n";
    for (int i = 0; i < trace_len; ++i) {
        long at = std::min(n, 1L << i);
        tf << at << ',' << fmt(trace[static_cast<size_t>(i)]) << '\n';
    }

    json j;
    j["mean"] = mean;
    j["dispersion"] = dispersion;
    j["relative_dispersion"] = mean != 0.0 ? dispersion / std::abs(mean) : 0.0;
    j["restarts"] = restarts;
    j["collisions"] = n;
    j["starts"] = n_out;
    std::ofstream jf;
    if (!run.open("lyapunov.json", &jf)) return 1;
    jf << j.dump(2) << "\n";

    std::printf("exponent %s +- %s per collision over %d starts (%d restarts)\n",
                fmt(mean).c_str(), fmt(dispersion).c_str(), n_out, restarts);
    return run.finish();
}

// ---- birkhoff ---------------------------------------------------------------------------

int run_birkhoff(const Common& common, long n, int starts, std::vector<std::string> fns,
                 int component, double r, double phi, bool have_r, bool have_phi,
                 double ball_radius) {
    Run run("birkhoff", common);
    run.config["n"] = n;
    run.config["starts"] = starts;
    run.config["fns"] = fns;
    run.config["component"] = component;
    run.config["ball_radius"] = ball_radius;
    TableHandle th;
    if (int rc = load_table(run, &th)) return rc;
    if (int rc = start_coord(run, th, have_r, have_phi, &r, &phi)) return rc;
    run.config["r"] = r;
    run.config["phi"] = phi;

    std::vector<int> fn_ids, comps;
    for (const std::string& name : fns) {
        if (name == "cos_phi") {
            fn_ids.push_back(0);
        } else if (name == "on_component") {
            fn_ids.push_back(1);
        } else if (name == "one") {
            fn_ids.push_back(2);
        } else {
            return run.fail_config("unknown observable '" + name +
                                   "' (use cos_phi, on_component, one)");
        }
        comps.push_back(component);
    }

    std::vector<sdb_birkhoff_row> rows(fn_ids.size());
    int truncated = 0, center_sufficient = 0;
    int whole = ball_radius > 0.0 ? 0 : 1;
    if (sdb_status st =
            sdb_birkhoff(th.t, r, phi, whole, ball_radius, fn_ids.data(), comps.data(),
                         static_cast<int>(fn_ids.size()), n, starts, run.common.seed,
                         run.common.workers, rows.data(), &truncated, &center_sufficient))
        return run.fail_api(st, "averaging");

    std::ofstream f;
    if (!run.open("birkhoff.csv", &f)) return 1;
    f << "# Birkhoff averages over material collisions; dispersion is the cross-start "
         "standard deviation\n";
    f << "fn,component,mean,dispersion\n";
    for (const sdb_birkhoff_row& row : rows)
        f << sdb_test_fn_name(row.fn) << ',' << row.component << ',' << fmt(row.mean) << ','
          << fmt(row.dispersion) << '\n';

    json j;
    j["collisions"] = n;
    j["starts"] = starts;
    j["truncated_starts"] = truncated;
    j["center_sufficient"] = center_sufficient != 0;
    j["rows"] = json::array();
    for (const sdb_birkhoff_row& row : rows)
        j["rows"].push_back({{"fn", sdb_test_fn_name(row.fn)},
                             {"component", row.component},
                             {"mean", row.mean},
                             {"dispersion", row.dispersion}});
    std::ofstream jf;
    if (!run.open("birkhoff.json", &jf)) return 1;
    jf << j.dump(2) << "\n";

    for (const sdb_birkhoff_row& row : rows)
        std::printf("%-14s mean %s dispersion %s\n", sdb_test_fn_name(row.fn),
                    fmt(row.mean).c_str(), fmt(row.dispersion).c_str());
    return run.finish();
}

// ---- invariance -----------------------------------------------------------------------

int run_invariance(const Common& common, long samples) {
    Run run("invariance", common);
    run.config["samples"] = samples;
    TableHandle th;
    if (int rc = load_table(run, &th)) return rc;

    sdb_invariance rep{};
    if (sdb_status st = sdb_invariance_check(th.t, samples, run.common.seed,
                                             run.common.workers, &rep))
        return run.fail_api(st, "invariance");

    json j;
    j["n_samples"] = rep.n_samples;
    j["ks_r"] = rep.ks_r;
    j["p_r"] = rep.p_r;
    j["ks_phi"] = rep.ks_phi;
    j["p_phi"] = rep.p_phi;
    j["chi2"] = rep.chi2;
    j["chi2_dof"] = rep.chi2_dof;
    j["p_chi2"] = rep.p_chi2;
    j["ks_identity"] = rep.ks_identity;
    j["chi2_identity"] = rep.chi2_identity;
    std::ofstream f;
    if (!run.open("invariance.json", &f)) return 1;
    f << j.dump(2) << "\n";

    std::printf("KS r %s (p %s), KS phi %s (p %s), chi2 %s/%s dof (p %s)\n",
                fmt(rep.ks_r).c_str(), fmt(rep.p_r).c_str(), fmt(rep.ks_phi).c_str(),
                fmt(rep.p_phi).c_str(), fmt(rep.chi2).c_str(), fmt(rep.chi2_dof).c_str(),
                fmt(rep.p_chi2).c_str());
    return run.finish();
}

// ---- calibrate-c3 ------------------------------------------------------------------------

int run_calibrate(const Common& common, const DiagFlags& dflags, std::vector<double> c3s,
                  double delta, long samples) {
    Run run("calibrate-c3", common);
    run.config["c3s"] = c3s;
    run.config["delta"] = delta;
    run.config["samples"] = samples;
    run.config["horizon"] = dflags.horizon;
    TableHandle th;
    if (int rc = load_table(run, &th)) return rc;

    sdb_diag_config cfg = to_c_cfg(dflags);
    std::vector<sdb_c3_row> rows(c3s.size());
    if (sdb_status st =
            sdb_calibrate_c3(th.t, c3s.data(), static_cast<int>(c3s.size()), delta, samples,
                             run.common.seed, &cfg, run.common.workers, rows.data()))
        return run.fail_api(st, "calibration");

    std::ofstream f;
    if (!run.open("calibrate-c3.csv", &f)) return 1;
    f << "# classification fractions over a c3 sweep at fixed delta (same sample set per "
         "row)\n";
    f << "c3,delta,frac_good,frac_bad,frac_tail,frac_undetermined\n";
    for (const sdb_c3_row& row : rows) {
        f << fmt(row.c3) << ',' << fmt(row.delta) << ',' << fmt(row.frac_good) << ','
          << fmt(row.frac_bad) << ',' << fmt(row.frac_tail) << ','
          << fmt(row.frac_undetermined) << '\n';
        std::printf("c3 %-10s good %s bad %s tail %s undetermined %s\n", fmt(row.c3).c_str(),
                    fmt(row.frac_good).c_str(), fmt(row.frac_bad).c_str(),
                    fmt(row.frac_tail).c_str(), fmt(row.frac_undetermined).c_str());
    }
    return run.finish();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"planar semi-dispersing billiard toolkit"};
    app.require_subcommand(1);
    int rc = 0;

    // validate
    {
        auto c = std::make_shared<Common>();
        CLI::App* cmd = app.add_subcommand("validate", "load a table and print its summary");
        add_common(cmd, *c);
        cmd->callback([&rc, c] { rc = run_validate(*c); });
    }
    // simulate
    {
        auto c = std::make_shared<Common>();
        auto r = std::make_shared<double>(0.0);
        auto phi = std::make_shared<double>(0.0);
        auto have_r = std::make_shared<bool>(false);
        auto have_phi = std::make_shared<bool>(false);
        auto n = std::make_shared<int>(1000);
        CLI::App* cmd = app.add_subcommand("simulate", "iterate the event map, write the trajectory");
        add_common(cmd, *c);
        cmd->add_option("--r", *r, "start coordinate r")->each([have_r](const std::string&) {
            *have_r = true;
        });
        cmd->add_option("--phi", *phi, "start coordinate phi")
            ->each([have_phi](const std::string&) { *have_phi = true; });
        cmd->add_option("--n", *n, "number of events")->check(CLI::PositiveNumber);
        cmd->callback([=, &rc] { rc = run_simulate(*c, *r, *phi, *have_r, *have_phi, *n); });
    }
    // trace-sing
    {
        auto c = std::make_shared<Common>();
        auto order = std::make_shared<int>(1);
        auto resolution = std::make_shared<double>(1e-3);
        CLI::App* cmd =
            app.add_subcommand("trace-sing", "trace singularity curves in the collision chart");
        add_common(cmd, *c);
        cmd->add_option("--order", *order, "curve order (sign picks the time direction)");
        cmd->add_option("--resolution", *resolution, "chart-length step of the tracer");
        cmd->callback([=, &rc] { rc = run_trace_sing(*c, *order, *resolution); });
    }
    // ztub-map
    {
        auto c = std::make_shared<Common>();
        auto nr = std::make_shared<int>(200);
        auto nphi = std::make_shared<int>(200);
        CLI::App* cmd =
            app.add_subcommand("ztub-map", "tube half-width on a grid over the collision chart");
        add_common(cmd, *c);
        cmd->add_option("--nr", *nr, "grid cells in r")->check(CLI::PositiveNumber);
        cmd->add_option("--nphi", *nphi, "grid cells in phi")->check(CLI::PositiveNumber);
        cmd->callback([=, &rc] { rc = run_ztub_map(*c, *nr, *nphi); });
    }
    // kappa
    {
        auto c = std::make_shared<Common>();
        auto r = std::make_shared<double>(0.0);
        auto phi = std::make_shared<double>(0.0);
        auto have_r = std::make_shared<bool>(false);
        auto have_phi = std::make_shared<bool>(false);
        auto n = std::make_shared<int>(20);
        auto delta = std::make_shared<double>(1e-3);
        auto b0 = std::make_shared<double>(0.0);
        CLI::App* cmd =
            app.add_subcommand("kappa", "front expansion along an orbit: legs and growth");
        add_common(cmd, *c);
        cmd->add_option("--r", *r, "start coordinate r")->each([have_r](const std::string&) {
            *have_r = true;
        });
        cmd->add_option("--phi", *phi, "start coordinate phi")
            ->each([have_phi](const std::string&) { *have_phi = true; });
        cmd->add_option("--n", *n, "collisions")->check(CLI::PositiveNumber);
        cmd->add_option("--delta", *delta, "image extent for the pinched growth");
        cmd->add_option("--b0", *b0, "initial front curvature for the leg table");
        cmd->callback([=, &rc] {
            rc = run_kappa(*c, *r, *phi, *have_r, *have_phi, *n, *delta, *b0);
        });
    }
    // lemma21-fuzz
    {
        auto c = std::make_shared<Common>();
        auto n = std::make_shared<long>(100000);
        auto eps0 = std::make_shared<double>(1e-3);
        CLI::App* cmd = app.add_subcommand(
            "lemma21-fuzz", "randomized two-ray front embeddings: bounds and residuals");
        add_common(cmd, *c, false);
        cmd->add_option("--n", *n, "number of ray pairs")->check(CLI::PositiveNumber);
        cmd->add_option("--eps0", *eps0, "closeness scale of the ray pairs");
        cmd->callback([=, &rc] { rc = run_fuzz(*c, *n, *eps0); });
    }
    // sync-frame
    {
        auto c = std::make_shared<Common>();
        auto ff = std::make_shared<FrameFlags>();
        CLI::App* cmd = app.add_subcommand(
            "sync-frame", "build the synchronized front at a near-singular orbit leg");
        add_common(cmd, *c);
        add_frame_flags(cmd, *ff);
        cmd->callback([=, &rc] { rc = run_sync_frame(*c, *ff); });
    }
    // strip-check
    {
        auto c = std::make_shared<Common>();
        auto ff = std::make_shared<FrameFlags>();
        auto samples = std::make_shared<int>(200);
        auto u0_radius = std::make_shared<double>(0.1);
        CLI::App* cmd = app.add_subcommand(
            "strip-check", "sweep the frame's front and test companion containment");
        add_common(cmd, *c);
        add_frame_flags(cmd, *ff);
        cmd->add_option("--samples", *samples, "front samples across the strip")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--u0-radius", *u0_radius, "chart radius of the landing neighborhood");
        cmd->callback([=, &rc] { rc = run_strip_check(*c, *ff, *samples, *u0_radius); });
    }
    // tail
    {
        auto c = std::make_shared<Common>();
        auto d = std::make_shared<DiagFlags>();
        auto deltas = std::make_shared<std::vector<double>>(
            std::vector<double>{1e-2, 5e-3, 2.5e-3});
        auto samples = std::make_shared<long>(100000);
        CLI::App* cmd =
            app.add_subcommand("tail", "measure of the late-violation tail over a delta grid");
        add_common(cmd, *c);
        add_diag_flags(cmd, *d);
        cmd->add_option("--deltas", *deltas, "delta grid")->delimiter(',');
        cmd->add_option("--samples", *samples, "Monte-Carlo samples per delta")
            ->check(CLI::PositiveNumber);
        cmd->callback([=, &rc] { rc = run_tail(*c, *d, *deltas, *samples); });
    }
    // ansatz
    {
        auto c = std::make_shared<Common>();
        auto resolution = std::make_shared<double>(1e-3);
        auto samples = std::make_shared<long>(10000);
        auto horizon = std::make_shared<int>(200);
        CLI::App* cmd = app.add_subcommand(
            "ansatz", "past-sufficiency fractions of first-order singularity samples");
        add_common(cmd, *c);
        cmd->add_option("--resolution", *resolution, "tracer chart-length step");
        cmd->add_option("--samples", *samples, "samples drawn across the curves")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--horizon", *horizon, "backward collisions examined per sample")
            ->check(CLI::PositiveNumber);
        cmd->callback([=, &rc] { rc = run_ansatz(*c, *resolution, *samples, *horizon); });
    }
    // lyapunov
    {
        auto c = std::make_shared<Common>();
        auto n = std::make_shared<long>(100000);
        auto starts = std::make_shared<int>(100);
        CLI::App* cmd =
            app.add_subcommand("lyapunov", "flat-front expansion exponent per collision");
        add_common(cmd, *c);
        cmd->add_option("--n", *n, "collisions per start")->check(CLI::PositiveNumber);
        cmd->add_option("--starts", *starts, "ensemble size")->check(CLI::PositiveNumber);
        cmd->callback([=, &rc] { rc = run_lyapunov(*c, *n, *starts); });
    }
    // birkhoff
    {
        auto c = std::make_shared<Common>();
        auto n = std::make_shared<long>(100000);
        auto starts = std::make_shared<int>(50);
        auto fns = std::make_shared<std::vector<std::string>>(
            std::vector<std::string>{"cos_phi", "on_component", "one"});
        auto component = std::make_shared<int>(0);
        auto r = std::make_shared<double>(0.0);
        auto phi = std::make_shared<double>(0.0);
        auto have_r = std::make_shared<bool>(false);
        auto have_phi = std::make_shared<bool>(false);
        auto ball = std::make_shared<double>(0.0);
        CLI::App* cmd = app.add_subcommand(
            "birkhoff", "cross-start dispersion of Birkhoff averages (ergodicity probe)");
        add_common(cmd, *c);
        cmd->add_option("--n", *n, "collisions per start")->check(CLI::PositiveNumber);
        cmd->add_option("--starts", *starts, "ensemble size")->check(CLI::PositiveNumber);
        cmd->add_option("--fns", *fns, "observables: cos_phi,on_component,one")
            ->delimiter(',');
        cmd->add_option("--component", *component, "component index for on_component");
        cmd->add_option("--r", *r, "ball center r")->each([have_r](const std::string&) {
            *have_r = true;
        });
        cmd->add_option("--phi", *phi, "ball center phi")
            ->each([have_phi](const std::string&) { *have_phi = true; });
        cmd->add_option("--ball-radius", *ball,
                        "chart half-width of the start ball (0 = whole boundary)");
        cmd->callback([=, &rc] {
            rc = run_birkhoff(*c, *n, *starts, *fns, *component, *r, *phi, *have_r,
                              *have_phi, *ball);
        });
    }
    // invariance
    {
        auto c = std::make_shared<Common>();
        auto samples = std::make_shared<long>(1000000);
        CLI::App* cmd = app.add_subcommand(
            "invariance", "two-sample tests between a measure draw and its one-step image");
        add_common(cmd, *c);
        cmd->add_option("--samples", *samples, "sample pairs")->check(CLI::PositiveNumber);
        cmd->callback([=, &rc] { rc = run_invariance(*c, *samples); });
    }
    // calibrate-c3
    {
        auto c = std::make_shared<Common>();
        auto d = std::make_shared<DiagFlags>();
        auto c3s = std::make_shared<std::vector<double>>(
            std::vector<double>{0.025, 0.05, 0.1, 0.2, 0.4});
        auto delta = std::make_shared<double>(5e-3);
        auto samples = std::make_shared<long>(100000);
        CLI::App* cmd = app.add_subcommand(
            "calibrate-c3", "classification fractions across a c3 sweep at fixed delta");
        add_common(cmd, *c);
        add_diag_flags(cmd, *d);
        cmd->add_option("--c3s", *c3s, "c3 grid")->delimiter(',');
        cmd->add_option("--delta", *delta, "fixed delta of the sweep");
        cmd->add_option("--samples", *samples, "samples per c3 value")
            ->check(CLI::PositiveNumber);
        cmd->callback([=, &rc] { rc = run_calibrate(*c, *d, *c3s, *delta, *samples); });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    return rc;
}
