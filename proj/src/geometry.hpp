#pragma once

#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "vec2.hpp"

namespace sdb {

// Tolerances used when assembling and querying tables.
inline constexpr double kJunctionTol = 1e-12;   // endpoint coincidence
inline constexpr double kCornerTurnTol = 1e-9;  // tangent turn that makes a junction a corner
inline constexpr double kCornerHitTol = 1e-11;  // arc-length proximity counting as a corner hit

enum class ComponentKind { Segment, Arc };

// One boundary piece, traversed so that the billiard domain Q lies to the left.
// Arcs are swept from angle0 by `sweep` radians (negative sweep = clockwise =
// center outside Q = dispersing).  Transparent pieces are the sides of the
// fundamental rectangle on torus tables; crossings there are recorded but do not
// reflect.
struct BoundaryComponent {
    ComponentKind kind = ComponentKind::Segment;
    bool material = true;

    Vec2 a, b;  // segment endpoints (traversal a -> b)

    Vec2 center;
    double radius = 0.0;
    double angle0 = 0.0;
    double sweep = 0.0;

    double r_offset = 0.0;  // global arc-length coordinate of the traversal start

    double length() const;
    Vec2 point_at(double s) const;    // s = local arc length in [0, length]
    Vec2 tangent_at(double s) const;  // unit, traversal direction
    Vec2 normal_at(double s) const;   // unit, into Q (left of the tangent)
    double curvature() const;         // 0 for segments, 1/radius for dispersing arcs
    Vec2 start() const { return point_at(0.0); }
    Vec2 end() const { return length() > 0 ? point_at(length()) : start(); }
};

struct Corner {
    Vec2 q;
    int comp_prev = -1;  // component ending at q
    int comp_next = -1;  // component starting at q
    double turn_angle = 0.0;
    bool transparent = false;  // rectangle corner of a torus table
};

enum class Ambient { Plane, Torus };

struct Table {
    Ambient ambient = Ambient::Plane;
    double rect_w = 0.0, rect_h = 0.0;  // fundamental rectangle (torus only)

    // Material components first (authoring order), then, on torus tables, the four
    // transparent walls in the order bottom, right, top, left.
    std::vector<BoundaryComponent> components;
    int n_material = 0;

    std::vector<Corner> corners;  // material corners followed by rectangle corners

    double material_length = 0.0;
    double total_length = 0.0;
    bool has_arc = false;

    const BoundaryComponent& comp(int i) const { return components[static_cast<size_t>(i)]; }
    bool is_transparent(int i) const { return !components[static_cast<size_t>(i)].material; }

    // Global arc-length queries.  r is taken mod total_length.
    int component_at(double r, double* s_local) const;
    Vec2 point_at(double r) const;
    Vec2 tangent_at(double r) const;
    double curvature_at(double r) const;

    // Inward normal at a material point; CornerPoint if r lies within kCornerHitTol
    // of a material corner, TransparentWall if r falls on a wall.
    Vec2 material_normal_at(double r) const;
    // Inward normal of whichever component carries r (walls included).
    Vec2 normal_at_any(double r) const;

    // Nearest boundary point: returns global r; fills distance if requested.
    double locate(const Vec2& q, double* distance = nullptr) const;

    // Index into corners[] if the global coordinate r sits on a corner, else -1.
    int corner_at(double r) const;

    int sister_wall(int wall_component) const;  // opposite side of the rectangle
};

struct TableSpecArc {
    Vec2 center;
    double radius;
    double from_angle;
    double to_angle;
    bool convex_inward = true;
};

struct TableSpecSegment {
    Vec2 a, b;
};

struct TableSpec {
    Ambient ambient = Ambient::Plane;
    double rect_w = 0.0, rect_h = 0.0;
    struct Piece {
        ComponentKind kind;
        TableSpecSegment seg;
        TableSpecArc arc;
    };
    std::vector<Piece> pieces;
};

// Assemble and validate a table.  Throws SdbError with OpenBoundaryChain,
// NonConvexArc, OverlappingComponents or BadTable on invalid input.
Table build_table(const TableSpec& spec);

// Structured-text table description (JSON).  load reads a file; parse takes text.
Table load_table(const std::string& path);
Table parse_table(const std::string& json_text);
std::string table_to_json(const Table& table);

}  // namespace sdb
