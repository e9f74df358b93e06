#include "relit/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "relit/error.hpp"

namespace relit {

namespace fs = std::filesystem;

std::vector<Vec3> compute_vertex_normals(std::span<const Vec3> vertices,
                                         std::span<const std::array<int, 3>> triangles) {
    std::vector<Vec3> n(vertices.size());
    for (const auto& t : triangles) {
        const Vec3 a = vertices[static_cast<std::size_t>(t[0])];
        const Vec3 b = vertices[static_cast<std::size_t>(t[1])];
        const Vec3 c = vertices[static_cast<std::size_t>(t[2])];
        const Vec3 face = cross(b - a, c - a);  // length = 2 * area
        for (int i : t) n[static_cast<std::size_t>(i)] += face;
    }
    for (Vec3& v : n) v = normalize(v);
    return n;
}

Camera fit_orthographic_camera(std::span<const Vec3> vertices, double margin) {
    Vec3 lo{std::numeric_limits<double>::max(), std::numeric_limits<double>::max(),
            std::numeric_limits<double>::max()};
    Vec3 hi = -lo;
    for (const Vec3& v : vertices) {
        lo = {std::min(lo.x, v.x), std::min(lo.y, v.y), std::min(lo.z, v.z)};
        hi = {std::max(hi.x, v.x), std::max(hi.y, v.y), std::max(hi.z, v.z)};
    }
    Camera cam;
    const Vec3 center = (lo + hi) * 0.5;
    const double half = 0.5 * std::max(hi.x - lo.x, hi.y - lo.y);
    const double depth = hi.z - lo.z;
    cam.target = center;
    cam.position = center + Vec3{0.0, 0.0, depth + 2.0 * half + 1.0};
    cam.ortho_half_height = std::max(half, 1e-9) * margin;
    return cam;
}

MeshScene parse_obj(std::istream& in, const std::string& name) {
    MeshScene mesh;
    std::string line;
    int line_no = 0;
    auto fail = [&](const std::string& what) {
        throw IoError("OBJ parse error in " + name + " line " + std::to_string(line_no) + ": " + what);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;
        if (tag == "v") {
            Vec3 v;
            if (!(ls >> v.x >> v.y >> v.z)) fail("vertex needs three coordinates");
            mesh.vertices.push_back(v);
        } else if (tag == "f") {
            std::vector<int> poly;
            std::string tok;
            while (ls >> tok) {
                const std::string idx = tok.substr(0, tok.find('/'));
                int i = 0;
                try {
                    std::size_t used = 0;
                    i = std::stoi(idx, &used);
                    if (used != idx.size()) fail("bad face index '" + tok + "'");
                } catch (const std::logic_error&) {
                    fail("bad face index '" + tok + "'");
                }
                const int n = static_cast<int>(mesh.vertices.size());
                const int resolved = i > 0 ? i - 1 : n + i;
                if (i == 0 || resolved < 0 || resolved >= n) fail("face index out of range '" + tok + "'");
                poly.push_back(resolved);
            }
            if (poly.size() < 3) fail("face needs at least three vertices");
            for (std::size_t k = 1; k + 1 < poly.size(); ++k) mesh.triangles.push_back({poly[0], poly[k], poly[k + 1]});
        }
    }
    if (mesh.triangles.empty()) throw IoError("OBJ has no faces: " + name);
    double area = 0.0;
    for (const auto& t : mesh.triangles) {
        area += length(cross(mesh.vertices[static_cast<std::size_t>(t[1])] - mesh.vertices[static_cast<std::size_t>(t[0])],
                             mesh.vertices[static_cast<std::size_t>(t[2])] - mesh.vertices[static_cast<std::size_t>(t[0])]));
    }
    if (!(area > 0.0)) throw IoError("OBJ is degenerate (all faces have zero area): " + name);
    mesh.normals = compute_vertex_normals(mesh.vertices, mesh.triangles);
    mesh.camera = fit_orthographic_camera(mesh.vertices);
    return mesh;
}

MeshScene load_obj(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open OBJ file: " + path.string());
    return parse_obj(in, path.string());
}

void load_blendshapes(MeshScene& base, const fs::path& manifest) {
    std::ifstream in(manifest);
    if (!in) throw IoError("cannot open blendshape manifest: " + manifest.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed blendshape manifest " + manifest.string() + ": " + e.what());
    }
    if (!j.contains("shapes") || !j["shapes"].is_array()) {
        throw IoError("blendshape manifest needs a \"shapes\" array: " + manifest.string());
    }
    base.blendshapes.clear();
    for (const auto& entry : j["shapes"]) {
        const fs::path p = manifest.parent_path() / entry.get<std::string>();
        const MeshScene shape = load_obj(p);
        if (shape.vertices.size() != base.vertices.size() || shape.triangles != base.triangles) {
            throw InvalidInput("blendshape topology differs from the base mesh: " + p.string());
        }
        std::vector<Vec3> delta(base.vertices.size());
        for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = shape.vertices[i] - base.vertices[i];
        base.blendshapes.push_back(std::move(delta));
    }
}

MeshScene apply_blendshapes(const MeshScene& mesh, std::span<const double> c) {
    if (c.size() != mesh.blendshapes.size()) {
        throw InvalidInput("apply_blendshapes: " + std::to_string(c.size()) + " coefficients for " +
                           std::to_string(mesh.blendshapes.size()) + " shapes");
    }
    MeshScene out = mesh;
    for (std::size_t k = 0; k < c.size(); ++k) {
        if (c[k] == 0.0) continue;
        for (std::size_t i = 0; i < out.vertices.size(); ++i) out.vertices[i] += mesh.blendshapes[k][i] * c[k];
    }
    out.normals = compute_vertex_normals(out.vertices, out.triangles);
    return out;
}

std::vector<std::vector<double>> load_coefficient_sequence(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open coefficient file: " + path.string());
    try {
        nlohmann::json j;
        in >> j;
        return j.get<std::vector<std::vector<double>>>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError("coefficient file must be a JSON array of arrays: " + path.string() + ": " + e.what());
    }
}

RasterOutput rasterize_normals(const MeshScene& mesh, int width, int height) {
    if (width <= 0 || height <= 0) throw InvalidInput("rasterize_normals: invalid resolution");
    const Camera& cam = mesh.camera;
    const Vec3 forward = normalize(cam.target - cam.position);
    const Vec3 right = normalize(cross(forward, cam.up));
    const Vec3 up = cross(right, forward);
    const double aspect = static_cast<double>(width) / height;
    const bool ortho = cam.projection == Camera::Projection::Orthographic;
    const double tan_half = std::tan(0.5 * cam.fov_y_degrees * std::numbers::pi / 180.0);

    struct Projected {
        double sx, sy;   // pixel coordinates (x right, y down)
        double depth;    // distance along the view direction
        bool valid;
    };
    std::vector<Projected> proj(mesh.vertices.size());
    for (std::size_t i = 0; i < proj.size(); ++i) {
        const Vec3 rel = mesh.vertices[i] - cam.position;
        const double cx = dot(rel, right), cy = dot(rel, up), depth = dot(rel, forward);
        double nx = 0.0, ny = 0.0;
        if (ortho) {
            nx = cx / (cam.ortho_half_height * aspect);
            ny = cy / cam.ortho_half_height;
        } else {
            nx = cx / (depth * tan_half * aspect);
            ny = cy / (depth * tan_half);
        }
        proj[i] = {0.5 * (nx + 1.0) * width, 0.5 * (1.0 - ny) * height, depth, ortho || depth > 1e-9};
    }

    std::vector<double> zbuf(static_cast<std::size_t>(width) * height, std::numeric_limits<double>::infinity());
    std::vector<Vec3> nbuf(zbuf.size(), Vec3{0.0, 0.0, 1.0});
    std::vector<double> cover(zbuf.size(), 0.0);

    for (const auto& tri : mesh.triangles) {
        const Projected& a = proj[static_cast<std::size_t>(tri[0])];
        const Projected& b = proj[static_cast<std::size_t>(tri[1])];
        const Projected& c = proj[static_cast<std::size_t>(tri[2])];
        if (!a.valid || !b.valid || !c.valid) continue;
        // Signed area with y pointing up: positive for counter-clockwise (front) faces.
        const double area = -((b.sx - a.sx) * (c.sy - a.sy) - (b.sy - a.sy) * (c.sx - a.sx));
        if (!(area > 0.0)) continue;
        const int x0 = std::max(0, static_cast<int>(std::floor(std::min({a.sx, b.sx, c.sx}))));
        const int x1 = std::min(width - 1, static_cast<int>(std::ceil(std::max({a.sx, b.sx, c.sx}))));
        const int y0 = std::max(0, static_cast<int>(std::floor(std::min({a.sy, b.sy, c.sy}))));
        const int y1 = std::min(height - 1, static_cast<int>(std::ceil(std::max({a.sy, b.sy, c.sy}))));
        auto edge = [](const Projected& p, const Projected& q, double x, double y) {
            return -((q.sx - p.sx) * (y - p.sy) - (q.sy - p.sy) * (x - p.sx));
        };
        const Vec3& na = mesh.normals[static_cast<std::size_t>(tri[0])];
        const Vec3& nb = mesh.normals[static_cast<std::size_t>(tri[1])];
        const Vec3& nc = mesh.normals[static_cast<std::size_t>(tri[2])];
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const double px = x + 0.5, py = y + 0.5;
                double wa = edge(b, c, px, py), wb = edge(c, a, px, py), wc = edge(a, b, px, py);
                if (wa < 0.0 || wb < 0.0 || wc < 0.0) continue;
                wa /= area;
                wb /= area;
                wc /= area;
                double depth = 0.0;
                if (ortho) {
                    depth = wa * a.depth + wb * b.depth + wc * c.depth;
                } else {
                    const double inv = wa / a.depth + wb / b.depth + wc / c.depth;
                    depth = 1.0 / inv;
                    wa = wa / a.depth * depth;
                    wb = wb / b.depth * depth;
                    wc = wc / c.depth * depth;
                }
                const std::size_t p = static_cast<std::size_t>(y) * width + x;
                if (!(depth < zbuf[p])) continue;
                zbuf[p] = depth;
                const Vec3 world = na * wa + nb * wb + nc * wc;
                Vec3 n{dot(world, right), dot(world, up), -dot(world, forward)};
                n = normalize(n);
                // Interpolated normals can tip past the silhouette; fold them onto it.
                if (n.z < 1e-4) n = normalize(Vec3{n.x, n.y, 0.0}) * std::sqrt(1.0 - 1e-8) + Vec3{0.0, 0.0, 1e-4};
                nbuf[p] = normalize(n);
                cover[p] = 1.0;
            }
        }
    }
    Mask mask(width, height, std::move(cover));
    return {NormalMap(width, height, std::move(nbuf), mask), mask};
}

MeshScene make_icosphere(int subdivisions, double radius) {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                           {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    for (Vec3& p : v) p = normalize(p);
    std::vector<std::array<int, 3>> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                         {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                         {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                         {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            if (auto it = midpoint.find(key); it != midpoint.end()) return it->second;
            v.push_back(normalize(v[static_cast<std::size_t>(a)] + v[static_cast<std::size_t>(b)]));
            const int id = static_cast<int>(v.size()) - 1;
            midpoint.emplace(key, id);
            return id;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(f.size() * 4);
        for (const auto& tri : f) {
            const int ab = mid(tri[0], tri[1]), bc = mid(tri[1], tri[2]), ca = mid(tri[2], tri[0]);
            next.push_back({tri[0], ab, ca});
            next.push_back({tri[1], bc, ab});
            next.push_back({tri[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        f = std::move(next);
    }
    MeshScene mesh;
    mesh.vertices.reserve(v.size());
    for (const Vec3& p : v) mesh.vertices.push_back(p * radius);
    mesh.triangles = std::move(f);
    mesh.normals = compute_vertex_normals(mesh.vertices, mesh.triangles);
    mesh.camera = fit_orthographic_camera(mesh.vertices);
    return mesh;
}

}  // namespace relit
