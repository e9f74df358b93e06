#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "relit/image.hpp"
#include "relit/shading.hpp"
#include "relit/vec3.hpp"

namespace relit {

struct Camera {
    enum class Projection { Orthographic, Perspective };

    Projection projection = Projection::Orthographic;
    Vec3 position{0.0, 0.0, 5.0};
    Vec3 target{0.0, 0.0, 0.0};
    Vec3 up{0.0, 1.0, 0.0};
    double ortho_half_height = 1.0;  // world units covered by half the image height
    double fov_y_degrees = 30.0;
};

/// Triangle mesh with optional linear blendshapes and the camera it is seen through.
struct MeshScene {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<Vec3> normals;                    // per vertex, area-weighted
    std::vector<std::vector<Vec3>> blendshapes;   // per shape, per vertex delta
    Camera camera;

    std::size_t blendshape_count() const { return blendshapes.size(); }
};

/// Area-weighted average of adjacent face normals, normalized.
std::vector<Vec3> compute_vertex_normals(std::span<const Vec3> vertices,
                                         std::span<const std::array<int, 3>> triangles);

/// Parses Wavefront OBJ text; polygons are fan-triangulated. The camera is
/// fitted orthographically to the mesh bounds, looking down -z.
MeshScene parse_obj(std::istream& in, const std::string& name = "<stream>");
MeshScene load_obj(const std::filesystem::path& path);

/// Orthographic camera on +z centred on the mesh bounds, `margin` times the
/// larger half extent.
Camera fit_orthographic_camera(std::span<const Vec3> vertices, double margin = 1.1);

/// Reads {"shapes": ["a.obj", ...]} (paths relative to the manifest) and
/// stores per-vertex deltas against `base`.
void load_blendshapes(MeshScene& base, const std::filesystem::path& manifest);

/// vertices + sum_k c_k delta_k, normals recomputed.
MeshScene apply_blendshapes(const MeshScene& mesh, std::span<const double> coefficients);

/// JSON array of per-frame coefficient rows.
std::vector<std::vector<double>> load_coefficient_sequence(const std::filesystem::path& path);

struct RasterOutput {
    NormalMap normals;
    Mask mask;
};

/// Z-buffered rasterization of interpolated vertex normals in camera space
/// (x right, y up, z toward the camera). Back faces are culled; depth ties keep
/// the first triangle drawn.
RasterOutput rasterize_normals(const MeshScene& mesh, int width, int height);

/// Subdivided icosahedron projected to a sphere of the given radius at the origin.
MeshScene make_icosphere(int subdivisions, double radius = 1.0);

}  // namespace relit
