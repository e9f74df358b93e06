#include "relit/serialize.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "relit/error.hpp"
#include "relit/image_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace relit {

namespace {

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw InvalidInput(path.string() + ": " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

double number(const json& v, const char* what) {
    if (!v.is_number()) throw InvalidInput(std::string(what) + " must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw InvalidInput(std::string(what) + " must be finite");
    return d;
}

Rgb rgb(const json& v, const char* what) {
    if (v.is_number()) {
        const double g = number(v, what);
        return {g, g, g};
    }
    if (!v.is_array() || v.size() != 3) throw InvalidInput(std::string(what) + " must be a number or 3 numbers");
    return {number(v[0], what), number(v[1], what), number(v[2], what)};
}

Vec3 vec3(const json& v, const char* what) {
    if (!v.is_array() || v.size() != 3) throw InvalidInput(std::string(what) + " must hold 3 numbers");
    return {number(v[0], what), number(v[1], what), number(v[2], what)};
}

void reject_unknown(const json& doc, std::initializer_list<const char*> keys, const char* what) {
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, _] : doc.items())
        if (!allowed.count(k)) throw InvalidInput(std::string(what) + ": unknown key \"" + k + "\"");
}

}  // namespace

json light_to_json(const ShLighting& light) {
    json sh = json::array();
    for (const auto& ch : light.coeffs) sh.push_back(json(std::vector<double>(ch.begin(), ch.end())));
    return json{{"sh", sh}};
}

ShLighting light_from_json(const json& doc) {
    const char* msg = "light must hold \"sh\": 3 channels x 9 coefficients (27 numbers)";
    if (!doc.is_object() || !doc.contains("sh")) throw InvalidInput(msg);
    const json& sh = doc["sh"];
    if (!sh.is_array() || sh.size() != 3) throw InvalidInput(msg);
    ShLighting l;
    for (int c = 0; c < 3; ++c) {
        if (!sh[c].is_array() || sh[c].size() != kShCoeffCount) throw InvalidInput(msg);
        for (int k = 0; k < kShCoeffCount; ++k) l(c, k) = number(sh[c][k], "SH coefficient");
    }
    return l;
}

ShLighting load_light(const fs::path& path) { return light_from_json(read_json(path)); }

void save_light(const ShLighting& light, const fs::path& path) { write_text(path, light_to_json(light).dump(2) + "\n"); }

ShLighting light_from_request(const json& doc) {
    if (!doc.is_object()) throw InvalidInput("light request must be a JSON object");
    if (doc.contains("sh")) return light_from_json(doc);
    if (!doc.contains("direction")) throw InvalidInput("light request needs \"sh\" or \"direction\"");
    const Vec3 dir = vec3(doc["direction"], "direction");
    const double intensity = doc.contains("intensity") ? number(doc["intensity"], "intensity") : 1.0;
    const double ambient = doc.contains("ambient") ? number(doc["ambient"], "ambient") : 0.0;
    if (length(dir) == 0.0) throw InvalidInput("direction must be nonzero");
    if (intensity < 0.0 || ambient < 0.0) throw InvalidInput("intensity and ambient must be nonnegative");
    return directional_light(dir, intensity, ambient);
}

json config_to_json(const OptimizerConfig& c) {
    const LossWeights& w = c.weights;
    return json{{"weights",
                 {{"local_rgb", w.local_rgb},
                  {"blend_rgb", w.blend_rgb},
                  {"blend_per", w.blend_per},
                  {"render_rgb", w.render_rgb},
                  {"delta_n", w.delta_n},
                  {"consistent", w.consistent},
                  {"exp", w.exp},
                  {"parsimony", w.parsimony},
                  {"total_smooth", w.total_smooth}}},
                {"stages", c.stages},
                {"bins", c.bins},
                {"sigma_bins", c.sigma_bins},
                {"phong_s", c.phong_s},
                {"optimize_s", c.optimize_s},
                {"seed", c.seed},
                {"ics_seed_stride", c.ics_seed_stride},
                {"specular_samples", c.specular_samples},
                {"step", c.step},
                {"light_step", c.light_step}};
}

OptimizerConfig config_from_json(const json& doc) {
    if (!doc.is_object()) throw InvalidInput("optimizer config must be a JSON object");
    reject_unknown(doc,
                   {"weights", "stages", "bins", "sigma_bins", "phong_s", "optimize_s", "seed", "ics_seed_stride",
                    "specular_samples", "step", "light_step", "convergence_tolerance"},
                   "optimizer config");
    OptimizerConfig c;
    if (doc.contains("weights")) {
        const json& w = doc["weights"];
        if (!w.is_object()) throw InvalidInput("weights must be an object");
        reject_unknown(w,
                       {"local_rgb", "blend_rgb", "blend_per", "render_rgb", "delta_n", "consistent", "exp",
                        "parsimony", "total_smooth"},
                       "weights");
        auto get = [&](const char* k, double& dst) {
            if (w.contains(k)) dst = number(w[k], k);
        };
        LossWeights& lw = c.weights;
        get("local_rgb", lw.local_rgb);
        get("blend_rgb", lw.blend_rgb);
        get("blend_per", lw.blend_per);
        get("render_rgb", lw.render_rgb);
        get("delta_n", lw.delta_n);
        get("consistent", lw.consistent);
        get("exp", lw.exp);
        get("parsimony", lw.parsimony);
        get("total_smooth", lw.total_smooth);
        if (!lw.valid()) throw InvalidInput("weights must be finite and nonnegative");
    }
    if (doc.contains("stages")) {
        const json& s = doc["stages"];
        if (!s.is_array() || s.size() != 3) throw InvalidInput("stages must hold 3 iteration counts");
        for (int i = 0; i < 3; ++i) {
            if (!s[i].is_number_integer() || s[i].get<long long>() < 0)
                throw InvalidInput("stage iteration counts must be nonnegative integers");
            c.stages[i] = s[i].get<int>();
        }
    }
    auto get_int = [&](const char* k, int& dst, int lo) {
        if (!doc.contains(k)) return;
        if (!doc[k].is_number_integer() || doc[k].get<long long>() < lo)
            throw InvalidInput(std::string(k) + " must be an integer >= " + std::to_string(lo));
        dst = doc[k].get<int>();
    };
    auto get_u64 = [&](const char* k, std::uint64_t& dst) {
        if (!doc.contains(k)) return;
        if (!doc[k].is_number_unsigned()) throw InvalidInput(std::string(k) + " must be a nonnegative integer");
        dst = doc[k].get<std::uint64_t>();
    };
    auto get_pos = [&](const char* k, double& dst) {
        if (!doc.contains(k)) return;
        dst = number(doc[k], k);
        if (!(dst > 0.0)) throw InvalidInput(std::string(k) + " must be positive");
    };
    get_int("bins", c.bins, 2);
    get_pos("sigma_bins", c.sigma_bins);
    get_pos("phong_s", c.phong_s);
    if (doc.contains("optimize_s")) {
        if (!doc["optimize_s"].is_boolean()) throw InvalidInput("optimize_s must be a boolean");
        c.optimize_s = doc["optimize_s"].get<bool>();
    }
    get_u64("seed", c.seed);
    get_u64("ics_seed_stride", c.ics_seed_stride);
    get_int("specular_samples", c.specular_samples, 16);
    get_pos("step", c.step);
    get_pos("light_step", c.light_step);
    get_pos("convergence_tolerance", c.convergence_tolerance);
    return c;
}

OptimizerConfig load_config(const fs::path& path) { return config_from_json(read_json(path)); }

SyntheticScene scene_from_json(const json& doc, const fs::path& base_dir) {
    if (!doc.is_object()) throw InvalidInput("scene spec must be a JSON object");
    reject_unknown(doc, {"geometry", "albedo", "light", "phong_s", "cspec", "width", "height", "seed", "specular_samples"},
                   "scene");
    SyntheticScene s;
    if (doc.contains("geometry")) {
        const json& g = doc["geometry"];
        const std::string type = g.value("type", "sphere");
        if (type == "sphere") {
            s.geometry = SyntheticScene::Geometry::Sphere;
            if (g.contains("radius")) s.sphere_radius = number(g["radius"], "geometry.radius");
        } else if (type == "obj") {
            s.geometry = SyntheticScene::Geometry::Obj;
            if (!g.contains("path") || !g["path"].is_string()) throw InvalidInput("obj geometry needs a path");
            fs::path p = g["path"].get<std::string>();
            s.obj_path = p.is_relative() ? base_dir / p : p;
        } else {
            throw InvalidInput("unknown geometry type \"" + type + "\"");
        }
    }
    if (doc.contains("albedo")) {
        const json& a = doc["albedo"];
        const std::string pattern = a.value("pattern", "constant");
        if (pattern == "constant") s.albedo.kind = AlbedoPattern::Kind::Constant;
        else if (pattern == "two_tone") s.albedo.kind = AlbedoPattern::Kind::TwoTone;
        else if (pattern == "checker") s.albedo.kind = AlbedoPattern::Kind::Checker;
        else if (pattern == "correlated_stripe") s.albedo.kind = AlbedoPattern::Kind::CorrelatedStripe;
        else throw InvalidInput("unknown albedo pattern \"" + pattern + "\"");
        if (a.contains("a")) s.albedo.a = rgb(a["a"], "albedo.a");
        if (a.contains("b")) s.albedo.b = rgb(a["b"], "albedo.b");
        if (a.contains("band")) s.albedo.band = number(a["band"], "albedo.band");
        if (a.contains("cell")) s.albedo.cell = static_cast<int>(number(a["cell"], "albedo.cell"));
        if (a.contains("level")) s.albedo.level = number(a["level"], "albedo.level");
        if (a.contains("width")) s.albedo.width = number(a["width"], "albedo.width");
    }
    if (doc.contains("light")) {
        const json& l = doc["light"];
        if (l.is_object() && l.contains("random_seed")) {
            if (!l["random_seed"].is_number_unsigned()) throw InvalidInput("light.random_seed must be a nonnegative integer");
            s.light = sample_random_lighting(l["random_seed"].get<std::uint64_t>());
        } else {
            s.light = light_from_request(l);
        }
    }
    if (doc.contains("phong_s")) s.phong_s = number(doc["phong_s"], "phong_s");
    if (doc.contains("cspec")) s.cspec = number(doc["cspec"], "cspec");
    if (doc.contains("width")) s.width = static_cast<int>(number(doc["width"], "width"));
    if (doc.contains("height")) s.height = static_cast<int>(number(doc["height"], "height"));
    if (doc.contains("seed")) {
        if (!doc["seed"].is_number_unsigned()) throw InvalidInput("seed must be a nonnegative integer");
        s.seed = doc["seed"].get<std::uint64_t>();
    }
    if (doc.contains("specular_samples")) s.specular_samples = static_cast<int>(number(doc["specular_samples"], "specular_samples"));
    return s;
}

SyntheticScene load_scene(const fs::path& path) { return scene_from_json(read_json(path), path.parent_path()); }

void save_decomposition(const DecompositionSet& d, const fs::path& dir, const json& meta) {
    if (const std::string missing = d.missing_map(); !missing.empty())
        throw InvalidInput("decomposition is missing " + missing);
    fs::create_directories(dir);
    save_image(d.albedo, dir / "albedo.pfm");
    save_image(d.normal.to_image(false), dir / "normal.pfm");
    save_image(d.normal.to_image(true), dir / "normal.png");
    save_image(d.cspec, dir / "cspec.pfm");
    save_image(d.shading, dir / "sshad.pfm");
    save_image(d.specular, dir / "sspec.pfm");
    save_image(d.reconstruction(), dir / "reconstruction.pfm");
    if (d.nhat.width() == d.normal.width() && d.nhat.height() == d.normal.height())
        save_image(d.nhat.to_image(false), dir / "nhat.pfm");
    save_mask(d.mask, dir / "mask.png");
    save_light(d.light, dir / "light.json");
    json m = meta;
    m["phong_s"] = d.phong_s;
    m["specular_samples"] = d.specular_samples;
    m["width"] = d.normal.width();
    m["height"] = d.normal.height();
    write_text(dir / "meta.json", m.dump(2) + "\n");
}

DecompositionSet load_decomposition(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError("decomposition directory not found: " + dir.string());
    for (const char* f : {"albedo.pfm", "normal.pfm", "cspec.pfm", "light.json", "meta.json", "mask.png"})
        if (!fs::exists(dir / f)) throw IoError("decomposition is missing " + (dir / f).string());
    DecompositionSet d;
    const json meta = read_json(dir / "meta.json");
    d.phong_s = meta.contains("phong_s") ? number(meta["phong_s"], "phong_s") : 32.0;
    if (meta.contains("specular_samples")) d.specular_samples = static_cast<int>(number(meta["specular_samples"], "specular_samples"));
    d.mask = load_mask(dir / "mask.png");
    d.albedo = load_image(dir / "albedo.pfm");
    d.normal = NormalMap::from_image(load_image(dir / "normal.pfm"), d.mask, false);
    if (fs::exists(dir / "nhat.pfm")) d.nhat = NormalMap::from_image(load_image(dir / "nhat.pfm"), d.mask, false);
    d.cspec = load_image(dir / "cspec.pfm");
    if (d.cspec.channels() != 1) throw InvalidInput("cspec.pfm must be single-channel");
    d.light = load_light(dir / "light.json");
    d.delta = ImageBuffer(d.normal.width(), d.normal.height(), 3);
    d.shading = fs::exists(dir / "sshad.pfm") ? load_image(dir / "sshad.pfm") : shading_map(d.normal, d.light);
    d.specular = fs::exists(dir / "sspec.pfm")
                     ? load_image(dir / "sspec.pfm")
                     : specular_map(d.normal, d.light, PhongExponent(d.phong_s), d.specular_samples);
    if (const std::string missing = d.missing_map(); !missing.empty())
        throw InvalidInput("decomposition in " + dir.string() + " has an inconsistent " + missing + " map");
    return d;
}

}  // namespace relit
