#include <fcntl.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>

#include "relit/app.hpp"
#include "relit/error.hpp"
#include "relit/geometry.hpp"
#include "relit/image_io.hpp"
#include "relit/inverse.hpp"
#include "relit/metrics.hpp"
#include "relit/serialize.hpp"
#include "relit/shading.hpp"
#include "relit/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace relit::app {

namespace {

void require_file(const fs::path& p) {
    if (!fs::is_regular_file(p)) throw IoError("input file not found: " + p.string());
}

bool is_png(const fs::path& p) {
    std::string ext = p.extension().string();
    for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return ext == ".png";
}

// Photographs in PNG are sRGB-encoded; float formats are already linear.
ImageBuffer load_photo(const fs::path& p) {
    require_file(p);
    return load_image(p, is_png(p) ? Transfer::Srgb : Transfer::Linear);
}

// PNG normal maps hold (n + 1) / 2; float maps hold raw components.
NormalMap load_normals(const fs::path& p, const Mask& mask) {
    require_file(p);
    return NormalMap::from_image(load_image(p), mask, is_png(p));
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot write " + p.string());
    out << text;
}

// Exclusive per-directory job lock, released on scope exit.
class DirectoryLock {
public:
    explicit DirectoryLock(const fs::path& dir) : path_(dir / ".relit.lock") {
        fs::create_directories(dir);
        const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0) throw IoError("output directory is locked by another job: " + path_.string());
        const std::string pid = std::to_string(::getpid()) + "\n";
        [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
        ::close(fd);
    }
    ~DirectoryLock() {
        std::error_code ec;
        fs::remove(path_, ec);
    }
    DirectoryLock(const DirectoryLock&) = delete;
    DirectoryLock& operator=(const DirectoryLock&) = delete;

private:
    fs::path path_;
};

json terms_json(const TermValues& t) {
    return {{"render", t.render}, {"delta_l1", t.delta_l1}, {"parsimony", t.parsimony}, {"smooth", t.smooth},
            {"consistent", t.consistent}};
}

struct DecomposeArgs {
    fs::path image, normal, mesh, mask, config, out;
    std::optional<std::uint64_t> seed;
};

int cmd_decompose(const DecomposeArgs& a) {
    const ImageBuffer image = load_photo(a.image);
    OptimizerConfig cfg;
    if (!a.config.empty()) {
        require_file(a.config);
        cfg = load_config(a.config);
    }
    if (a.seed) cfg.seed = *a.seed;

    std::optional<Mask> mask;
    if (!a.mask.empty()) {
        require_file(a.mask);
        mask = load_mask(a.mask);
        if (!mask->matches(image)) throw InvalidInput("mask size does not match the image");
    }
    NormalMap nhat;
    if (!a.mesh.empty()) {
        require_file(a.mesh);
        RasterOutput r = rasterize_normals(load_obj(a.mesh), image.width(), image.height());
        if (!mask) mask = r.mask;
        nhat = NormalMap(image.width(), image.height(), std::vector<Vec3>(r.normals.vectors().begin(), r.normals.vectors().end()), *mask);
    } else {
        if (!mask) mask = Mask(image.width(), image.height(), 1.0);
        nhat = load_normals(a.normal, *mask);
        if (nhat.width() != image.width() || nhat.height() != image.height())
            throw InvalidInput("normal map size does not match the image");
    }

    DirectoryLock lock(a.out);
    const DecompositionResult r = decompose(image, nhat, *mask, cfg);
    const MetricsReport m = compute_metrics(r.set.reconstruction(), image, *mask);
    json meta{{"seed", cfg.seed},
              {"stages", cfg.stages},
              {"config", config_to_json(cfg)},
              {"converged", r.converged},
              {"iterations", r.iterations},
              {"final_losses", terms_json(r.final_terms)},
              {"metrics", json::parse(m.to_json())}};
    save_decomposition(r.set, a.out, meta);
    write_text(a.out / "metrics.json", m.to_json() + "\n");
    std::cout << m.to_table();
    if (!r.converged) {
        std::cerr << "relit: decomposition did not converge within the stage budget; best-so-far written to "
                  << a.out.string() << "\n";
        return kExitNotConverged;
    }
    return kExitOk;
}

struct RelightArgs {
    fs::path decomposition, out, background;
    LightSource light;
    std::vector<double> direction;
    std::optional<double> phong_s;
};

int cmd_relight(RelightArgs a) {
    if (!a.direction.empty()) a.light.direction = Vec3{a.direction[0], a.direction[1], a.direction[2]};
    const ShLighting light = resolve_light(a.light);
    const DecompositionSet d = load_decomposition(a.decomposition);
    std::optional<ImageBuffer> background;
    if (!a.background.empty()) background = load_photo(a.background);
    const ImageBuffer img = relight_decomposition(d, light, a.phong_s, background);
    fs::path png = a.out, pfm = a.out;
    png.replace_extension(".png");
    pfm.replace_extension(".pfm");
    if (png.has_parent_path()) fs::create_directories(png.parent_path());
    const std::vector<std::uint8_t> bytes = encode_png(img, Transfer::Srgb);
    std::ofstream out(png, std::ios::binary);
    if (!out) throw IoError("cannot write " + png.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + png.string());
    save_image(img, pfm);
    return kExitOk;
}

struct EstimateArgs {
    fs::path image, albedo, normal, mask, out;
};

int cmd_estimate_light(const EstimateArgs& a) {
    const ImageBuffer image = load_photo(a.image);
    require_file(a.albedo);
    const ImageBuffer albedo = load_image(a.albedo, is_png(a.albedo) ? Transfer::Srgb : Transfer::Linear);
    Mask mask(image.width(), image.height(), 1.0);
    if (!a.mask.empty()) {
        require_file(a.mask);
        mask = load_mask(a.mask);
    }
    const NormalMap normals = load_normals(a.normal, mask);
    const ShLighting light = estimate_lighting_ls(image, albedo, normals, mask);
    if (a.out.empty()) {
        std::cout << light_to_json(light).dump(2) << "\n";
    } else {
        save_light(light, a.out);
    }
    return kExitOk;
}

struct SynthArgs {
    fs::path scene, out;
    std::optional<std::uint64_t> seed;
};

int cmd_render_synth(const SynthArgs& a) {
    require_file(a.scene);
    SyntheticScene scene = load_scene(a.scene);
    if (a.seed) scene.seed = *a.seed;
    const SyntheticBundle b = render_synthetic(scene);
    fs::create_directories(a.out);
    save_image(b.image, a.out / "image.pfm");
    save_image(b.image, a.out / "image.png", Transfer::Srgb);
    save_image(b.albedo, a.out / "albedo.pfm");
    save_image(b.cspec, a.out / "cspec.pfm");
    save_image(b.normal.to_image(false), a.out / "normal.pfm");
    save_image(b.normal.to_image(true), a.out / "normal.png");
    save_mask(b.mask, a.out / "mask.png");
    save_light(b.light, a.out / "light.json");
    write_text(a.out / "meta.json", json{{"seed", scene.seed}, {"phong_s", b.phong_s}}.dump(2) + "\n");
    return kExitOk;
}

struct MetricsArgs {
    fs::path reference, image, mask;
    bool json_out = false;
};

int cmd_metrics(const MetricsArgs& a) {
    require_file(a.reference);
    require_file(a.image);
    const ImageBuffer ref = load_image(a.reference);
    const ImageBuffer img = load_image(a.image);
    Mask mask(ref.width(), ref.height(), 1.0);
    if (!a.mask.empty()) {
        require_file(a.mask);
        mask = load_mask(a.mask);
    }
    const MetricsReport m = compute_metrics(img, ref, mask);
    std::cout << (a.json_out ? m.to_json() + "\n" : m.to_table());
    return kExitOk;
}

struct ServeArgs {
    std::vector<fs::path> dirs;
    std::string host = "127.0.0.1";
    int port = 8080;
};

// A directory holding meta.json is one decomposition; otherwise its
// subdirectories that do are.
std::vector<fs::path> expand_store_dirs(const std::vector<fs::path>& dirs) {
    std::vector<fs::path> out;
    for (const fs::path& d : dirs) {
        if (!fs::is_directory(d)) throw IoError("decomposition directory not found: " + d.string());
        if (fs::exists(d / "meta.json")) {
            out.push_back(d);
            continue;
        }
        std::vector<fs::path> sub;
        for (const auto& e : fs::directory_iterator(d))
            if (e.is_directory() && fs::exists(e.path() / "meta.json")) sub.push_back(e.path());
        std::sort(sub.begin(), sub.end());
        out.insert(out.end(), sub.begin(), sub.end());
    }
    return out;
}

int cmd_serve(const ServeArgs& a) {
    auto store = std::make_shared<const DecompositionStore>(expand_store_dirs(a.dirs));
    Service service(store);
    std::cerr << "relit: serving " << store->ids().size() << " decomposition(s) on http://" << a.host << ":"
              << a.port << "\n";
    service.listen(a.host, a.port);
    return kExitOk;
}

}  // namespace

ShLighting resolve_light(const LightSource& s) {
    const int given = (s.json ? 1 : 0) + (s.hdr ? 1 : 0) + (s.direction ? 1 : 0);
    if (given != 1) throw InvalidInput("give exactly one light source: --light, --hdr or --direction");
    if (s.json) {
        require_file(*s.json);
        return load_light(*s.json);
    }
    if (s.hdr) {
        require_file(*s.hdr);
        return project_env_to_sh(make_environment(load_image(*s.hdr)));
    }
    if (length(*s.direction) == 0.0) throw InvalidInput("direction must be nonzero");
    if (s.intensity < 0.0 || s.ambient < 0.0) throw InvalidInput("intensity and ambient must be nonnegative");
    return directional_light(*s.direction, s.intensity, s.ambient);
}

ImageBuffer relight_decomposition(const DecompositionSet& d, const ShLighting& light, std::optional<double> phong_s,
                                  const std::optional<ImageBuffer>& background) {
    const double s = phong_s.value_or(d.phong_s);
    return relight(d, light, PhongExponent(s), background, d.mask, d.specular_samples);
}

std::vector<std::uint8_t> relight_png(const DecompositionSet& d, const ShLighting& light,
                                      std::optional<double> phong_s, const std::optional<ImageBuffer>& background) {
    return encode_png(relight_decomposition(d, light, phong_s, background), Transfer::Srgb);
}

int run(int argc, const char* const* argv) {
    CLI::App app{"Reflectance decomposition and SH relighting"};
    app.name("relit");
    app.require_subcommand(1);

    DecomposeArgs dec;
    std::uint64_t dec_seed = 0;
    auto* c_dec = app.add_subcommand("decompose", "Recover albedo, normals, specular and lighting from one image");
    c_dec->add_option("--image", dec.image, "Input image (PNG is treated as sRGB, PFM/HDR as linear)")->required();
    auto* o_normal = c_dec->add_option("--normal", dec.normal, "Rough normal map (PNG encoded (n+1)/2, or raw PFM)");
    auto* o_mesh = c_dec->add_option("--mesh", dec.mesh, "Rough geometry as an OBJ mesh, rasterized orthographically");
    o_normal->excludes(o_mesh);
    c_dec->add_option("--mask", dec.mask, "Foreground mask PNG (default: mesh coverage or the full frame)");
    c_dec->add_option("--config", dec.config, "Optimizer config JSON");
    c_dec->add_option("--out", dec.out, "Output directory")->required();
    auto* o_dec_seed = c_dec->add_option("--seed", dec_seed, "Random seed, overrides the config");

    RelightArgs rel;
    std::string rel_light, rel_hdr;
    double rel_s = 0.0;
    auto* c_rel = app.add_subcommand("relight", "Render a stored decomposition under new lighting");
    c_rel->add_option("--decomposition", rel.decomposition, "Decomposition directory")->required();
    auto* o_light = c_rel->add_option("--light", rel_light, "SH light JSON {\"sh\": [[9],[9],[9]]}");
    auto* o_hdr = c_rel->add_option("--hdr", rel_hdr, "Equirectangular environment map (.hdr or .pfm)");
    auto* o_dir = c_rel->add_option("--direction", rel.direction, "Directional light x y z (camera space, y up)")
                      ->expected(3);
    c_rel->add_option("--intensity", rel.light.intensity, "Directional intensity (peak irradiance)")->needs(o_dir);
    c_rel->add_option("--ambient", rel.light.ambient, "Uniform ambient radiance")->needs(o_dir);
    o_light->excludes(o_hdr)->excludes(o_dir);
    o_hdr->excludes(o_dir);
    auto* o_s = c_rel->add_option("--phong-s", rel_s, "Blinn-Phong exponent (default: stored value)");
    c_rel->add_option("--background", rel.background, "Background image composited outside the mask");
    c_rel->add_option("--out", rel.out, "Output path; .png (sRGB) and .pfm (linear) are written")->required();

    EstimateArgs est;
    auto* c_est = app.add_subcommand("estimate-light", "Least-squares SH lighting from image, albedo and normals");
    c_est->add_option("--image", est.image, "Input image")->required();
    c_est->add_option("--albedo", est.albedo, "Albedo map")->required();
    c_est->add_option("--normal", est.normal, "Normal map")->required();
    c_est->add_option("--mask", est.mask, "Foreground mask PNG");
    c_est->add_option("--out", est.out, "Light JSON to write (default: standard output)");

    SynthArgs syn;
    std::uint64_t syn_seed = 0;
    auto* c_syn = app.add_subcommand("render-synth", "Render a synthetic ground-truth scene");
    c_syn->add_option("--scene", syn.scene, "Scene JSON")->required();
    c_syn->add_option("--out", syn.out, "Output directory")->required();
    auto* o_syn_seed = c_syn->add_option("--seed", syn_seed, "Random seed, overrides the scene");

    MetricsArgs met;
    auto* c_met = app.add_subcommand("metrics", "PSNR, SSIM and gradient PSNR between two images");
    c_met->add_option("--reference", met.reference, "Reference image")->required();
    c_met->add_option("--image", met.image, "Image under test")->required();
    c_met->add_option("--mask", met.mask, "Mask PNG");
    c_met->add_flag("--json", met.json_out, "Print JSON instead of a table");

    ServeArgs srv;
    auto* c_srv = app.add_subcommand("serve", "HTTP service for map previews and relighting");
    c_srv->add_option("--dir", srv.dirs, "Decomposition directory, or a parent of several")->required();
    c_srv->add_option("--host", srv.host, "Bind address");
    c_srv->add_option("--port", srv.port, "Port")->check(CLI::Range(1, 65535));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitError;
    }

    try {
        if (*c_dec) {
            if (dec.normal.empty() && dec.mesh.empty()) throw InvalidInput("decompose needs --normal or --mesh");
            if (o_dec_seed->count()) dec.seed = dec_seed;
            return cmd_decompose(dec);
        }
        if (*c_rel) {
            if (o_light->count()) rel.light.json = rel_light;
            if (o_hdr->count()) rel.light.hdr = rel_hdr;
            if (o_s->count()) {
                if (!(rel_s > 0.0)) throw InvalidInput("--phong-s must be positive");
                rel.phong_s = rel_s;
            }
            return cmd_relight(rel);
        }
        if (*c_est) return cmd_estimate_light(est);
        if (*c_syn) {
            if (o_syn_seed->count()) syn.seed = syn_seed;
            return cmd_render_synth(syn);
        }
        if (*c_met) return cmd_metrics(met);
        if (*c_srv) return cmd_serve(srv);
    } catch (const std::exception& e) {
        std::cerr << "relit: error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}

}  // namespace relit::app
