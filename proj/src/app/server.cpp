#include <httplib.h>

#include <nlohmann/json.hpp>

#include "relit/app.hpp"
#include "relit/error.hpp"
#include "relit/image_io.hpp"
#include "relit/serialize.hpp"
#include "relit/shading.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace relit::app {

namespace {

HttpResponse json_response(int status, const json& body) { return {status, "application/json", body.dump()}; }

HttpResponse error_response(int status, const std::string& message) {
    return json_response(status, json{{"error", message}, {"status", status}});
}

HttpResponse png_response(const std::vector<std::uint8_t>& bytes) {
    return {200, "image/png", std::string(bytes.begin(), bytes.end())};
}

std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> parts;
    std::size_t i = 0;
    while (i < path.size()) {
        const std::size_t j = path.find('/', i);
        const std::size_t end = j == std::string::npos ? path.size() : j;
        if (end > i) parts.push_back(path.substr(i, end - i));
        i = end + 1;
    }
    return parts;
}

ImageBuffer scaled(ImageBuffer img, double k) {
    for (double& v : img.data()) v *= k;
    return img;
}

}  // namespace

const std::vector<std::string>& map_names() {
    static const std::vector<std::string> names = {"albedo", "normal", "shading", "specular",
                                                   "cspec", "reconstruction", "nhat", "mask"};
    return names;
}

// Radiometric maps are sRGB-encoded for display; normals keep their (n + 1) / 2
// encoding, Cspec in [0, 2] is halved and the mask is written as is.
std::optional<std::vector<std::uint8_t>> map_preview_png(const DecompositionSet& d, const std::string& name) {
    if (name == "albedo") return encode_png(d.albedo, Transfer::Srgb);
    if (name == "normal") return encode_png(d.normal.to_image(true), Transfer::Linear);
    if (name == "shading") return encode_png(d.shading, Transfer::Srgb);
    if (name == "specular") return encode_png(d.specular, Transfer::Srgb);
    if (name == "cspec") return encode_png(scaled(d.cspec, 0.5), Transfer::Linear);
    if (name == "reconstruction") return encode_png(d.reconstruction(), Transfer::Srgb);
    if (name == "nhat" && d.nhat.width() > 0) return encode_png(d.nhat.to_image(true), Transfer::Linear);
    if (name == "mask") return encode_png(d.mask.to_image(), Transfer::Linear);
    return std::nullopt;
}

DecompositionStore::DecompositionStore(const std::vector<fs::path>& dirs) {
    for (const fs::path& dir : dirs) {
        std::string id = dir.filename().string();
        if (id.empty()) id = dir.parent_path().filename().string();
        if (sets_.count(id)) throw InvalidInput("duplicate decomposition id \"" + id + "\"");
        sets_.emplace(id, std::make_shared<const DecompositionSet>(load_decomposition(dir)));
    }
}

const DecompositionSet* DecompositionStore::find(const std::string& id) const {
    const auto it = sets_.find(id);
    return it == sets_.end() ? nullptr : it->second.get();
}

std::vector<std::string> DecompositionStore::ids() const {
    std::vector<std::string> out;
    for (const auto& [id, _] : sets_) out.push_back(id);
    return out;
}

struct Service::Server {
    httplib::Server http;
};

Service::Service(std::shared_ptr<const DecompositionStore> store) : store_(std::move(store)) {
    if (!store_) throw InvalidInput("service needs a decomposition store");
}

HttpResponse Service::handle(const std::string& method, const std::string& path, const std::string& body) const {
    try {
        const std::vector<std::string> p = split_path(path);
        const bool get = method == "GET", post = method == "POST";

        if (p.size() == 1 && p[0] == "healthz") {
            if (!get) return error_response(405, "method not allowed");
            return json_response(200, json{{"status", "ok"}});
        }
        if (p.size() < 2 || p[0] != "api" || p[1] != "decompositions") return error_response(404, "not found: " + path);

        if (p.size() == 2) {
            if (!get) return error_response(405, "method not allowed");
            json list = json::array();
            for (const std::string& id : store_->ids()) {
                const DecompositionSet& d = *store_->find(id);
                json maps = json::array();
                for (const std::string& m : map_names())
                    if (m != "nhat" || d.nhat.width() > 0) maps.push_back(m);
                list.push_back({{"id", id},
                                {"width", d.normal.width()},
                                {"height", d.normal.height()},
                                {"phong_s", d.phong_s},
                                {"maps", maps},
                                {"light", light_to_json(d.light)["sh"]}});
            }
            return json_response(200, json{{"decompositions", list}});
        }

        const DecompositionSet* d = store_->find(p[2]);
        if (!d) return error_response(404, "unknown decomposition \"" + p[2] + "\"");

        if (p.size() == 5 && p[3] == "maps") {
            if (!get) return error_response(405, "method not allowed");
            auto png = map_preview_png(*d, p[4]);
            if (!png) return error_response(404, "unknown map \"" + p[4] + "\"");
            return png_response(*png);
        }
        if (p.size() == 4 && p[3] == "relight") {
            if (!post) return error_response(405, "method not allowed");
            json req;
            try {
                req = json::parse(body);
            } catch (const json::parse_error& e) {
                return error_response(400, std::string("malformed JSON body: ") + e.what());
            }
            try {
                if (!req.is_object()) throw InvalidInput("relight body must be a JSON object");
                for (const auto& [k, _] : req.items())
                    if (k != "sh" && k != "direction" && k != "intensity" && k != "ambient" && k != "phong_s")
                        throw InvalidInput("unknown key \"" + k + "\"");
                std::optional<double> s;
                if (req.contains("phong_s")) {
                    if (!req["phong_s"].is_number() || !(req["phong_s"].get<double>() > 0.0))
                        throw InvalidInput("phong_s must be a positive number");
                    s = req["phong_s"].get<double>();
                }
                const ShLighting light = light_from_request(req);
                return png_response(relight_png(*d, light, s));
            } catch (const InvalidInput& e) {
                return error_response(400, e.what());
            }
        }
        return error_response(404, "not found: " + path);
    } catch (const std::exception& e) {
        return error_response(500, e.what());
    }
}

namespace {

void install_routes(httplib::Server& http, const Service& service) {
    auto forward = [&service](const httplib::Request& req, httplib::Response& res) {
        const HttpResponse r = service.handle(req.method, req.path, req.body);
        res.status = r.status;
        res.set_content(r.body, r.content_type);
    };
    http.Get(".*", forward);
    http.Post(".*", forward);
    http.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string msg = "internal error";
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            msg = e.what();
        } catch (...) {
        }
        const HttpResponse r = error_response(500, msg);
        res.status = r.status;
        res.set_content(r.body, r.content_type);
    });
}

}  // namespace

void Service::listen(const std::string& host, int port) {
    server_ = std::make_shared<Server>();
    install_routes(server_->http, *this);
    if (!server_->http.listen(host, port))
        throw IoError("cannot listen on " + host + ":" + std::to_string(port));
}

int Service::bind_any_port(const std::string& host) {
    server_ = std::make_shared<Server>();
    install_routes(server_->http, *this);
    const int port = server_->http.bind_to_any_port(host);
    if (port < 0) throw IoError("cannot bind " + host);
    return port;
}

void Service::listen_after_bind() {
    if (!server_) throw InvalidInput("bind_any_port must be called first");
    server_->http.listen_after_bind();
}

void Service::stop() {
    if (server_) server_->http.stop();
}

}  // namespace relit::app
