#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "relit/decomposition.hpp"
#include "relit/sh.hpp"

namespace relit::app {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitNotConverged = 2;

/// Parses arguments and runs one subcommand. Errors are reported on stderr and
/// mapped to exit codes; nothing escapes as an exception.
int run(int argc, const char* const* argv);

/// Exactly one of the three light sources.
struct LightSource {
    std::optional<std::filesystem::path> json;
    std::optional<std::filesystem::path> hdr;
    std::optional<Vec3> direction;
    double intensity = 1.0;
    double ambient = 0.0;
};
ShLighting resolve_light(const LightSource& source);

/// The relight render shared by the CLI and the HTTP service. `phong_s`
/// overrides the stored exponent.
ImageBuffer relight_decomposition(const DecompositionSet& d, const ShLighting& light,
                                  std::optional<double> phong_s = std::nullopt,
                                  const std::optional<ImageBuffer>& background = std::nullopt);
/// sRGB-encoded 8-bit PNG of the relit render.
std::vector<std::uint8_t> relight_png(const DecompositionSet& d, const ShLighting& light,
                                      std::optional<double> phong_s = std::nullopt,
                                      const std::optional<ImageBuffer>& background = std::nullopt);

/// Names accepted by the map preview endpoint.
const std::vector<std::string>& map_names();
/// 8-bit PNG preview of one stored map; nullopt for an unknown name.
std::optional<std::vector<std::uint8_t>> map_preview_png(const DecompositionSet& d, const std::string& name);

/// Read-only set of decompositions keyed by directory name.
class DecompositionStore {
public:
    explicit DecompositionStore(const std::vector<std::filesystem::path>& dirs);
    const DecompositionSet* find(const std::string& id) const;
    std::vector<std::string> ids() const;

private:
    std::map<std::string, std::shared_ptr<const DecompositionSet>> sets_;
};

struct HttpResponse {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
};

/// Request routing without any socket, so the HTTP contract is testable in-process.
class Service {
public:
    explicit Service(std::shared_ptr<const DecompositionStore> store);
    HttpResponse handle(const std::string& method, const std::string& path, const std::string& body) const;
    /// Blocks serving on host:port until stop() is called from another thread.
    void listen(const std::string& host, int port);
    /// Binds to an ephemeral port and returns it; serve with listen_after_bind().
    int bind_any_port(const std::string& host);
    void listen_after_bind();
    void stop();

private:
    std::shared_ptr<const DecompositionStore> store_;
    struct Server;
    std::shared_ptr<Server> server_;
};

}  // namespace relit::app
