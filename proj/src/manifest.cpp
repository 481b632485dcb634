#include "ocs/manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <cerrno>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <memory>
#include <sstream>

#include "ocs/errors.hpp"

#ifndef OCS_VERSION
#define OCS_VERSION "0.0.0"
#endif

namespace ocs {

std::string_view tool_version() noexcept { return OCS_VERSION; }

std::string sha256_hex(std::string_view data) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1) {
        throw Error("SHA-256 computation failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xf];
    }
    return out;
}

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return sha256_hex(ss.str());
}

std::string manifest_timestamp() {
    std::time_t t = std::time(nullptr);
    if (const char* env = std::getenv("SOURCE_DATE_EPOCH")) {
        char* end = nullptr;
        errno = 0;
        const long long v = std::strtoll(env, &end, 10);
        if (end != env && *end == '\0' && errno == 0 && v >= 0) t = static_cast<std::time_t>(v);
    }
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

nlohmann::json manifest_to_json(const RunManifest& m) {
    nlohmann::json outs = nlohmann::json::array();
    for (const ManifestFile& f : m.outputs) {
        outs.push_back({{"role", f.role}, {"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
    }
    return {{"tool", "ocs"},
            {"tool_version", m.tool_version},
            {"command", m.command},
            {"config", m.config},
            {"seed", m.seed},
            {"created_utc", m.created_utc},
            {"outputs", outs}};
}

RunManifest manifest_from_json(const nlohmann::json& j) {
    RunManifest m;
    try {
        m.tool_version = j.at("tool_version").get<std::string>();
        m.command = j.at("command").get<std::string>();
        m.config = j.at("config");
        m.seed = j.at("seed").get<std::uint64_t>();
        m.created_utc = j.at("created_utc").get<std::string>();
        for (const auto& f : j.at("outputs")) {
            m.outputs.push_back({f.at("role").get<std::string>(), f.at("path").get<std::string>(),
                                 f.at("sha256").get<std::string>(), f.at("bytes").get<std::uint64_t>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed manifest: ") + e.what());
    }
    return m;
}

std::string sidecar_path(const std::string& output_path) { return output_path + ".manifest.json"; }

}  // namespace ocs
