#include "qfs/manifest.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "qfs/errors.hpp"

namespace qfs {

namespace fs = std::filesystem;
using nlohmann::json;

json to_json(const RunManifest& m) {
    return json{{"command", m.command},   {"config", m.config},           {"inputs", m.inputs},
                {"outputs", m.outputs},   {"seed", m.seed},               {"started_at", m.started_at},
                {"finished_at", m.finished_at}, {"checksums", m.checksums}};
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string() + " for checksum");
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return os.str();
}

void write_manifest(const fs::path& path, RunManifest manifest) {
    const fs::path base = path.parent_path().empty() ? fs::path(".") : path.parent_path();
    const fs::path self = fs::weakly_canonical(path);
    auto add = [&](const fs::path& file) {
        if (fs::weakly_canonical(file) == self) return;
        std::error_code ec;
        fs::path key = fs::relative(file, base, ec);
        if (ec || key.empty() || key.native().starts_with("..")) key = file;
        manifest.checksums[key.generic_string()] = sha256_file(file);
    };
    for (const auto& out : manifest.outputs) {
        const fs::path p(out);
        if (fs::is_directory(p)) {
            for (const auto& entry : fs::recursive_directory_iterator(p)) {
                if (entry.is_regular_file()) add(entry.path());
            }
        } else if (fs::exists(p)) {
            add(p);
        }
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write manifest " + path.string());
    out << to_json(manifest).dump(2) << '\n';
}

}  // namespace qfs
