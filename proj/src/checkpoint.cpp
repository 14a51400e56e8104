#include "tpsnet/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace tpsnet {

using nlohmann::json;

namespace {
constexpr char kMagic[8] = {'T', 'P', 'S', 'C', 'K', 'P', 'T', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::istream& in) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}
}  // namespace

const Eigen::MatrixXd& Checkpoint::blob(const std::string& name) const {
    for (const auto& [n, m] : blobs)
        if (n == name) return m;
    throw std::out_of_range("checkpoint has no blob named: " + name);
}

bool Checkpoint::has_blob(const std::string& name) const {
    for (const auto& [n, m] : blobs)
        if (n == name) return true;
    return false;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    json manifest;
    manifest["format_version"] = ckpt.format_version;
    manifest["config"] = ckpt.config.to_json();
    manifest["rng_state"] = ckpt.rng_state;
    json blob_list = json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, m] : ckpt.blobs) {
        blob_list.push_back({{"name", name},
                             {"rows", m.rows()},
                             {"cols", m.cols()},
                             {"offset", offset}});
        offset += static_cast<std::uint64_t>(m.size()) * sizeof(double);
    }
    manifest["blobs"] = blob_list;
    std::string mstr = manifest.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out.write(kMagic, 8);
    write_u64(out, mstr.size());
    out.write(mstr.data(), static_cast<std::streamsize>(mstr.size()));
    for (const auto& [name, m] : ckpt.blobs)
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                double v = m(i, j);
                std::uint64_t bits;
                std::memcpy(&bits, &v, 8);
                write_u64(out, bits);
            }
    if (!out) throw std::runtime_error("short write saving checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);
    std::uint64_t mlen = read_u64(in);
    std::string mstr(mlen, '\0');
    in.read(mstr.data(), static_cast<std::streamsize>(mlen));
    if (!in) throw std::runtime_error("truncated checkpoint manifest: " + path);
    json manifest = json::parse(mstr);

    Checkpoint ckpt;
    ckpt.format_version = manifest.at("format_version").get<int>();
    if (ckpt.format_version != 1)
        throw std::runtime_error("unsupported checkpoint format version");
    ckpt.config = RunConfig::from_json(manifest.at("config"));
    ckpt.rng_state = manifest.at("rng_state").get<std::string>();
    for (const auto& b : manifest.at("blobs")) {
        Eigen::MatrixXd m(b.at("rows").get<Eigen::Index>(), b.at("cols").get<Eigen::Index>());
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                std::uint64_t bits = read_u64(in);
                double v;
                std::memcpy(&v, &bits, 8);
                m(i, j) = v;
            }
        ckpt.blobs.emplace_back(b.at("name").get<std::string>(), std::move(m));
    }
    if (!in) throw std::runtime_error("truncated checkpoint blobs: " + path);
    return ckpt;
}

}  // namespace tpsnet
