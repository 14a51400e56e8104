#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "tpsnet/config.hpp"

namespace tpsnet {

// Single-file archive: magic, little-endian manifest length, JSON
// manifest, then raw little-endian float64 blobs in manifest order.
// Saving and loading round-trip bit-exactly.
struct Checkpoint {
    int format_version = 1;
    RunConfig config;
    std::string rng_state;
    std::vector<std::pair<std::string, Eigen::MatrixXd>> blobs;

    const Eigen::MatrixXd& blob(const std::string& name) const;
    bool has_blob(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace tpsnet
