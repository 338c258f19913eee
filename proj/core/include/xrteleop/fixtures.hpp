#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "xrteleop/kinematics.hpp"
#include "xrteleop/protocol.hpp"

namespace xrt {

/// Hand-built packets frozen as golden fixtures for other implementations
/// of the codec. The first is the all-null packet with an identity head.
std::vector<std::pair<std::string, TrackingPacket>> golden_packets();

/// Decoder fuzzing seeds: every golden packet plus malformed variants
/// (truncated, wrong arity, out-of-range values). Name -> bytes.
std::vector<std::pair<std::string, std::string>> fuzz_seeds();

/// Forward-kinematics reference values. For each chain: its description
/// document and `count` configurations drawn from a seeded generator, each
/// with the world pose (x, y, z, qx, qy, qz, qw) of every link.
nlohmann::json fk_corpus(const std::vector<std::pair<std::string, KinematicChain>>& chains, int count,
                         std::uint64_t seed);

/// Writes golden_*.json + golden_index.json, fuzz/ seeds + fuzz/index.json
/// and fk_corpus.json into `dir`, reading every *.urdf in `chains_dir`.
void write_fixtures(const std::string& dir, const std::string& chains_dir);

}  // namespace xrt
