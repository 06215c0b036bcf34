#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "latpoison/attack/perturbation.hpp"
#include "latpoison/models/networks.hpp"

namespace latpoison::io {

// Binary layout, integers little-endian:
//   "LPZ1" | kind (1 byte) | descriptor length (u32) | descriptor bytes |
//   payload length in bytes (u64) | payload (f64 little-endian) | FNV-1a 64 of payload (u64)
// The descriptor is text: the arch descriptor on the first line, then
// "key = value" lines echoing the configuration that produced the artifact.
inline constexpr char kCheckpointMagic[4] = {'L', 'P', 'Z', '1'};
inline constexpr int kCheckpointVersion = 1;

enum class ArtifactKind : std::uint8_t { vae = 1, classifier = 2, perturbation = 3 };

std::string to_string(ArtifactKind kind);

enum class CheckpointErrorKind { io, bad_magic, version_mismatch, kind_mismatch, truncated,
                                 hash_mismatch, malformed };

class CheckpointError : public std::runtime_error {
  public:
    CheckpointError(CheckpointErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}
    CheckpointErrorKind kind() const { return kind_; }

  private:
    CheckpointErrorKind kind_;
};

using ConfigEcho = std::vector<std::pair<std::string, std::string>>;

struct Checkpoint {
    ArtifactKind kind = ArtifactKind::vae;
    std::string arch_descriptor;
    ConfigEcho config;
    std::vector<double> payload;
};

std::uint64_t fnv1a64(const std::vector<unsigned char>& bytes);

std::vector<unsigned char> encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes);

void write_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

Checkpoint to_checkpoint(const models::VaeParams& vae, ConfigEcho config = {});
Checkpoint to_checkpoint(const models::ClassifierParams& classifier, ConfigEcho config = {});
Checkpoint to_checkpoint(const attack::Perturbation& perturbation, ConfigEcho config = {});

// Each throws kind_mismatch when the checkpoint holds another artifact.
models::VaeParams vae_from(const Checkpoint& checkpoint);
models::ClassifierParams classifier_from(const Checkpoint& checkpoint);
attack::Perturbation perturbation_from(const Checkpoint& checkpoint);

template <class Artifact>
void save_checkpoint(const Artifact& artifact, const std::filesystem::path& path,
                     ConfigEcho config = {}) {
    write_checkpoint(to_checkpoint(artifact, std::move(config)), path);
}

models::VaeParams load_vae(const std::filesystem::path& path);
models::ClassifierParams load_classifier(const std::filesystem::path& path);
attack::Perturbation load_perturbation(const std::filesystem::path& path);

}  // namespace latpoison::io
