#include "latpoison/io/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <fmt/format.h>

namespace latpoison::io {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
}

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
}

class Reader {
  public:
    explicit Reader(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}

    const unsigned char* take(std::size_t n, const char* what) {
        if (bytes_.size() - pos_ < n) {
            throw CheckpointError(CheckpointErrorKind::truncated,
                                  std::string("checkpoint truncated while reading ") + what);
        }
        const auto* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }

    std::uint64_t uint(std::size_t width, const char* what) {
        const auto* p = take(width, what);
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < width; ++i) {
            v |= std::uint64_t{p[i]} << (8 * i);
        }
        return v;
    }

    bool done() const { return pos_ == bytes_.size(); }

  private:
    const std::vector<unsigned char>& bytes_;
    std::size_t pos_ = 0;
};

std::string descriptor_text(const Checkpoint& c) {
    std::string text = c.arch_descriptor + "\n";
    for (const auto& [k, v] : c.config) {
        text += k + " = " + v + "\n";
    }
    return text;
}

void parse_descriptor(const std::string& text, Checkpoint& c) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) {
        throw CheckpointError(CheckpointErrorKind::malformed, "checkpoint descriptor is empty");
    }
    c.arch_descriptor = line;
    while (std::getline(in, line)) {
        const auto eq = line.find(" = ");
        if (eq == std::string::npos) {
            throw CheckpointError(CheckpointErrorKind::malformed,
                                  "checkpoint descriptor line '" + line + "' is not key = value");
        }
        c.config.emplace_back(line.substr(0, eq), line.substr(eq + 3));
    }
}

void require_kind(const Checkpoint& c, ArtifactKind expected) {
    if (c.kind != expected) {
        throw CheckpointError(CheckpointErrorKind::kind_mismatch,
                              "checkpoint holds a " + to_string(c.kind) + ", expected a " +
                                  to_string(expected));
    }
}

void append_values(std::vector<double>& out, const std::vector<ad::Tensor>& params) {
    for (const auto& p : params) {
        out.insert(out.end(), p.values().begin(), p.values().end());
    }
}

void fill_values(std::vector<ad::Tensor> params, const std::vector<double>& payload) {
    std::size_t expected = 0;
    for (const auto& p : params) {
        expected += p.size();
    }
    if (expected != payload.size()) {
        throw CheckpointError(CheckpointErrorKind::malformed,
                              fmt::format("checkpoint payload has {} values, architecture needs {}",
                                          payload.size(), expected));
    }
    std::size_t offset = 0;
    for (auto& p : params) {
        auto dst = p.mutable_values();
        std::copy_n(payload.begin() + static_cast<std::ptrdiff_t>(offset), dst.size(), dst.begin());
        offset += dst.size();
    }
}

std::string field(const std::string& descriptor, const std::string& key) {
    std::istringstream in(descriptor);
    std::string item;
    while (std::getline(in, item, ';')) {
        if (item.rfind(key + "=", 0) == 0) {
            return item.substr(key.size() + 1);
        }
    }
    throw CheckpointError(CheckpointErrorKind::malformed,
                          "perturbation descriptor missing '" + key + "'");
}

}  // namespace

std::string to_string(ArtifactKind kind) {
    switch (kind) {
        case ArtifactKind::vae:
            return "vae";
        case ArtifactKind::classifier:
            return "classifier";
        case ArtifactKind::perturbation:
            return "perturbation";
    }
    return "unknown";
}

std::uint64_t fnv1a64(const std::vector<unsigned char>& bytes) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char b : bytes) {
        hash ^= b;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::vector<unsigned char> encode_checkpoint(const Checkpoint& checkpoint) {
    std::vector<unsigned char> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
    out.push_back(static_cast<unsigned char>(checkpoint.kind));
    const auto text = descriptor_text(checkpoint);
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    std::vector<unsigned char> payload(checkpoint.payload.size() * sizeof(double));
    if (!payload.empty()) {
        std::memcpy(payload.data(), checkpoint.payload.data(), payload.size());
    }
    put_u64(out, payload.size());
    out.insert(out.end(), payload.begin(), payload.end());
    put_u64(out, fnv1a64(payload));
    return out;
}

Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes) {
    Reader r(bytes);
    const auto* magic = r.take(4, "magic");
    if (std::memcmp(magic, kCheckpointMagic, 3) != 0) {
        throw CheckpointError(CheckpointErrorKind::bad_magic, "not a checkpoint (bad magic)");
    }
    if (magic[3] != static_cast<unsigned char>(kCheckpointMagic[3])) {
        throw CheckpointError(CheckpointErrorKind::version_mismatch,
                              fmt::format("checkpoint format version '{}' is not supported (expected {})",
                                          static_cast<char>(magic[3]), kCheckpointVersion));
    }
    Checkpoint c;
    const auto kind = r.uint(1, "kind");
    if (kind < 1 || kind > 3) {
        throw CheckpointError(CheckpointErrorKind::malformed,
                              fmt::format("unknown checkpoint kind byte {}", kind));
    }
    c.kind = static_cast<ArtifactKind>(kind);
    const auto text_len = r.uint(4, "descriptor length");
    const auto* text = r.take(text_len, "descriptor");
    parse_descriptor(std::string(reinterpret_cast<const char*>(text), text_len), c);
    const auto payload_len = r.uint(8, "payload length");
    if (payload_len % sizeof(double) != 0) {
        throw CheckpointError(CheckpointErrorKind::malformed,
                              "checkpoint payload length is not a multiple of 8");
    }
    const auto* payload = r.take(payload_len, "payload");
    const std::vector<unsigned char> payload_bytes(payload, payload + payload_len);
    const auto stored_hash = r.uint(8, "hash");
    if (stored_hash != fnv1a64(payload_bytes)) {
        throw CheckpointError(CheckpointErrorKind::hash_mismatch,
                              "checkpoint payload hash mismatch (file corrupted)");
    }
    if (!r.done()) {
        throw CheckpointError(CheckpointErrorKind::malformed, "trailing bytes after checkpoint");
    }
    c.payload.resize(payload_len / sizeof(double));
    if (payload_len > 0) {
        std::memcpy(c.payload.data(), payload_bytes.data(), payload_len);
    }
    return c;
}

void write_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
    const auto bytes = encode_checkpoint(checkpoint);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw CheckpointError(CheckpointErrorKind::io, "cannot write '" + path.string() + "'");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw CheckpointError(CheckpointErrorKind::io, "write failed for '" + path.string() + "'");
    }
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw CheckpointError(CheckpointErrorKind::io, "cannot open '" + path.string() + "'");
    }
    const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in),
                                           std::istreambuf_iterator<char>()};
    return decode_checkpoint(bytes);
}

Checkpoint to_checkpoint(const models::VaeParams& vae, ConfigEcho config) {
    Checkpoint c;
    c.kind = ArtifactKind::vae;
    c.arch_descriptor = vae.arch_descriptor() + ";init=" + models::kInitScheme;
    c.config = std::move(config);
    append_values(c.payload, vae.parameters());
    return c;
}

Checkpoint to_checkpoint(const models::ClassifierParams& classifier, ConfigEcho config) {
    Checkpoint c;
    c.kind = ArtifactKind::classifier;
    c.arch_descriptor = classifier.arch_descriptor() + ";init=" + models::kInitScheme;
    c.config = std::move(config);
    append_values(c.payload, classifier.parameters());
    return c;
}

Checkpoint to_checkpoint(const attack::Perturbation& perturbation, ConfigEcho config) {
    perturbation.validate();
    Checkpoint c;
    c.kind = ArtifactKind::perturbation;
    c.arch_descriptor = fmt::format("latent={};vectors={};norm={};family={};lambda={};mode={}",
                                    perturbation.latent_dim(), perturbation.two_vectors() ? 2 : 1,
                                    attack::to_string(perturbation.norm),
                                    attack::to_string(perturbation.family), perturbation.lambda,
                                    attack::to_string(perturbation.provenance));
    c.config = std::move(config);
    c.payload = perturbation.delta_z;
    c.payload.insert(c.payload.end(), perturbation.reverse_delta_z.begin(),
                     perturbation.reverse_delta_z.end());
    return c;
}

models::VaeParams vae_from(const Checkpoint& checkpoint) {
    require_kind(checkpoint, ArtifactKind::vae);
    models::VaeParams vae;
    try {
        vae = models::VaeParams::from_arch_descriptor(checkpoint.arch_descriptor);
    } catch (const std::invalid_argument& e) {
        throw CheckpointError(CheckpointErrorKind::malformed, e.what());
    }
    fill_values(vae.parameters(), checkpoint.payload);
    return vae;
}

models::ClassifierParams classifier_from(const Checkpoint& checkpoint) {
    require_kind(checkpoint, ArtifactKind::classifier);
    models::ClassifierParams clf;
    try {
        clf = models::ClassifierParams::from_arch_descriptor(checkpoint.arch_descriptor);
    } catch (const std::invalid_argument& e) {
        throw CheckpointError(CheckpointErrorKind::malformed, e.what());
    }
    fill_values(clf.parameters(), checkpoint.payload);
    return clf;
}

attack::Perturbation perturbation_from(const Checkpoint& checkpoint) {
    require_kind(checkpoint, ArtifactKind::perturbation);
    const auto& d = checkpoint.arch_descriptor;
    attack::Perturbation p;
    try {
        const std::size_t latent = std::stoull(field(d, "latent"));
        const std::size_t vectors = std::stoull(field(d, "vectors"));
        if (vectors < 1 || vectors > 2 || checkpoint.payload.size() != latent * vectors) {
            throw CheckpointError(CheckpointErrorKind::malformed,
                                  "perturbation payload size does not match its descriptor");
        }
        p.norm = attack::parse_norm(field(d, "norm"));
        p.family = attack::parse_family(field(d, "family"));
        p.lambda = std::stod(field(d, "lambda"));
        p.provenance = attack::parse_mode(field(d, "mode"));
        const auto mid = checkpoint.payload.begin() + static_cast<std::ptrdiff_t>(latent);
        p.delta_z.assign(checkpoint.payload.begin(), mid);
        p.reverse_delta_z.assign(mid, checkpoint.payload.end());
    } catch (const CheckpointError&) {
        throw;
    } catch (const std::exception& e) {
        throw CheckpointError(CheckpointErrorKind::malformed,
                              std::string("bad perturbation descriptor: ") + e.what());
    }
    return p;
}

models::VaeParams load_vae(const std::filesystem::path& path) {
    return vae_from(read_checkpoint(path));
}

models::ClassifierParams load_classifier(const std::filesystem::path& path) {
    return classifier_from(read_checkpoint(path));
}

attack::Perturbation load_perturbation(const std::filesystem::path& path) {
    return perturbation_from(read_checkpoint(path));
}

}  // namespace latpoison::io
