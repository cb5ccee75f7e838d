#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "xsched/a2c.hpp"

namespace xsched {

class CheckpointError : public std::runtime_error {
 public:
  enum class Reason { Io, Format, Version, CorruptLength };

  CheckpointError(Reason reason, const std::string& what) : std::runtime_error(what), reason_(reason) {}
  Reason reason() const { return reason_; }

 private:
  Reason reason_;
};

inline constexpr int kCheckpointVersion = 1;

/// A trained actor-critic pair plus the provenance needed to reproduce it.
///
/// On disk: a text manifest terminated by a line `end`, followed by the
/// actor then critic parameters as little-endian float64, each layer as its
/// weight (column-major) then bias.
struct Checkpoint {
  std::string kind;
  ActorCritic net;
  A2CHyper hyper;
  long long episodes = 0;
  std::uint64_t seed = 0;
};

std::string serialize(const Checkpoint& ckpt);
Checkpoint deserialize(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::string_view bytes);

/// Digest of the parameter payload only, so it tracks the weights and not
/// the provenance fields.
std::uint64_t parameter_checksum(const ActorCritic& net);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace xsched
