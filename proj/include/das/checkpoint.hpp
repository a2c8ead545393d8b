#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "das/models.hpp"
#include "das/training.hpp"

namespace das {

inline constexpr char kCheckpointMagic[8] = {'D', 'A', 'S', 'C', 'K', 'P', 'T', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class BadMagicError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class UnsupportedVersionError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
// Short reads and trailer length mismatches.
class TruncatedCheckpointError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class MissingTensorError : public CheckpointError {
 public:
  MissingTensorError(const std::string& name)
      : CheckpointError("checkpoint has no tensor '" + name + "'"), tensor(name) {}
  std::string tensor;
};

struct NamedTensor {
  std::string name;
  Tensor value;
};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::vector<NamedTensor> tensors;

  const Tensor* find(const std::string& name) const;
  const Tensor& get(const std::string& name) const;  // throws MissingTensorError
};

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

// Parameters and buffers under their own names, momentum buffers as "optim.<name>",
// plus "meta.epoch" and "meta.seed" (two 32-bit halves).
Checkpoint make_checkpoint(Network& net, const TrainState& state);

// Copies tensors into `net` (and `state` when given). Every parameter and buffer must be
// present with a matching shape.
void restore_checkpoint(const Checkpoint& ckpt, Network& net, TrainState* state = nullptr);

void save_checkpoint(Network& net, const TrainState& state, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace das
