#include "das/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace das {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr std::size_t kHeaderBytes = 16;

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  Reader(const std::string& buf, std::string path) : buf_(buf), path_(std::move(path)) {}

  void need(std::size_t n, const char* what) const {
    if (buf_.size() - pos_ < n) {
      throw TruncatedCheckpointError(path_ + ": truncated while reading " + what + " at byte offset " +
                                     std::to_string(pos_));
    }
  }
  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void read_doubles(double* dst, std::size_t count, const char* what) {
    if (count > remaining() / sizeof(double)) {
      throw TruncatedCheckpointError(path_ + ": truncated while reading " + what + " at byte offset " +
                                     std::to_string(pos_));
    }
    std::memcpy(dst, buf_.data() + pos_, count * sizeof(double));
    pos_ += count * sizeof(double);
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return buf_.size() - pos_; }

 private:
  const std::string& buf_;
  std::string path_;
  std::size_t pos_ = 0;
};

void put_tensor(Checkpoint& ck, std::string name, Tensor value) {
  ck.tensors.push_back({std::move(name), std::move(value)});
}

void copy_into(const Checkpoint& ck, const std::string& name, Tensor& dst) {
  const Tensor& src = ck.get(name);
  if (src.shape() != dst.shape()) {
    throw CheckpointError("checkpoint tensor '" + name + "' has shape " + src.shape().str() + ", model expects " +
                          dst.shape().str());
  }
  dst = src;
}

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const NamedTensor& t : tensors)
    if (t.name == name) return &t.value;
  return nullptr;
}

const Tensor& Checkpoint::get(const std::string& name) const {
  if (const Tensor* t = find(name)) return *t;
  throw MissingTensorError(name);
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::string payload;
  for (const NamedTensor& t : ckpt.tensors) {
    if (t.name.size() > 0xffff) throw CheckpointError("tensor name too long: " + t.name.substr(0, 40) + "...");
    put<std::uint16_t>(payload, static_cast<std::uint16_t>(t.name.size()));
    payload += t.name;
    put<std::uint8_t>(payload, 0);  // f64
    put<std::uint8_t>(payload, 4);
    const Shape& s = t.value.shape();
    for (std::size_t d : {s.n, s.c, s.h, s.w}) {
      if (d > 0xffffffffu) throw CheckpointError("tensor dimension too large in " + t.name);
      put<std::uint32_t>(payload, static_cast<std::uint32_t>(d));
    }
    payload.append(reinterpret_cast<const char*>(t.value.ptr()), t.value.numel() * sizeof(double));
  }
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  put<std::uint32_t>(out, ckpt.version);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  out += payload;
  put<std::uint64_t>(out, payload.size());

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw CheckpointError("cannot write checkpoint " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw CheckpointError("write failed for checkpoint " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open checkpoint " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  const std::string buf = ss.str();

  Reader r(buf, path);
  if (buf.size() < sizeof(kCheckpointMagic) ||
      std::memcmp(buf.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw BadMagicError(path + ": bad magic (not a DASCKPT1 checkpoint)");
  }
  r.bytes(sizeof(kCheckpointMagic), "magic");
  Checkpoint ck;
  ck.version = r.get<std::uint32_t>("version");
  if (ck.version != kCheckpointVersion) {
    throw UnsupportedVersionError(path + ": unknown checkpoint version " + std::to_string(ck.version));
  }
  const auto count = r.get<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.bytes(r.get<std::uint16_t>("name length"), "tensor name");
    const auto dtype = r.get<std::uint8_t>("dtype");
    if (dtype != 0) throw CheckpointError(path + ": tensor '" + t.name + "' has unsupported dtype " + std::to_string(dtype));
    const auto ndim = r.get<std::uint8_t>("ndim");
    if (ndim == 0 || ndim > 4) throw CheckpointError(path + ": tensor '" + t.name + "' has unsupported rank " + std::to_string(ndim));
    std::size_t dims[4] = {1, 1, 1, 1};
    for (std::size_t d = 4 - ndim; d < 4; ++d) dims[d] = r.get<std::uint32_t>("dims");
    t.value = Tensor({dims[0], dims[1], dims[2], dims[3]});
    r.read_doubles(t.value.ptr(), t.value.numel(), "tensor payload");
    ck.tensors.push_back(std::move(t));
  }
  const std::size_t payload_bytes = r.pos() - kHeaderBytes;
  const auto declared = r.get<std::uint64_t>("trailer");
  if (declared != payload_bytes) {
    throw TruncatedCheckpointError(path + ": payload length " + std::to_string(payload_bytes) +
                                   " does not match trailer " + std::to_string(declared));
  }
  if (r.remaining() != 0) {
    throw TruncatedCheckpointError(path + ": " + std::to_string(r.remaining()) + " unexpected bytes after trailer");
  }
  return ck;
}

Checkpoint make_checkpoint(Network& net, const TrainState& state) {
  Checkpoint ck;
  const std::vector<Parameter*> params = net.parameters();
  for (Parameter* p : params) put_tensor(ck, p->name, p->value);
  for (Parameter* b : net.buffers()) put_tensor(ck, b->name, b->value);
  if (!state.sgd.velocity.empty()) {
    if (state.sgd.velocity.size() != params.size()) throw CheckpointError("momentum buffers do not match the model");
    for (std::size_t i = 0; i < params.size(); ++i) put_tensor(ck, "optim." + params[i]->name, state.sgd.velocity[i]);
  }
  put_tensor(ck, "meta.epoch", Tensor::scalar(static_cast<double>(state.epoch)));
  put_tensor(ck, "meta.seed", Tensor({1, 1, 1, 2}, {static_cast<double>(state.seed >> 32),
                                                     static_cast<double>(state.seed & 0xffffffffu)}));
  return ck;
}

void restore_checkpoint(const Checkpoint& ckpt, Network& net, TrainState* state) {
  const std::vector<Parameter*> params = net.parameters();
  for (Parameter* p : params) copy_into(ckpt, p->name, p->value);
  for (Parameter* b : net.buffers()) copy_into(ckpt, b->name, b->value);
  if (!state) return;
  state->sgd.velocity.clear();
  if (ckpt.find("optim." + params.front()->name)) {
    for (Parameter* p : params) {
      Tensor v(p->value.shape());
      copy_into(ckpt, "optim." + p->name, v);
      state->sgd.velocity.push_back(std::move(v));
    }
  }
  state->epoch = static_cast<std::size_t>(ckpt.get("meta.epoch").item());
  const Tensor& seed = ckpt.get("meta.seed");
  if (seed.numel() != 2) throw CheckpointError("meta.seed must hold two values");
  state->seed = (static_cast<std::uint64_t>(seed[0]) << 32) | static_cast<std::uint64_t>(seed[1]);
}

void save_checkpoint(Network& net, const TrainState& state, const std::string& path) {
  write_checkpoint(path, make_checkpoint(net, state));
}

Checkpoint load_checkpoint(const std::string& path) { return read_checkpoint(path); }

}  // namespace das
