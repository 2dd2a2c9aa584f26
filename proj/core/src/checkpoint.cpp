#include "seqac/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace seqac {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian hosts");
static_assert(sizeof(double) == 8);

constexpr char kMagic[4] = {'S', 'E', 'Q', 'C'};
constexpr std::uint64_t kMaxLength = std::uint64_t{1} << 40;

void put_u64(std::string& out, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

void put_string(std::string& out, const std::string& s) {
  put_u64(out, s.size());
  out += s;
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  void need(std::uint64_t n, const char* what) const {
    if (n > bytes_.size() - pos_) {
      throw CheckpointError(std::string("checkpoint truncated while reading ") + what);
    }
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v;
    std::memcpy(&v, bytes_.data() + pos_, 8);
    pos_ += 8;
    return v;
  }
  std::string str(const char* what) {
    const std::uint64_t n = u64(what);
    if (n > kMaxLength) throw CheckpointError(std::string("implausible length for ") + what);
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void doubles(double* dst, std::uint64_t n) {
    if (n > kMaxLength) throw CheckpointError("implausible tensor size");
    need(n * 8, "tensor values");
    std::memcpy(dst, bytes_.data() + pos_, n * 8);
    pos_ += n * 8;
  }
  void magic() {
    need(4, "magic");
    if (std::memcmp(bytes_.data(), kMagic, 4) != 0) throw CheckpointError("not a checkpoint (bad magic)");
    pos_ = 4;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out(kMagic, 4);
  put_u64(out, kCheckpointVersion);
  put_string(out, ckpt.config);
  put_u64(out, ckpt.vocab.size());
  for (const std::string& token : ckpt.vocab.tokens()) put_string(out, token);
  put_u64(out, ckpt.tensors.count());
  for (const auto& [name, t] : ckpt.tensors) {
    put_string(out, name);
    put_u64(out, t.rank());
    for (std::size_t d : t.shape()) put_u64(out, d);
    const std::size_t offset = out.size();
    out.resize(offset + t.size() * 8);
    if (t.size() > 0) std::memcpy(out.data() + offset, t.data(), t.size() * 8);
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  in.magic();
  const std::uint64_t version = in.u64("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint format version " + std::to_string(version) +
                          " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint ckpt;
  ckpt.config = in.str("config");
  const std::uint64_t tokens = in.u64("vocabulary size");
  if (tokens > kMaxLength) throw CheckpointError("implausible vocabulary size");
  std::vector<std::string> list;
  for (std::uint64_t i = 0; i < tokens; ++i) list.push_back(in.str("token"));
  if (!list.empty()) {
    try {
      ckpt.vocab = Vocab(list);
    } catch (const std::exception& e) {
      throw CheckpointError(std::string("bad vocabulary: ") + e.what());
    }
  }
  const std::uint64_t count = in.u64("tensor count");
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = in.str("tensor name");
    const std::uint64_t rank = in.u64("rank");
    if (rank > 8) throw CheckpointError("implausible rank for '" + name + "'");
    Shape shape;
    for (std::uint64_t r = 0; r < rank; ++r) shape.push_back(in.u64("dimension"));
    if (ckpt.tensors.contains(name)) throw CheckpointError("duplicate tensor '" + name + "'");
    Tensor& t = ckpt.tensors.add(name, shape);
    in.doubles(t.data(), t.size());
  }
  if (!in.done()) throw CheckpointError("trailing bytes after the last tensor");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    const std::string bytes = serialize_checkpoint(ckpt);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return deserialize_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

std::string describe_checkpoint(const Checkpoint& ckpt) {
  std::ostringstream os;
  os << "format version " << kCheckpointVersion << "\n";
  os << "vocabulary " << ckpt.vocab.size() << " tokens\n";
  os << "tensors " << ckpt.tensors.count() << " (" << ckpt.tensors.num_values() << " values)\n";
  for (const auto& [name, t] : ckpt.tensors) os << "  " << name << " " << to_string(t.shape()) << "\n";
  return os.str();
}

}  // namespace seqac
