#include "wsol/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <map>
#include <string>

#include "wsol/errors.hpp"
#include "wsol/formats.hpp"

namespace wsol {

namespace {

constexpr char kMagic[4] = {'W', 'S', 'C', 'K'};

template <class T>
void put(std::vector<std::uint8_t>& out, T v) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  const U u = std::bit_cast<U>(v);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <class T>
  T get() {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    need(sizeof(U));
    U u = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) u |= static_cast<U>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(U);
    return std::bit_cast<T>(u);
  }

  std::string string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("checkpoint is truncated");
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const TinyBackbone& model) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  const auto params = model.parameters();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t->rank()));
    for (auto e : t->shape()) put<std::uint64_t>(out, static_cast<std::uint64_t>(e));
    for (double v : t->data()) put<double>(out, v);
  }
  return out;
}

TinyBackbone decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw FormatError("not a WSCK checkpoint (bad magic)");
  Reader r(bytes);
  (void)r.string(4);
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const auto count = r.get<std::uint32_t>();

  std::map<std::string, Tensor> blocks;
  for (std::uint32_t b = 0; b < count; ++b) {
    const auto name_len = r.get<std::uint32_t>();
    if (name_len == 0 || name_len > 256) throw FormatError("checkpoint block name has invalid length");
    std::string name = r.string(name_len);
    const auto rank = r.get<std::uint32_t>();
    if (rank == 0 || rank > 8) throw FormatError("checkpoint block '" + name + "' has invalid rank");
    Shape shape;
    std::uint64_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const auto e = r.get<std::uint64_t>();
      if (e == 0 || e > (1u << 24)) throw FormatError("checkpoint block '" + name + "' has invalid extent");
      numel *= e;
      if (numel > (1u << 26)) throw FormatError("checkpoint block '" + name + "' is too large");
      shape.push_back(static_cast<std::size_t>(e));
    }
    std::vector<double> data(static_cast<std::size_t>(numel));
    for (auto& v : data) v = r.get<double>();
    if (!blocks.emplace(name, Tensor(std::move(shape), std::move(data))).second)
      throw FormatError("duplicate checkpoint block '" + name + "'");
  }
  if (!r.done()) throw FormatError("trailing bytes after checkpoint blocks");

  auto take = [&](const std::string& name) -> Tensor& {
    const auto it = blocks.find(name);
    if (it == blocks.end()) throw FormatError("checkpoint lacks parameter '" + name + "'");
    return it->second;
  };

  ModelShape shape;
  const Tensor& conv1 = take("conv1.weight");
  const Tensor& conv2 = take("conv2.weight");
  const Tensor& conv3 = take("conv3.weight");
  const Tensor& cls = take("classifier.weight");
  if (conv1.rank() != 4 || conv2.rank() != 4 || conv3.rank() != 4 || cls.rank() != 2)
    throw FormatError("checkpoint parameter ranks do not match the model");
  shape.in_channels = conv1.dim(1);
  shape.c1 = conv1.dim(0);
  shape.c2 = conv2.dim(0);
  shape.c3 = conv3.dim(0);
  shape.n_classes = cls.dim(0);
  const Tensor& emb1 = take("attn1.embedding");
  if (emb1.rank() != 2) throw FormatError("checkpoint embedding must be a matrix");
  shape.embed_dim = emb1.dim(0);
  shape.key_channels1 = take("attn1.w_f").dim(0);
  shape.key_channels2 = take("attn2.w_f").dim(0);

  TinyBackbone model;
  try {
    shape.validate();
    model = TinyBackbone::init(shape, 0);
  } catch (const std::exception& e) {
    throw FormatError(std::string("checkpoint describes an invalid model: ") + e.what());
  }
  for (auto& [name, t] : model.parameters()) {
    Tensor& src = take(name);
    if (src.shape() != t->shape())
      throw FormatError("checkpoint parameter '" + name + "' has shape " + shape_str(src.shape()) + ", expected " +
                        shape_str(t->shape()));
    *t = std::move(src);
  }
  if (blocks.size() != model.parameters().size()) throw FormatError("checkpoint has unknown parameter blocks");
  return model;
}

void save_checkpoint(const std::filesystem::path& path, const TinyBackbone& model) {
  write_file(path, encode_checkpoint(model));
}

TinyBackbone load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace wsol
