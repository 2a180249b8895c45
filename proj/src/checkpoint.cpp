#include "abm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace abm {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

const char kMagic[4] = {'A', 'B', 'M', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_bytes(std::vector<std::uint8_t>& out, const void* data, std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  out.insert(out.end(), p, p + n);
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  const std::uint8_t* take(std::size_t n, const std::string& field) {
    if (bytes_.size() - pos_ < n) throw ParseError(field, "truncated checkpoint");
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint8_t u8(const std::string& field) { return *take(1, field); }
  std::uint32_t u32(const std::string& field) {
    const std::uint8_t* p = take(4, field);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
  }
  std::string str(std::size_t n, const std::string& field) {
    const std::uint8_t* p = take(n, field);
    return std::string(reinterpret_cast<const char*>(p), n);
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

struct RawParam {
  std::string name;
  nn::Shape shape;
  const std::uint8_t* values;
};

struct Parsed {
  AbmConfig config;
  std::uint8_t width = 0;
  std::vector<RawParam> params;
};

Parsed parse(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (std::memcmp(r.take(4, "magic"), kMagic, 4) != 0) throw ParseError("magic", "not an ABM checkpoint");
  const std::uint8_t version = r.u8("version");
  if (version != kCheckpointVersion)
    throw ParseError("version", "unsupported version " + std::to_string(version));
  Parsed out;
  const std::uint32_t config_len = r.u32("config.length");
  try {
    out.config = AbmConfig::from_kv(KvConfig::parse(r.str(config_len, "config")));
    out.config.validate();
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError("config", e.what());
  }
  out.width = r.u8("scalar_width");
  if (out.width != 4 && out.width != 8) throw ParseError("scalar_width", "expected 4 or 8");
  const std::uint32_t count = r.u32("param_count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string at = "param[" + std::to_string(i) + "]";
    RawParam p;
    p.name = r.str(r.u32(at + ".name_length"), at + ".name");
    const std::uint32_t rank = r.u32(at + ".rank");
    if (rank > 8) throw ParseError(at + ".rank", "implausible rank");
    std::size_t n = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      p.shape.push_back(r.u32(at + ".dims"));
      n *= p.shape.back();
    }
    if (n > bytes.size()) throw ParseError(at + ".dims", "truncated checkpoint");
    p.values = r.take(n * out.width, at + ".values");
    out.params.push_back(std::move(p));
  }
  if (!r.done()) throw ParseError("trailer", "unexpected bytes after the last parameter");
  return out;
}

template <typename T>
void fill(nn::ParameterStore<T>& store, const Parsed& parsed) {
  if (parsed.width != sizeof(T))
    throw ParseError("scalar_width", "checkpoint holds " + std::to_string(parsed.width * 8) + "-bit values");
  if (parsed.params.size() != store.size())
    throw ShapeError("checkpoint has " + std::to_string(parsed.params.size()) + " parameters, model has " +
                     std::to_string(store.size()));
  // Check the whole manifest before touching any value.
  for (std::size_t i = 0; i < store.size(); ++i) {
    const RawParam& p = parsed.params[i];
    if (p.name != store[i].name) throw ShapeError("checkpoint parameter " + p.name + " where model has " + store[i].name);
    if (p.shape != store[i].value.shape)
      throw ShapeError("shape mismatch for " + p.name + ": checkpoint " + nn::shape_string(p.shape) + ", model " +
                       nn::shape_string(store[i].value.shape));
  }
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto& v = store[i].value.data;
    std::memcpy(v.data(), parsed.params[i].values, v.size() * sizeof(T));
  }
}

}  // namespace

template <typename T>
std::vector<std::uint8_t> checkpoint_bytes(const AbmModel<T>& model) {
  std::vector<std::uint8_t> out;
  put_bytes(out, kMagic, 4);
  out.push_back(kCheckpointVersion);
  KvConfig kv;
  model.config().to_kv(kv);
  const std::string text = kv.to_string();
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  put_bytes(out, text.data(), text.size());
  out.push_back(static_cast<std::uint8_t>(sizeof(T)));
  const auto& store = model.params();
  put_u32(out, static_cast<std::uint32_t>(store.size()));
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& p = store[i];
    put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    put_bytes(out, p.name.data(), p.name.size());
    put_u32(out, static_cast<std::uint32_t>(p.value.shape.size()));
    for (std::size_t d : p.value.shape) put_u32(out, static_cast<std::uint32_t>(d));
    put_bytes(out, p.value.data.data(), p.value.data.size() * sizeof(T));
  }
  return out;
}

AbmConfig checkpoint_config(const std::vector<std::uint8_t>& bytes) { return parse(bytes).config; }

template <typename T>
std::unique_ptr<AbmModel<T>> model_from_checkpoint(const std::vector<std::uint8_t>& bytes) {
  const Parsed parsed = parse(bytes);
  auto model = std::make_unique<AbmModel<T>>(parsed.config);
  fill(model->params(), parsed);
  return model;
}

template <typename T>
void load_checkpoint_into(AbmModel<T>& model, const std::vector<std::uint8_t>& bytes) {
  const Parsed parsed = parse(bytes);
  // Same shapes under a different config (e.g. dropout) is still a different model.
  if (!(parsed.config == model.config())) throw ShapeError("checkpoint was written for a different model config");
  fill(model.params(), parsed);
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContractError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ContractError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ContractError("write failed for " + path.string());
}

template <typename T>
void save_checkpoint(const AbmModel<T>& model, const std::filesystem::path& path) {
  write_file_bytes(path, checkpoint_bytes(model));
}

template <typename T>
std::unique_ptr<AbmModel<T>> load_checkpoint(const std::filesystem::path& path) {
  return model_from_checkpoint<T>(read_file_bytes(path));
}

std::string model_id(const std::vector<std::uint8_t>& bytes) {
  static const char* hex = "0123456789abcdef";
  std::uint64_t h = fnv1a64(bytes.data(), bytes.size());
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = hex[h & 0xf];
  return out;
}

template <typename T>
std::string model_card(const AbmModel<T>& model) {
  std::ostringstream os;
  KvConfig kv;
  model.config().to_kv(kv);
  os << "# config\n" << kv.to_string() << "# parameters (" << model.params().coordinate_count()
     << " coordinates)\n";
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    const auto& p = model.params()[i];
    os << p.name << ' ' << nn::shape_string(p.value.shape) << '\n';
  }
  return os.str();
}

#define ABM_INSTANTIATE_CKPT(T)                                                                 \
  template std::vector<std::uint8_t> checkpoint_bytes<T>(const AbmModel<T>&);                   \
  template std::unique_ptr<AbmModel<T>> model_from_checkpoint<T>(const std::vector<std::uint8_t>&); \
  template void load_checkpoint_into<T>(AbmModel<T>&, const std::vector<std::uint8_t>&);        \
  template void save_checkpoint<T>(const AbmModel<T>&, const std::filesystem::path&);           \
  template std::unique_ptr<AbmModel<T>> load_checkpoint<T>(const std::filesystem::path&);       \
  template std::string model_card<T>(const AbmModel<T>&);

ABM_INSTANTIATE_CKPT(float)
ABM_INSTANTIATE_CKPT(double)

}  // namespace abm
