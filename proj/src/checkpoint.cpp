#include "addle/checkpoint.hpp"

#include "addle/dataset.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace addle {

namespace {

constexpr char kMagic[8] = {'A', 'D', 'D', 'L', 'E', 'C', 'K', 'P'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::vector<std::uint8_t>& data() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}
  void need(std::size_t n, const char* what) const {
    if (size_ - pos_ < n) throw std::runtime_error(std::string("truncated while reading ") + what);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_++]) << (8 * i);
    return v;
  }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
  std::string str(const char* what) {
    const std::uint32_t n = u32(what);
    need(n, what);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return size_ - pos_; }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::vector<std::size_t> parse_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(s)) {
    if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos) {
      throw std::runtime_error("bad integer list '" + s + "'");
    }
    out.push_back(std::stoull(item));
  }
  return out;
}

std::uint64_t parse_u64(const std::map<std::string, std::string>& h, const std::string& key) {
  const auto it = h.find(key);
  if (it == h.end()) throw std::runtime_error("header lacks '" + key + "'");
  if (it->second.empty() || it->second.find_first_not_of("0123456789") != std::string::npos) {
    throw std::runtime_error("header field '" + key + "' is not an unsigned integer");
  }
  return std::stoull(it->second);
}

const std::string& field(const std::map<std::string, std::string>& h, const std::string& key) {
  const auto it = h.find(key);
  if (it == h.end()) throw std::runtime_error("header lacks '" + key + "'");
  return it->second;
}

struct NamedTensor {
  std::string name;
  Tensor* tensor;
};

std::vector<NamedTensor> tensor_table(RaterModel& model) {
  std::vector<NamedTensor> out;
  const bool multi = model.params.size() > 1;
  for (std::size_t n = 0; n < model.params.size(); ++n) {
    const std::string prefix = multi ? "net" + std::to_string(n) + "." : "";
    auto& p = model.params[n];
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
      out.push_back({prefix + "layer" + std::to_string(l) + ".weight", &p.layers[l].weight});
      out.push_back({prefix + "layer" + std::to_string(l) + ".bias", &p.layers[l].bias});
    }
    for (std::size_t a = 0; a < p.mixing.size(); ++a)
      out.push_back({prefix + "inject" + std::to_string(a) + ".A", &p.mixing[a]});
  }
  return out;
}

std::string header_text(const Checkpoint& c) {
  const RaterModel& m = c.model;
  std::map<std::string, std::string> h;
  h["mode"] = mode_name(m.mode);
  h["input_dim"] = std::to_string(m.backbone.input_dim);
  h["hidden"] = join_sizes(m.backbone.hidden);
  h["num_classes"] = std::to_string(m.backbone.num_classes);
  h["latent_dim"] = std::to_string(m.backbone.latent_dim);
  h["injections"] = format_injections(m.backbone.injections);
  h["conv"] = m.backbone.conv ? std::to_string(m.backbone.conv->channels) + "," + std::to_string(m.backbone.conv->kernel)
                              : "";
  h["num_heads"] = std::to_string(m.backbone.num_heads);
  h["num_networks"] = std::to_string(m.params.size());
  h["rater_ids"] = join_list(m.rater_ids, '\t');
  h["codebook"] = m.codebook ? "1" : "0";
  h["sigma2_bits"] = m.codebook ? std::to_string(std::bit_cast<std::uint64_t>(m.codebook->sigma2())) : "";
  h["config_hash"] = c.provenance.config_hash;
  h["seed"] = std::to_string(c.provenance.seed);
  h["epoch"] = std::to_string(c.provenance.epoch);
  std::string out;
  for (const auto& [k, v] : h) {
    if (v.find('\n') != std::string::npos) throw std::invalid_argument("checkpoint: field '" + k + "' contains a newline");
    out += k + "=" + v + "\n";
  }
  return out;
}

}  // namespace

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t size) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  ckpt.model.validate();
  RaterModel copy = ckpt.model;
  auto table = tensor_table(copy);
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kCheckpointVersion);
  w.str(header_text(ckpt));
  Tensor codes = copy.codebook ? copy.codebook->codes() : Tensor();
  if (copy.codebook) table.push_back({"codebook.Z", &codes});
  w.u32(static_cast<std::uint32_t>(table.size()));
  for (const auto& t : table) {
    w.str(t.name);
    w.u32(static_cast<std::uint32_t>(t.tensor->rank()));
    for (std::size_t d : t.tensor->shape()) w.u64(d);
  }
  for (const auto& t : table)
    for (double v : t.tensor->data()) w.f64(v);
  const std::uint64_t sum = fnv1a64(w.data().data(), w.data().size());
  w.u64(sum);
  return std::move(w.data());
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < sizeof kMagic + 4 + 8) throw std::runtime_error("file too short to be a checkpoint");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) throw std::runtime_error("bad magic bytes");
  Reader r(bytes.data() + sizeof kMagic, bytes.size() - sizeof kMagic - 8);
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                             std::to_string(kCheckpointVersion) + ")");
  }
  std::uint64_t stored = 0;
  for (int i = 0; i < 8; ++i) stored |= static_cast<std::uint64_t>(bytes[bytes.size() - 8 + i]) << (8 * i);
  if (stored != fnv1a64(bytes.data(), bytes.size() - 8)) throw std::runtime_error("checksum mismatch (file corrupt)");

  std::map<std::string, std::string> h;
  {
    std::istringstream in(r.str("header"));
    std::string line;
    while (std::getline(in, line)) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw std::runtime_error("malformed header line '" + line + "'");
      h[line.substr(0, eq)] = line.substr(eq + 1);
    }
  }

  Checkpoint c;
  RaterModel& m = c.model;
  try {
    m.mode = parse_mode(field(h, "mode"));
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(e.what());
  }
  m.backbone.input_dim = parse_u64(h, "input_dim");
  m.backbone.hidden = parse_sizes(field(h, "hidden"));
  m.backbone.num_classes = parse_u64(h, "num_classes");
  m.backbone.latent_dim = parse_u64(h, "latent_dim");
  try {
    m.backbone.injections = parse_injections(field(h, "injections"));
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(e.what());
  }
  const auto conv = parse_sizes(field(h, "conv"));
  if (conv.size() == 2) {
    m.backbone.conv = ConvFrontEnd{conv[0], conv[1]};
  } else if (!conv.empty()) {
    throw std::runtime_error("header field 'conv' must hold channels,kernel");
  }
  m.backbone.num_heads = parse_u64(h, "num_heads");
  m.rater_ids = split_list(field(h, "rater_ids"), '\t');
  const std::uint64_t networks = parse_u64(h, "num_networks");
  c.provenance.config_hash = field(h, "config_hash");
  c.provenance.seed = parse_u64(h, "seed");
  c.provenance.epoch = parse_u64(h, "epoch");
  const bool has_codes = field(h, "codebook") == "1";
  try {
    m.backbone.validate();
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(e.what());
  }
  if (networks == 0 || networks > 100000) throw std::runtime_error("implausible network count");
  m.params.assign(networks, init_params(m.backbone, 0));

  auto table = tensor_table(m);
  Tensor codes;
  if (has_codes) table.push_back({"codebook.Z", &codes});
  const std::uint32_t count = r.u32("tensor count");
  if (count != table.size()) {
    throw std::runtime_error("shape table lists " + std::to_string(count) + " tensors, config implies " +
                             std::to_string(table.size()));
  }
  for (auto& t : table) {
    const std::string name = r.str("tensor name");
    if (name != t.name) throw std::runtime_error("expected tensor '" + t.name + "', found '" + name + "'");
    const std::uint32_t rank = r.u32("tensor rank");
    if (rank > 8) throw std::runtime_error("tensor '" + name + "' has implausible rank");
    Shape shape(rank);
    for (auto& d : shape) d = r.u64("tensor extent");
    if (t.tensor != &codes && shape != t.tensor->shape()) {
      throw std::runtime_error("tensor '" + name + "' has shape " + shape_string(shape) + ", config implies " +
                               shape_string(t.tensor->shape()));
    }
    if (t.tensor == &codes) {
      if (rank != 2 || shape[0] != m.rater_ids.size() || shape[1] != m.backbone.latent_dim) {
        throw std::runtime_error("codebook shape " + shape_string(shape) + " does not match raters x latent_dim");
      }
      codes = Tensor(shape, 0.0);
    }
  }
  for (auto& t : table) {
    r.need(t.tensor->numel() * 8, "tensor payload");
    for (std::size_t i = 0; i < t.tensor->numel(); ++i) (*t.tensor)[i] = r.f64("tensor payload");
  }
  if (r.remaining() != 0) throw std::runtime_error("trailing bytes after payload");
  if (has_codes) {
    const double sigma2 = std::bit_cast<double>(parse_u64(h, "sigma2_bits"));
    try {
      m.codebook = LatentCodebook(codes, sigma2, m.rater_ids);
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(e.what());
    }
  }
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(e.what());
  }
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(ckpt);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint " + path.string() + ": cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("checkpoint " + path.string() + ": write failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint " + path.string() + ": cannot open");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(bytes);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error("checkpoint " + path.string() + ": " + e.what());
  }
}

std::vector<std::filesystem::path> save_model(const RaterModel& model, const Provenance& provenance,
                                              const std::filesystem::path& dir, const std::string& stem) {
  model.validate();
  std::vector<std::filesystem::path> written;
  if (model.mode != TrainMode::jlsl) {
    written.push_back(dir / (stem + ".ckpt"));
    save_checkpoint({model, provenance}, written.back());
    return written;
  }
  for (std::size_t r = 0; r < model.num_raters(); ++r) {
    Checkpoint c;
    c.model.mode = TrainMode::jlsl;
    c.model.backbone = model.backbone;
    c.model.params = {model.params[r]};
    c.model.rater_ids = {model.rater_ids[r]};
    c.provenance = provenance;
    written.push_back(dir / (stem + "_" + std::to_string(r) + ".ckpt"));
    save_checkpoint(c, written.back());
  }
  return written;
}

RaterModel load_model(const std::filesystem::path& dir, const std::string& stem, Provenance* provenance) {
  const auto single = dir / (stem + ".ckpt");
  if (std::filesystem::exists(single)) {
    Checkpoint c = load_checkpoint(single);
    if (provenance) *provenance = c.provenance;
    return std::move(c.model);
  }
  RaterModel model;
  for (std::size_t r = 0;; ++r) {
    const auto path = dir / (stem + "_" + std::to_string(r) + ".ckpt");
    if (!std::filesystem::exists(path)) break;
    Checkpoint c = load_checkpoint(path);
    if (c.model.mode != TrainMode::jlsl) throw std::runtime_error("checkpoint " + path.string() + ": not a jlsl shard");
    if (r == 0) {
      model.mode = TrainMode::jlsl;
      model.backbone = c.model.backbone;
      if (provenance) *provenance = c.provenance;
    } else if (!(c.model.backbone == model.backbone)) {
      throw std::runtime_error("checkpoint " + path.string() + ": backbone differs from shard 0");
    }
    model.params.push_back(std::move(c.model.params[0]));
    model.rater_ids.push_back(c.model.rater_ids[0]);
  }
  if (model.params.empty()) throw std::runtime_error("no checkpoint found for '" + stem + "' in " + dir.string());
  model.validate();
  return model;
}

}  // namespace addle
