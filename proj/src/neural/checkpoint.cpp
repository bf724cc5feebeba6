#include "parg/neural/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace parg::neural {

namespace {

constexpr char kMagic[8] = {'P', 'A', 'R', 'G', 'C', 'K', 'P', 'T'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_array(std::string& out, const std::vector<double>& a) {
  put_u64(out, a.size());
  for (double x : a) put_u64(out, std::bit_cast<std::uint64_t>(x));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::uint64_t u(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
    return v;
  }

  std::string raw(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::vector<double> array(const char* what) {
    const std::uint64_t n = u(8);
    if (n > (bytes_.size() - pos_) / 8) throw SchemaError(std::string("checkpoint: truncated ") + what + " array");
    std::vector<double> a(static_cast<std::size_t>(n));
    for (auto& x : a) x = std::bit_cast<double>(u(8));
    return a;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw SchemaError("checkpoint: unexpected end of file");
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& c) {
  nlohmann::json header;
  header["config"] = c.config;
  header["vocab"] = c.vocab_tokens;
  header["vocab_reserved"] = c.vocab_reserved;
  header["step"] = c.step;
  header["epoch"] = c.epoch;
  // Doubles in the header are stored as bit patterns so they survive exactly.
  header["learning_rate_bits"] = std::bit_cast<std::uint64_t>(c.learning_rate);
  std::vector<std::uint64_t> hist;
  for (double d : c.dev_history) hist.push_back(std::bit_cast<std::uint64_t>(d));
  header["dev_history_bits"] = hist;
  const std::string text = header.dump();

  std::string out(kMagic, sizeof kMagic);
  put_u32(out, c.version);
  put_u64(out, text.size());
  out += text;
  put_array(out, c.params);
  put_array(out, c.adam_m);
  put_array(out, c.adam_v);
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.raw(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) throw SchemaError("checkpoint: bad magic");
  Checkpoint c;
  c.version = static_cast<std::uint32_t>(r.u(4));
  if (c.version != kCheckpointVersion)
    throw SchemaError("checkpoint: unsupported format version " + std::to_string(c.version));
  const std::uint64_t len = r.u(8);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.raw(static_cast<std::size_t>(len)));
    c.config = header.at("config").get<ModelConfig>();
    c.vocab_tokens = header.at("vocab").get<std::vector<std::string>>();
    c.vocab_reserved = header.at("vocab_reserved").get<int>();
    c.step = header.at("step").get<std::int64_t>();
    c.epoch = header.at("epoch").get<int>();
    c.learning_rate = std::bit_cast<double>(header.at("learning_rate_bits").get<std::uint64_t>());
    for (auto b : header.at("dev_history_bits").get<std::vector<std::uint64_t>>())
      c.dev_history.push_back(std::bit_cast<double>(b));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("checkpoint header: ") + e.what());
  }
  c.params = r.array("parameter");
  c.adam_m = r.array("first-moment");
  c.adam_v = r.array("second-moment");
  if (!r.done()) throw SchemaError("checkpoint: trailing bytes");
  if (c.adam_m.size() != c.params.size() || c.adam_v.size() != c.params.size())
    throw SchemaError("checkpoint: optimizer state does not match parameter count");
  for (double x : c.params)
    if (!std::isfinite(x)) throw SchemaError("checkpoint: non-finite parameter");
  return c;
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  const std::string bytes = serialize_checkpoint(c);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

Model model_from_checkpoint(const Checkpoint& c) {
  return Model(c.config, Vocab::from_tokens(c.vocab_tokens, c.vocab_reserved), c.params);
}

}  // namespace parg::neural
