#include "cadenza/checkpoint.hpp"

#include <cstring>

#include "cadenza/error.hpp"
#include "io_util.hpp"

namespace cadenza {

const Mlp* Checkpoint::find(std::string_view name) const {
  for (const auto& m : mlps) {
    if (m.name == name) return &m.mlp;
  }
  return nullptr;
}

namespace {

class Writer {
 public:
  template <typename T>
  void put(T value) {
    char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    buf_.append(bytes, sizeof(T));
  }
  void put_string(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    buf_ += s;
  }
  std::string& bytes() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const std::string& buf, std::string where) : buf_(buf), where_(std::move(where)) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void need(std::uint64_t n) const {
    if (n > buf_.size() - pos_) {
      throw Error(ErrorKind::Truncated, where_ + ": needs " + std::to_string(n) + " more bytes at offset " +
                                            std::to_string(pos_));
    }
  }
  bool at_end() const { return pos_ == buf_.size(); }

 private:
  const std::string& buf_;
  std::string where_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  Writer w;
  w.bytes().append(kCheckpointMagic, 4);
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(checkpoint.mlps.size()));
  w.put_string(checkpoint.config_json);
  for (const auto& named : checkpoint.mlps) {
    named.mlp.validate();
    w.put_string(named.name);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(named.mlp.layers.size()));
    for (const auto& l : named.mlp.layers) {
      w.put<std::uint32_t>(static_cast<std::uint32_t>(l.in_dim()));
      w.put<std::uint32_t>(static_cast<std::uint32_t>(l.out_dim()));
      w.put<std::uint8_t>(static_cast<std::uint8_t>(l.activation));
      w.put<float>(static_cast<float>(l.dropout_rate));
      for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.put<double>(l.weights(r, c));
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) w.put<double>(l.bias(r));
    }
  }
  detail::write_file_atomic(path, w.bytes());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  const std::string buf = detail::read_file(path);
  const std::string where = path.string();
  if (std::memcmp(buf.data(), kCheckpointMagic, std::min<std::size_t>(4, buf.size())) != 0) {
    throw Error(ErrorKind::BadMagic, where);
  }
  Reader r(buf, where);
  r.need(4);
  r.get<std::uint32_t>();  // magic
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::VersionMismatch, where + ": version " + std::to_string(version));
  }
  Checkpoint ck;
  const auto n_mlps = r.get<std::uint32_t>();
  ck.config_json = r.get_string();
  for (std::uint32_t m = 0; m < n_mlps; ++m) {
    NamedMlp named;
    named.name = r.get_string();
    const auto n_layers = r.get<std::uint32_t>();
    if (n_layers == 0) throw Error(ErrorKind::BadHeader, where + ": mlp without layers");
    for (std::uint32_t i = 0; i < n_layers; ++i) {
      const auto in = r.get<std::uint32_t>();
      const auto out = r.get<std::uint32_t>();
      const auto act = r.get<std::uint8_t>();
      const auto dropout = r.get<float>();
      if (in == 0 || out == 0) throw Error(ErrorKind::BadHeader, where + ": zero layer dimension");
      if (act > 2) throw Error(ErrorKind::BadHeader, where + ": unknown activation code " + std::to_string(act));
      r.need((std::uint64_t{in} * out + out) * sizeof(double));
      DenseLayer l;
      l.activation = static_cast<Activation>(act);
      l.dropout_rate = dropout;
      l.weights.resize(out, in);
      for (Eigen::Index row = 0; row < l.weights.rows(); ++row)
        for (Eigen::Index col = 0; col < l.weights.cols(); ++col) l.weights(row, col) = r.get<double>();
      l.bias.resize(out);
      for (Eigen::Index row = 0; row < l.bias.size(); ++row) l.bias(row) = r.get<double>();
      named.mlp.layers.push_back(std::move(l));
    }
    named.mlp.validate();
    ck.mlps.push_back(std::move(named));
  }
  if (!r.at_end()) throw Error(ErrorKind::BadHeader, where + ": trailing bytes");
  return ck;
}

}  // namespace cadenza
