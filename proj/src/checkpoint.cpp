#include "embnli/checkpoint.hpp"

#include "embnli/io.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

namespace embnli {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw DataError("truncated checkpoint");
  return v;
}

std::string get_bytes(std::istream& in, std::uint64_t n) {
  if (n > (1ULL << 32)) throw DataError("implausible checkpoint field length");
  std::string s(n, '\0');
  if (n && !in.read(s.data(), static_cast<std::streamsize>(n))) throw DataError("truncated checkpoint");
  return s;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Model<double>& model) {
  const auto& c = model.config;
  nlohmann::json header{{"config",
                         {{"d", c.d},
                          {"layers", c.layers},
                          {"num_labels", c.num_labels},
                          {"dropout_p", c.dropout_p},
                          {"attention", c.attention},
                          {"window_D", c.window_D}}},
                        {"vocab", model.vocab},
                        {"labels", model.labels}};
  const auto text = header.dump();
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));

  const auto& params = model.params;
  std::uint32_t count = 0;
  visit_tensors(true, [&](const std::string&, const auto&) { ++count; }, params);
  put<std::uint32_t>(out, count);
  visit_tensors(
      true,
      [&](const std::string& name, const auto& t) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put<std::uint64_t>(out, static_cast<std::uint64_t>(t.rows()));
        put<std::uint64_t>(out, static_cast<std::uint64_t>(t.cols()));
        out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
      },
      params);
}

Model<double> read_checkpoint(std::istream& in) {
  char magic[sizeof kCheckpointMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    throw DataError("not a checkpoint (bad magic)");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  const auto header_len = get<std::uint64_t>(in);
  Model<double> m;
  try {
    const auto header = nlohmann::json::parse(get_bytes(in, header_len));
    const auto& c = header.at("config");
    m.config.d = c.at("d").get<int>();
    m.config.layers = c.at("layers").get<int>();
    m.config.num_labels = c.at("num_labels").get<int>();
    m.config.dropout_p = c.at("dropout_p").get<double>();
    m.config.attention = c.at("attention").get<bool>();
    m.config.window_D = c.at("window_D").get<int>();
    m.vocab = header.at("vocab").get<std::vector<std::string>>();
    m.labels = header.at("labels").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad checkpoint config block: ") + e.what());
  }
  m.config.validate();

  std::map<std::string, Matrix<double>> tensors;
  const auto count = get<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name = get_bytes(in, get<std::uint32_t>(in));
    const auto rows = get<std::uint64_t>(in);
    const auto cols = get<std::uint64_t>(in);
    if (rows > (1ULL << 31) || cols > (1ULL << 31)) throw DataError("implausible tensor shape in checkpoint");
    Matrix<double> t(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    if (!in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double))))
      throw DataError("truncated checkpoint tensor '" + name + "'");
    tensors.emplace(name, std::move(t));
  }

  m.params.encoder.resize(static_cast<std::size_t>(m.config.layers));
  m.params.decoder.resize(static_cast<std::size_t>(m.config.layers));
  visit_tensors(
      true,
      [&](const std::string& name, auto& t) {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw DataError("checkpoint is missing tensor '" + name + "'");
        if constexpr (std::decay_t<decltype(t)>::ColsAtCompileTime == 1) {
          if (it->second.cols() != 1) throw DataError("tensor '" + name + "' should be a vector");
          t = it->second.col(0);
        } else {
          t = it->second;
        }
      },
      m.params);
  const Eigen::Index d = m.config.d;
  const auto V = static_cast<Eigen::Index>(m.vocab.size());
  if (m.params.enc_embed.rows() != V || m.params.enc_embed.cols() != d || m.params.dec_embed.rows() != V ||
      m.params.out_W.rows() != m.config.num_labels ||
      static_cast<Eigen::Index>(m.labels.size()) != m.config.num_labels)
    throw DataError("checkpoint tensor shapes disagree with its config block");
  return m;
}

void save_checkpoint(const std::filesystem::path& path, const Model<double>& model) {
  write_file_atomic(path, [&](std::ostream& out) { write_checkpoint(out, model); }, true);
}

Model<double> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
  return read_checkpoint(in);
}

}  // namespace embnli
