#ifndef EMBNLI_CHECKPOINT_HPP
#define EMBNLI_CHECKPOINT_HPP

#include "embnli/seq2seq.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace embnli {

/// Parameters plus everything needed to apply them to raw text.
template <typename Scalar>
struct Model {
  ModelConfig config;
  std::vector<std::string> vocab;   ///< row order of both embedding matrices
  std::vector<std::string> labels;  ///< label index order
  ModelParams<Scalar> params;

  template <typename Other>
  [[nodiscard]] Model<Other> cast() const {
    return {config, vocab, labels, params.template cast<Other>()};
  }
};

inline constexpr char kCheckpointMagic[8] = {'E', 'M', 'B', 'N', 'L', 'I', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Layout: 8-byte magic, u32 version, u64 length + JSON config block (config,
/// vocab, labels), u32 tensor count, then per tensor u32 name length, name,
/// u64 rows, u64 cols and rows*cols column-major float64. All integers and
/// floats little-endian.
void write_checkpoint(std::ostream& out, const Model<double>& model);
Model<double> read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Model<double>& model);
Model<double> load_checkpoint(const std::filesystem::path& path);

}  // namespace embnli

#endif  // EMBNLI_CHECKPOINT_HPP
