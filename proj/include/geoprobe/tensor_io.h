#ifndef GEOPROBE_TENSOR_IO_H_
#define GEOPROBE_TENSOR_IO_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "geoprobe/error.h"

namespace geoprobe {

using RowMatrixF =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// n x k activations, one row per element (frame, token, word, phoneme...).
struct ActivationMatrix {
  RowMatrixF data;
  std::vector<std::string> element_ids;
  int layer_index = 0;
  std::optional<int64_t> checkpoint_words;
  std::string source_model;

  Eigen::Index rows() const { return data.rows(); }
  Eigen::Index cols() const { return data.cols(); }

  // Throws InvalidArgument if ids and rows disagree, ids repeat, or any
  // entry is non-finite.
  void Validate() const;

  // Row lookup by element id; nullopt when absent.
  std::optional<Eigen::Index> FindRow(const std::string& id) const;

  Eigen::MatrixXd ToDouble() const { return data.cast<double>(); }
};

class TensorFormatError : public Error {
 public:
  enum class Kind { kIo, kBadMagic, kTruncated, kHeader, kShapeMismatch, kNonFinite };
  TensorFormatError(Kind kind, const std::string& what)
      : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// ".act" files: "ACT1" | u32 LE header length | JSON header | f32 LE payload.
ActivationMatrix ReadTensor(const std::filesystem::path& path);
void WriteTensor(const ActivationMatrix& matrix,
                 const std::filesystem::path& path);

// Byte-level codec used by the file functions; exposed for tests.
std::string EncodeTensor(const ActivationMatrix& matrix);
ActivationMatrix DecodeTensor(const std::string& bytes);

struct SpanRow {
  std::string utterance_id;
  std::string element_id;
  double start = 0;
  double end = 0;
  std::string label;
};

// Spans are in seconds when frame_rate is set, otherwise token indices.
struct SpanTable {
  std::vector<SpanRow> rows;
  std::optional<double> frame_rate;

  void Validate() const;
};

// JSON-lines, one object per span with keys utterance_id, element_id, start,
// end and label. A line {"frame_rate": r} (no element_id) sets the rate.
SpanTable ReadSpanTable(const std::filesystem::path& path);
SpanTable ParseSpanTable(const std::string& text);

// Half-open row range [first, last) a span covers after clipping to `rows`.
std::pair<Eigen::Index, Eigen::Index> SpanRowRange(const SpanRow& span,
                                                   std::optional<double> frame_rate,
                                                   Eigen::Index rows);

enum class PoolMode { kMean };

// One output row per span: the mean of the rows it covers. All spans index
// into `frames`; metadata other than ids is inherited from it.
ActivationMatrix PoolSpans(const ActivationMatrix& frames, const SpanTable& spans,
                           PoolMode mode = PoolMode::kMean);

}  // namespace geoprobe

#endif  // GEOPROBE_TENSOR_IO_H_
