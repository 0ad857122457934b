#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "geoprobe/tensor_io.h"

namespace geoprobe {
namespace {

// Products like 0.3 * 50 land a few ulps off the integer they denote.
double Snap(double x) {
  const double r = std::round(x);
  return std::abs(x - r) < 1e-9 ? r : x;
}

}  // namespace

void SpanTable::Validate() const {
  if (frame_rate && !(*frame_rate > 0))
    throw InvalidArgument("span table frame_rate must be positive");
  std::unordered_set<std::string> ids;
  for (const auto& row : rows) {
    if (!(row.start < row.end))
      throw InvalidArgument("span '" + row.element_id + "' has start >= end");
    if (!ids.insert(row.element_id).second)
      throw InvalidArgument("duplicate span element id '" + row.element_id + "'");
  }
}

SpanTable ParseSpanTable(const std::string& text) {
  SpanTable table;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("span record is not JSON: ") + e.what(), line_no);
    }
    try {
      if (!rec.contains("element_id")) {
        if (rec.contains("frame_rate")) {
          table.frame_rate = rec["frame_rate"].get<double>();
          continue;
        }
        throw ParseError("span record lacks element_id", line_no);
      }
      SpanRow row;
      row.utterance_id = rec.value("utterance_id", std::string());
      row.element_id = rec.at("element_id").get<std::string>();
      row.start = rec.at("start").get<double>();
      row.end = rec.at("end").get<double>();
      row.label = rec.value("label", std::string());
      table.rows.push_back(std::move(row));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad span field: ") + e.what(), line_no);
    }
  }
  table.Validate();
  return table;
}

SpanTable ReadSpanTable(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open span table " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return ParseSpanTable(buf.str());
}

std::pair<Eigen::Index, Eigen::Index> SpanRowRange(const SpanRow& span,
                                                   std::optional<double> frame_rate,
                                                   Eigen::Index rows) {
  double first, last;
  if (frame_rate) {
    first = std::floor(Snap(span.start * *frame_rate));
    last = std::ceil(Snap(span.end * *frame_rate));
  } else {
    first = std::floor(Snap(span.start));
    last = std::ceil(Snap(span.end));
  }
  first = std::max(first, 0.0);
  last = std::min(last, static_cast<double>(rows));
  if (last < first) last = first;
  return {static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(last)};
}

ActivationMatrix PoolSpans(const ActivationMatrix& frames, const SpanTable& spans,
                           PoolMode mode) {
  spans.Validate();
  ActivationMatrix out;
  out.layer_index = frames.layer_index;
  out.checkpoint_words = frames.checkpoint_words;
  out.source_model = frames.source_model;
  out.data.resize(static_cast<Eigen::Index>(spans.rows.size()), frames.cols());
  out.element_ids.reserve(spans.rows.size());

  std::string empty;
  for (size_t s = 0; s < spans.rows.size(); ++s) {
    const auto& span = spans.rows[s];
    const auto [first, last] = SpanRowRange(span, spans.frame_rate, frames.rows());
    if (last <= first) {
      if (!empty.empty()) empty += ", ";
      empty += span.element_id + " [" + std::to_string(span.start) + ", " +
               std::to_string(span.end) + ")";
      continue;
    }
    switch (mode) {
      case PoolMode::kMean: {
        Eigen::RowVectorXd acc = frames.data.middleRows(first, last - first)
                                     .cast<double>()
                                     .colwise()
                                     .sum();
        acc /= static_cast<double>(last - first);
        out.data.row(static_cast<Eigen::Index>(s)) = acc.cast<float>();
        break;
      }
    }
    out.element_ids.push_back(span.element_id);
  }
  if (!empty.empty())
    throw InvalidArgument("spans cover no rows after clipping: " + empty);
  return out;
}

}  // namespace geoprobe
