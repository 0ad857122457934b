#include <fstream>
#include <sstream>

#include "geoprobe/gold.h"

namespace geoprobe {
namespace {

std::vector<std::string> SplitCommas(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

PhonemeFeatureTable ParsePhonemeTable(const std::string& text) {
  PhonemeFeatureTable table;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto cells = SplitCommas(line);
    if (!have_header) {
      if (cells.size() < 2 || cells[0] != "symbol")
        throw ParseError("phoneme table header must start with 'symbol'", line_no);
      table.feature_names.assign(cells.begin() + 1, cells.end());
      have_header = true;
      continue;
    }
    if (cells.size() != table.feature_names.size() + 1)
      throw ParseError("expected " + std::to_string(table.feature_names.size() + 1) +
                           " columns, found " + std::to_string(cells.size()),
                       line_no);
    std::vector<int> values;
    for (size_t i = 1; i < cells.size(); ++i) {
      const std::string& c = cells[i];
      if (c == "1" || c == "+1")
        values.push_back(1);
      else if (c == "0")
        values.push_back(0);
      else if (c == "-1")
        values.push_back(-1);
      else
        throw ParseError("feature value '" + c + "' not in {-1,0,1}", line_no);
    }
    if (!table.features.emplace(cells[0], std::move(values)).second)
      throw ParseError("duplicate symbol '" + cells[0] + "'", line_no);
  }
  if (!have_header) throw ParseError("phoneme table is empty");
  return table;
}

PhonemeFeatureTable ReadPhonemeTable(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open phoneme table " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return ParsePhonemeTable(buf.str());
}

int PhonemeDissimilarity(const std::string& p, const std::string& q,
                         const PhonemeFeatureTable& table) {
  auto a = table.features.find(p);
  if (a == table.features.end()) throw InvalidArgument("unknown phoneme '" + p + "'");
  auto b = table.features.find(q);
  if (b == table.features.end()) throw InvalidArgument("unknown phoneme '" + q + "'");
  int differ = 0;
  for (size_t i = 0; i < a->second.size(); ++i) differ += a->second[i] != b->second[i];
  return differ;
}

}  // namespace geoprobe
