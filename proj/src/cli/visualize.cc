#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "cli/commands.h"
#include "geoprobe/cli.h"
#include "geoprobe/metrics.h"

namespace geoprobe::cli {
namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 480;
constexpr double kMargin = 40;

std::string Fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string Escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// "category<TAB>element" lines; "#" comments.
std::vector<std::pair<std::string, std::vector<std::string>>> ReadCategories(const fs::path& path) {
  std::map<std::string, std::vector<std::string>> by_name;
  std::istringstream in(ReadFile(path));
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(path.string() + ": expected category<TAB>element", line_no);
    by_name[line.substr(0, tab)].push_back(line.substr(tab + 1));
  }
  return {by_name.begin(), by_name.end()};
}

// Maps data coordinates to the canvas with one scale for both axes.
class Canvas {
 public:
  explicit Canvas(const Eigen::MatrixXd& points) {
    lo_ = points.colwise().minCoeff();
    const Eigen::RowVector2d hi = points.colwise().maxCoeff();
    const Eigen::RowVector2d span = (hi - lo_).cwiseMax(1e-12);
    scale_ = std::min((kWidth - 2 * kMargin) / span(0), (kHeight - 2 * kMargin) / span(1));
  }
  double X(double x) const { return kMargin + (x - lo_(0)) * scale_; }
  double Y(double y) const { return kHeight - kMargin - (y - lo_(1)) * scale_; }

 private:
  Eigen::RowVector2d lo_;
  double scale_ = 1;
};

}  // namespace

int Visualize(const RunConfig& config, std::ostream& out, std::ostream&) {
  Provenance provenance(config);
  const fs::path probe_path = config.RequirePath("visualize.probe");
  const fs::path acts_path = config.RequirePath("visualize.activations");
  provenance.AddInput("probe", probe_path);
  provenance.AddInput("activations", acts_path);

  const Eigen::MatrixXd probe = ReadTensor(probe_path).ToDouble();
  if (probe.cols() != 2)
    throw InvalidArgument("visualize needs a 2-dimensional probe; " + probe_path.string() + " has " +
                          std::to_string(probe.cols()) + " dimensions");
  const ActivationMatrix acts = LoadActivations(config, acts_path);
  if (acts.cols() != probe.rows())
    throw InvalidArgument("probe expects " + std::to_string(probe.rows()) + " units, activations have " +
                          std::to_string(acts.cols()));
  const Eigen::MatrixXd coords = acts.ToDouble() * probe;
  const int n = static_cast<int>(coords.rows());

  std::vector<std::string> category_of(n);
  std::vector<std::string> centroid_names;
  std::vector<std::vector<int>> members;
  if (const auto cat_path = config.Path("visualize.categories")) {
    provenance.AddInput("categories", config.RequirePath("visualize.categories"));
    for (const auto& [name, elements] : ReadCategories(*cat_path)) {
      std::vector<int> rows;
      for (const auto& id : elements)
        if (auto r = acts.FindRow(id)) rows.push_back(static_cast<int>(*r));
      if (rows.empty()) continue;
      for (int r : rows)
        if (category_of[r].empty()) category_of[r] = name;
      centroid_names.push_back(name);
      members.push_back(std::move(rows));
    }
  }
  const Eigen::MatrixXd centroids =
      members.empty() ? Eigen::MatrixXd(0, 2) : CategoryCentroids(coords, members);

  std::vector<std::pair<int, int>> tree_edges;
  if (config.flags.tree) {
    const std::string sentence = config.Section("visualize").value("sentence", "");
    if (sentence.empty()) throw InvalidArgument("--tree needs \"visualize.sentence\"");
    std::vector<int> rows;
    for (int pos = 1;; ++pos) {
      auto r = acts.FindRow(SyntaxElementId(sentence, pos));
      if (!r) break;
      rows.push_back(static_cast<int>(*r));
    }
    if (rows.size() < 2)
      throw InvalidArgument("sentence '" + sentence + "' has fewer than two words in the activations");
    Eigen::MatrixXd sub(rows.size(), 2);
    for (size_t i = 0; i < rows.size(); ++i) sub.row(i) = coords.row(rows[i]);
    for (auto [a, b] : MinimumSpanningTree(SquaredDistances(sub))) tree_edges.emplace_back(rows[a], rows[b]);
  }

  CsvWriter coords_csv(provenance, {"element", "x", "y", "category"});
  for (int i = 0; i < n; ++i)
    coords_csv.Row({acts.element_ids[i], FormatDouble(coords(i, 0)), FormatDouble(coords(i, 1)), category_of[i]});
  WriteFileAtomic(config.out / "coords.csv", coords_csv.str());
  if (!members.empty()) {
    CsvWriter centroid_csv(provenance, {"category", "x", "y", "size"});
    for (size_t c = 0; c < members.size(); ++c)
      centroid_csv.Row({centroid_names[c], FormatDouble(centroids(c, 0)), FormatDouble(centroids(c, 1)),
                        std::to_string(members[c].size())});
    WriteFileAtomic(config.out / "centroids.csv", centroid_csv.str());
  }

  Eigen::MatrixXd extent(n + centroids.rows(), 2);
  extent << coords, centroids;
  const Canvas canvas(extent);
  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<!--\n";
  for (const auto& line : provenance.HeaderLines()) svg << "  " << Escape(line) << "\n";
  svg << "-->\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (auto [a, b] : tree_edges)
    svg << "<line class=\"tree-edge\" x1=\"" << Fixed(canvas.X(coords(a, 0))) << "\" y1=\""
        << Fixed(canvas.Y(coords(a, 1))) << "\" x2=\"" << Fixed(canvas.X(coords(b, 0))) << "\" y2=\""
        << Fixed(canvas.Y(coords(b, 1))) << "\" stroke=\"#555\" stroke-width=\"1.5\"/>\n";
  for (int i = 0; i < n; ++i)
    svg << "<circle class=\"point\" cx=\"" << Fixed(canvas.X(coords(i, 0))) << "\" cy=\""
        << Fixed(canvas.Y(coords(i, 1))) << "\" r=\"3\" fill=\"#4477aa\" fill-opacity=\"0.6\"><title>"
        << Escape(acts.element_ids[i]) << "</title></circle>\n";
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    const double x = canvas.X(centroids(c, 0)), y = canvas.Y(centroids(c, 1));
    svg << "<polygon class=\"centroid\" data-category=\"" << Escape(centroid_names[c]) << "\" points=\""
        << Fixed(x) << "," << Fixed(y - 7) << " " << Fixed(x + 7) << "," << Fixed(y) << " " << Fixed(x) << ","
        << Fixed(y + 7) << " " << Fixed(x - 7) << "," << Fixed(y) << "\" fill=\"#cc3311\"/>\n"
        << "<text x=\"" << Fixed(x + 9) << "\" y=\"" << Fixed(y - 9)
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << Escape(centroid_names[c]) << "</text>\n";
  }
  svg << "</svg>\n";
  WriteFileAtomic(config.out / "projection.svg", svg.str());

  out << "visualize: " << n << " points, " << members.size() << " centroids, " << tree_edges.size()
      << " tree edges\n";
  return kExitOk;
}

}  // namespace geoprobe::cli
