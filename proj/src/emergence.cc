#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "geoprobe/analysis.h"
#include "geoprobe/random.h"

namespace geoprobe {

double LogisticParams::operator()(double log_words) const {
  return floor + (ceiling - floor) / (1.0 + std::exp(-(log_words - midpoint) / slope));
}

SimplexResult NelderMead(const std::function<double(const std::vector<double>&)>& f,
                         std::vector<double> start, std::vector<double> step,
                         int max_iterations, double tolerance) {
  const size_t n = start.size();
  std::vector<std::vector<double>> simplex(n + 1, start);
  for (size_t i = 0; i < n; ++i) simplex[i + 1][i] += step[i];
  std::vector<double> values(n + 1);
  for (size_t i = 0; i <= n; ++i) values[i] = f(simplex[i]);

  std::vector<size_t> order(n + 1);
  int it = 0;
  for (; it < max_iterations; ++it) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return values[a] < values[b]; });
    const size_t best = order.front(), worst = order.back(), second = order[n - 1];
    if (std::abs(values[worst] - values[best]) <= tolerance * (std::abs(values[best]) + 1e-30)) {
      double size = 0;
      for (size_t i = 0; i <= n; ++i)
        for (size_t d = 0; d < n; ++d) size = std::max(size, std::abs(simplex[i][d] - simplex[best][d]));
      if (size < 1e-10) break;
    }
    std::vector<double> centroid(n, 0.0);
    for (size_t i = 0; i <= n; ++i)
      if (i != worst)
        for (size_t d = 0; d < n; ++d) centroid[d] += simplex[i][d] / static_cast<double>(n);
    auto along = [&](double t) {
      std::vector<double> p(n);
      for (size_t d = 0; d < n; ++d) p[d] = centroid[d] + t * (simplex[worst][d] - centroid[d]);
      return p;
    };
    auto reflected = along(-1.0);
    const double fr = f(reflected);
    if (fr < values[best]) {
      auto expanded = along(-2.0);
      const double fe = f(expanded);
      if (fe < fr) {
        simplex[worst] = std::move(expanded);
        values[worst] = fe;
      } else {
        simplex[worst] = std::move(reflected);
        values[worst] = fr;
      }
    } else if (fr < values[second]) {
      simplex[worst] = std::move(reflected);
      values[worst] = fr;
    } else {
      const bool outside = fr < values[worst];
      auto contracted = along(outside ? -0.5 : 0.5);
      const double fc = f(contracted);
      if (fc < (outside ? fr : values[worst])) {
        simplex[worst] = std::move(contracted);
        values[worst] = fc;
      } else {
        for (size_t i = 0; i <= n; ++i) {
          if (i == best) continue;
          for (size_t d = 0; d < n; ++d) simplex[i][d] = simplex[best][d] + 0.5 * (simplex[i][d] - simplex[best][d]);
          values[i] = f(simplex[i]);
        }
      }
    }
  }
  const size_t best = static_cast<size_t>(std::min_element(values.begin(), values.end()) - values.begin());
  return {simplex[best], values[best], it};
}

EmergenceCurve FitEmergence(std::vector<CurvePoint> points, const FitOptions& options) {
  if (points.size() < 4)
    throw InvalidArgument("emergence fit needs at least 4 checkpoints, got " + std::to_string(points.size()));
  for (const auto& p : points)
    if (!(p.words > 0)) throw InvalidArgument("checkpoint word counts must be positive");
  std::sort(points.begin(), points.end(), [](const auto& a, const auto& b) { return a.words < b.words; });

  EmergenceCurve curve;
  curve.points = points;
  std::vector<double> x, y;
  for (const auto& p : points) {
    x.push_back(std::log10(p.words));
    y.push_back(p.score);
  }
  curve.min_log_words = x.front();
  curve.max_log_words = x.back();
  const auto [ymin_it, ymax_it] = std::minmax_element(y.begin(), y.end());
  const double ymin = *ymin_it, ymax = *ymax_it;
  if (ymax - ymin < options.flat_tolerance) {
    curve.degenerate = true;
    return curve;
  }
  const double xrange = std::max(curve.max_log_words - curve.min_log_words, 1e-6);

  // Parameters: a, b, mu, log(sigma).
  auto sse = [&](const std::vector<double>& v) {
    const LogisticParams p{v[0], v[1], v[2], std::exp(v[3])};
    double s = 0;
    for (size_t i = 0; i < x.size(); ++i) {
      const double r = p(x[i]) - y[i];
      s += r * r;
    }
    return std::isfinite(s) ? s : std::numeric_limits<double>::max();
  };

  std::vector<std::vector<double>> starts;
  for (int m = 0; m < 5; ++m) {
    const double mu = curve.min_log_words + (m + 0.5) / 5.0 * xrange;
    for (double frac : {0.05, 0.125, 0.33}) {
      starts.push_back({ymin, ymax, mu, std::log(frac * xrange)});
      starts.push_back({ymax, ymin, mu, std::log(frac * xrange)});
    }
  }
  Rng rng(options.seed);
  const double yspan = ymax - ymin;
  for (int r = 0; r < options.random_starts; ++r) {
    starts.push_back({ymin + yspan * rng.Uniform(-0.2, 0.2), ymax + yspan * rng.Uniform(-0.2, 0.2),
                      curve.min_log_words + xrange * rng.Uniform(-0.1, 1.1),
                      std::log(xrange * rng.Uniform(0.02, 1.0))});
  }

  SimplexResult best;
  best.value = std::numeric_limits<double>::infinity();
  const std::vector<double> step = {0.1 * yspan, 0.1 * yspan, 0.1 * xrange, 0.3};
  for (const auto& s : starts) {
    auto r = NelderMead(sse, s, step);
    r = NelderMead(sse, r.x, step);  // restart to escape a collapsed simplex
    if (r.value < best.value) best = r;
  }

  LogisticParams p{best.x[0], best.x[1], best.x[2], std::exp(best.x[3])};
  if (p.ceiling < p.floor) {
    std::swap(p.ceiling, p.floor);
    p.slope = -p.slope;
  }
  curve.params = p;
  curve.residual = best.value;
  curve.degenerate = p.ceiling - p.floor < options.flat_tolerance;
  return curve;
}

std::vector<double> RelativeScores(const EmergenceCurve& curve, const std::vector<double>& log_words) {
  if (curve.degenerate) throw InvalidArgument("relative scores of a degenerate curve");
  if (log_words.empty()) return {};
  std::vector<double> s;
  for (double x : log_words) s.push_back(curve.params(x));
  const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
  const double min = *lo, span = *hi - *lo;
  if (!(span > 0)) throw InvalidArgument("curve is flat over the requested grid");
  for (double& v : s) v = (v - min) / span;
  return s;
}

EmergencePoint EmergencePointAt(const EmergenceCurve& curve, double level) {
  if (curve.degenerate) throw InvalidArgument("emergence point of a degenerate curve");
  if (!(level > 0 && level < 1)) throw InvalidArgument("level must lie in (0, 1)");
  // (s - a) / (b - a) = level  <=>  x = mu + sigma * log(level / (1 - level))
  const double x = curve.params.midpoint + curve.params.slope * std::log(level / (1.0 - level));
  EmergencePoint p;
  p.words = std::pow(10.0, x);
  p.extrapolated = x < curve.min_log_words || x > curve.max_log_words;
  return p;
}

double DataGap(double model_words, double human_words) {
  if (!(model_words > 0) || !(human_words > 0))
    throw InvalidArgument("data gap needs positive word counts");
  return std::log10(model_words / human_words);
}

}  // namespace geoprobe
