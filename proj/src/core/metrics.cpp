#include "siddm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "siddm/error.hpp"
#include "siddm/io.hpp"

namespace siddm {

namespace {

void check_points(const Tensor& samples, const char* what) {
  if (samples.rank() != 2 || samples.cols() != 2) {
    fail(ErrorKind::Shape, std::string(what) + ": expected (n, 2) samples, got " +
                               shape_string(samples.shape()));
  }
}

struct Moments2d {
  double mx = 0, my = 0;
  double sxx = 0, sxy = 0, syy = 0;
};

Moments2d fit(const Tensor& s) {
  const std::size_t n = s.rows();
  Moments2d m;
  for (std::size_t i = 0; i < n; ++i) {
    m.mx += s(i, 0);
    m.my += s(i, 1);
  }
  m.mx /= n;
  m.my /= n;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = s(i, 0) - m.mx;
    const double dy = s(i, 1) - m.my;
    m.sxx += dx * dx;
    m.sxy += dx * dy;
    m.syy += dy * dy;
  }
  const double denom = static_cast<double>(n - 1);
  m.sxx /= denom;
  m.sxy /= denom;
  m.syy /= denom;
  return m;
}

void check_psd(const Moments2d& m, const char* which) {
  const double tr = m.sxx + m.syy;
  const double half_gap =
      std::sqrt(0.25 * (m.sxx - m.syy) * (m.sxx - m.syy) + m.sxy * m.sxy);
  const double min_eig = 0.5 * tr - half_gap;
  if (min_eig < -1e-12 * std::max(1.0, tr)) {
    fail(ErrorKind::InvalidArgument,
         std::string("frechet: fitted covariance of ") + which +
             " samples is not positive semi-definite");
  }
}

}  // namespace

std::vector<std::array<double, 2>> MogSpec::centers() const {
  validate();
  std::vector<std::array<double, 2>> out;
  const double mid = 0.5 * (grid_k - 1);
  for (int i = 0; i < grid_k; ++i) {
    for (int j = 0; j < grid_k; ++j) {
      out.push_back({(i - mid) * spacing, (j - mid) * spacing});
    }
  }
  return out;
}

void MogSpec::validate() const {
  require(grid_k >= 1, "mog: grid size must be at least 1");
  require(spacing > 0.0 || grid_k == 1, "mog: spacing must be positive");
  require(sigma > 0.0, "mog: sigma must be positive");
}

Tensor mog_sample(const MogSpec& spec, std::size_t n, Rng& rng) {
  require(n >= 1, "mog_sample: need at least one sample");
  const auto centers = spec.centers();
  const auto modes = static_cast<std::int64_t>(centers.size());
  Tensor out = Tensor::matrix(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = centers[rng.uniform_int(0, modes - 1)];
    out(i, 0) = c[0] + spec.sigma * rng.normal();
    out(i, 1) = c[1] + spec.sigma * rng.normal();
  }
  return out;
}

Coverage mode_coverage(const Tensor& samples, const MogSpec& spec,
                       double radius, double min_count_frac) {
  check_points(samples, "mode_coverage");
  if (radius <= 0.0) radius = 3.0 * spec.sigma;
  const auto centers = spec.centers();
  const std::size_t n = samples.rows();
  std::vector<std::size_t> close(centers.size(), 0);
  std::size_t hq = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const double dx = samples(i, 0) - centers[k][0];
      const double dy = samples(i, 1) - centers[k][1];
      const double d2 = dx * dx + dy * dy;
      if (d2 < best_d2) {
        best_d2 = d2;
        best = k;
      }
    }
    if (best_d2 <= radius * radius) {
      ++close[best];
      ++hq;
    }
  }
  const auto needed = static_cast<std::size_t>(
      std::max(1.0, std::ceil(min_count_frac * static_cast<double>(n))));
  Coverage out;
  for (std::size_t c : close) out.modes_covered += c >= needed ? 1 : 0;
  out.hq_fraction = n ? static_cast<double>(hq) / n : 0.0;
  return out;
}

FrechetResult frechet_gaussian_2d(const Tensor& real, const Tensor& gen) {
  check_points(real, "frechet");
  check_points(gen, "frechet");
  require(real.rows() >= 2 && gen.rows() >= 2,
          "frechet: need at least two samples per set");
  const Moments2d a = fit(real);
  const Moments2d b = fit(gen);
  check_psd(a, "real");
  check_psd(b, "generated");

  // tr((S1 S2)^{1/2}) = sqrt(tr(S1 S2) + 2 sqrt(det(S1 S2))) for 2 x 2 PSD.
  const double tr_prod = a.sxx * b.sxx + 2.0 * a.sxy * b.sxy + a.syy * b.syy;
  double det = (a.sxx * a.syy - a.sxy * a.sxy) * (b.sxx * b.syy - b.sxy * b.sxy);
  FrechetResult out;
  if (det < 0.0) {
    det = 0.0;
    out.det_clipped = true;
  }
  const double tr_sqrt = std::sqrt(std::max(0.0, tr_prod + 2.0 * std::sqrt(det)));
  const double dm = (a.mx - b.mx) * (a.mx - b.mx) + (a.my - b.my) * (a.my - b.my);
  out.value = std::max(
      0.0, dm + a.sxx + a.syy + b.sxx + b.syy - 2.0 * tr_sqrt);
  return out;
}

double sliced_w2(const Tensor& real, const Tensor& gen, int directions) {
  check_points(real, "sliced_w2");
  check_points(gen, "sliced_w2");
  require(directions >= 1, "sliced_w2: need at least one direction");
  const std::size_t n = std::min(real.rows(), gen.rows());
  require(n >= 1, "sliced_w2: empty sample set");
  std::vector<double> pa(n), pb(n);
  double total = 0.0;
  for (int k = 0; k < directions; ++k) {
    const double angle = std::numbers::pi * k / directions;
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    for (std::size_t i = 0; i < n; ++i) {
      pa[i] = c * real(i, 0) + s * real(i, 1);
      pb[i] = c * gen(i, 0) + s * gen(i, 1);
    }
    std::sort(pa.begin(), pa.end());
    std::sort(pb.begin(), pb.end());
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += (pa[i] - pb[i]) * (pa[i] - pb[i]);
    total += acc / n;
  }
  return std::sqrt(total / directions);
}

MetricsReport evaluate_samples(const Tensor& real, const Tensor& gen,
                               const MogSpec& spec) {
  MetricsReport r;
  const Coverage cov = mode_coverage(gen, spec);
  r.modes_covered = cov.modes_covered;
  r.hq_fraction = cov.hq_fraction;
  const FrechetResult fr = frechet_gaussian_2d(real, gen);
  r.frechet = fr.value;
  r.det_clipped = fr.det_clipped;
  r.sliced_w2 = sliced_w2(real, gen);
  r.n_samples = gen.rows();
  return r;
}

std::string metrics_to_json(const MetricsReport& r) {
  std::ostringstream out;
  out << "{\"modes_covered\": " << r.modes_covered
      << ", \"hq_fraction\": " << format_double(r.hq_fraction)
      << ", \"frechet\": " << format_double(r.frechet)
      << ", \"sliced_w2\": " << format_double(r.sliced_w2)
      << ", \"n_samples\": " << r.n_samples
      << ", \"det_clipped\": " << (r.det_clipped ? "true" : "false") << "}";
  return out.str();
}

void write_samples_csv(const std::string& path, const Tensor& samples) {
  check_points(samples, "write_samples_csv");
  std::string body = "x,y\n";
  for (std::size_t i = 0; i < samples.rows(); ++i) {
    body += format_double(samples(i, 0));
    body += ',';
    body += format_double(samples(i, 1));
    body += '\n';
  }
  write_file_atomic(path, body);
}

Tensor read_samples_csv(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || (line != "x,y" && line != "x,y\r")) {
    fail(ErrorKind::Format, path + ": expected header 'x,y'");
  }
  std::vector<double> values;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    try {
      if (comma == std::string::npos) throw std::invalid_argument("no comma");
      std::size_t used = 0;
      const double x = std::stod(line.substr(0, comma), &used);
      const std::string rest = line.substr(comma + 1);
      std::size_t used_y = 0;
      const double y = std::stod(rest, &used_y);
      if (used_y != rest.size()) throw std::invalid_argument("trailing text");
      values.push_back(x);
      values.push_back(y);
    } catch (const std::exception&) {
      fail(ErrorKind::Format,
           path + ":" + std::to_string(lineno) + ": cannot parse '" + line + "'");
    }
  }
  const std::size_t n = values.size() / 2;
  return Tensor(Shape{n, 2}, std::move(values));
}

}  // namespace siddm
