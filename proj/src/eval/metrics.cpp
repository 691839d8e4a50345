// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#include "spac/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <Eigen/Dense>

#include "spac/error.hpp"

namespace spac::eval {
namespace {

PointCloud
as_yuv(const PointCloud& pc)
{
  return pc.colorspace == ColorSpace::kYUV ? pc : rgb_to_yuv(pc);
}

//============================================================================
// Interpolants over a sorted abscissa.

struct Sample {
  double x;
  double y;
};

std::vector<Sample>
sorted_samples(std::vector<Sample> s)
{
  std::sort(s.begin(), s.end(), [](const Sample& a, const Sample& b) { return a.x < b.x; });
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (!(s[i].x > s[i - 1].x))
      fail(ErrorCode::kInvalidArgument, "BD: interpolation abscissa has repeated values");
  }
  return s;
}

// Integral of the least-squares cubic through the samples over [lo, hi].
double
cubic_integral(const std::vector<Sample>& s, double lo, double hi)
{
  Eigen::MatrixXd a(static_cast<Eigen::Index>(s.size()), 4);
  Eigen::VectorXd b(static_cast<Eigen::Index>(s.size()));
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    double p = 1.0;
    for (int k = 0; k < 4; ++k) {
      a(r, k) = p;
      p *= s[i].x;
    }
    b(r) = s[i].y;
  }
  const Eigen::VectorXd c = a.colPivHouseholderQr().solve(b);
  auto antiderivative = [&](double x) {
    double sum = 0.0;
    double p = x;
    for (int k = 0; k < 4; ++k) {
      sum += c(k) * p / double(k + 1);
      p *= x;
    }
    return sum;
  };
  return antiderivative(hi) - antiderivative(lo);
}

// Fritsch-Carlson monotone slopes.
std::vector<double>
pchip_slopes(const std::vector<Sample>& s)
{
  const std::size_t n = s.size();
  std::vector<double> h(n - 1), delta(n - 1), d(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    h[i] = s[i + 1].x - s[i].x;
    delta[i] = (s[i + 1].y - s[i].y) / h[i];
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (delta[i - 1] * delta[i] <= 0.0)
      continue;
    const double w1 = 2.0 * h[i] + h[i - 1];
    const double w2 = h[i] + 2.0 * h[i - 1];
    d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
  }
  auto endpoint = [](double h0, double h1, double d0, double d1) {
    double e = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (e * d0 <= 0.0)
      e = 0.0;
    else if (d0 * d1 <= 0.0 && std::abs(e) > std::abs(3.0 * d0))
      e = 3.0 * d0;
    return e;
  };
  if (n == 2) {
    d[0] = d[1] = delta[0];
  } else {
    d[0] = endpoint(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = endpoint(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
  }
  return d;
}

double
pchip_integral(const std::vector<Sample>& s, double lo, double hi)
{
  const auto d = pchip_slopes(s);
  // Integral of the Hermite cubic on segment i from its left end to x.
  auto partial = [&](std::size_t i, double x) {
    const double h = s[i + 1].x - s[i].x;
    const double t = (x - s[i].x) / h;
    const double t2 = t * t, t3 = t2 * t, t4 = t3 * t;
    const double i00 = t4 / 2.0 - t3 + t;
    const double i10 = t4 / 4.0 - 2.0 * t3 / 3.0 + t2 / 2.0;
    const double i01 = -t4 / 2.0 + t3;
    const double i11 = t4 / 4.0 - t3 / 3.0;
    return h * (i00 * s[i].y + i10 * h * d[i] + i01 * s[i + 1].y + i11 * h * d[i + 1]);
  };
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    const double a = std::max(lo, s[i].x);
    const double b = std::min(hi, s[i + 1].x);
    if (b > a)
      total += partial(i, b) - partial(i, a);
  }
  return total;
}

double
integral(const std::vector<Sample>& s, double lo, double hi, BdInterpolation mode)
{
  return mode == BdInterpolation::kCubic ? cubic_integral(s, lo, hi) : pchip_integral(s, lo, hi);
}

// Mean of (test - reference) over the shared abscissa range.
double
average_gap(std::vector<Sample> ref, std::vector<Sample> test, BdInterpolation mode)
{
  ref = sorted_samples(std::move(ref));
  test = sorted_samples(std::move(test));
  const double lo = std::max(ref.front().x, test.front().x);
  const double hi = std::min(ref.back().x, test.back().x);
  if (!(hi > lo))
    fail(ErrorCode::kOutOfRange, "BD: curves do not overlap");
  return (integral(test, lo, hi, mode) - integral(ref, lo, hi, mode)) / (hi - lo);
}

std::vector<Sample>
log_rate_by_psnr(const RDCurve& c)
{
  std::vector<Sample> s;
  for (const auto& p : c.points)
    s.push_back({p.psnr, std::log10(p.rate)});
  return s;
}

std::vector<Sample>
psnr_by_log_rate(const RDCurve& c)
{
  std::vector<Sample> s;
  for (const auto& p : c.points)
    s.push_back({std::log10(p.rate), p.psnr});
  return s;
}

std::string
fixed4(double v)
{
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(4);
  os << v;
  return os.str();
}

const char* const kCsvHeader = "label,bpp,Y,U,V,YUV";

}  // namespace

double
combine_yuv(double y, double u, double v)
{
  return (6.0 * y + u + v) / 8.0;
}

YuvPsnr
psnr_yuv(const PointCloud& ref, const PointCloud& test)
{
  const PointCloud a = as_yuv(ref);
  const PointCloud b = as_yuv(test);
  YuvPsnr r;
  r.y = channel_psnr(a, b, 0);
  r.u = channel_psnr(a, b, 1);
  r.v = channel_psnr(a, b, 2);
  r.combined = combine_yuv(r.y, r.u, r.v);
  return r;
}

void
RDCurve::validate() const
{
  if (points.size() < 4)
    fail(ErrorCode::kInvalidArgument, "RD curve needs at least 4 points, got " + std::to_string(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (!(p.rate > 0.0) || !std::isfinite(p.rate) || !std::isfinite(p.psnr))
      fail(ErrorCode::kInvalidArgument, "RD curve point " + std::to_string(i) + " is not finite and positive");
    if (i > 0 && !(p.rate > points[i - 1].rate))
      fail(ErrorCode::kInvalidArgument, "RD curve rates must be strictly increasing");
  }
}

double
bd_rate(const RDCurve& reference, const RDCurve& test, BdInterpolation mode)
{
  reference.validate();
  test.validate();
  const double gap = average_gap(log_rate_by_psnr(reference), log_rate_by_psnr(test), mode);
  return 100.0 * (std::pow(10.0, gap) - 1.0);
}

double
bd_psnr(const RDCurve& reference, const RDCurve& test, BdInterpolation mode)
{
  reference.validate();
  test.validate();
  return average_gap(psnr_by_log_rate(reference), psnr_by_log_rate(test), mode);
}

//============================================================================

std::string
format_rd_csv(const std::vector<RDRow>& rows)
{
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& r : rows) {
    if (r.label.find_first_of(",\n") != std::string::npos)
      fail(ErrorCode::kInvalidArgument, "RD label may not contain commas or newlines: " + r.label);
    out += r.label + "," + fixed4(r.bpp) + "," + fixed4(r.psnr.y) + "," + fixed4(r.psnr.u) + "," +
           fixed4(r.psnr.v) + "," + fixed4(r.psnr.combined) + "\n";
  }
  return out;
}

std::vector<RDRow>
parse_rd_csv(const std::string& text)
{
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader)
    fail(ErrorCode::kMalformedHeader, "RD report must start with '" + std::string(kCsvHeader) + "'");
  std::vector<RDRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty())
      continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ','))
      f.push_back(cell);
    if (f.size() != 6)
      fail(ErrorCode::kMalformedHeader, "RD report line " + std::to_string(lineno) + ": expected 6 fields");
    RDRow r;
    r.label = f[0];
    try {
      r.bpp = std::stod(f[1]);
      r.psnr.y = std::stod(f[2]);
      r.psnr.u = std::stod(f[3]);
      r.psnr.v = std::stod(f[4]);
      r.psnr.combined = std::stod(f[5]);
    } catch (const std::exception&) {
      fail(ErrorCode::kMalformedHeader, "RD report line " + std::to_string(lineno) + ": bad number");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

void
write_rd_report(const std::string& path, const std::vector<RDRow>& rows)
{
  const std::string csv = format_rd_csv(rows);
  std::ofstream out(path, std::ios::binary);
  if (!(out << csv))
    fail(ErrorCode::kIoError, "cannot write " + path);

  std::ofstream dat(path + ".dat", std::ios::binary);
  if (!dat)
    fail(ErrorCode::kIoError, "cannot write " + path + ".dat");
  bool first = true;
  for (const auto& [label, curve] : curves_by_label(rows)) {
    if (!first)
      dat << "\n\n";
    first = false;
    dat << "# " << label << "\n# bpp Y U V YUV\n";
    for (const auto& r : rows) {
      if (r.label == label)
        dat << fixed4(r.bpp) << " " << fixed4(r.psnr.y) << " " << fixed4(r.psnr.u) << " " << fixed4(r.psnr.v)
            << " " << fixed4(r.psnr.combined) << "\n";
    }
  }
  if (!dat)
    fail(ErrorCode::kIoError, "cannot write " + path + ".dat");
}

std::vector<RDRow>
read_rd_report(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    fail(ErrorCode::kIoError, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_rd_csv(ss.str());
}

std::vector<std::pair<std::string, RDCurve>>
curves_by_label(const std::vector<RDRow>& rows)
{
  std::vector<std::pair<std::string, RDCurve>> out;
  std::map<std::string, std::size_t> slot;
  for (const auto& r : rows) {
    auto [it, fresh] = slot.emplace(r.label, out.size());
    if (fresh)
      out.push_back({r.label, RDCurve{}});
    out[it->second].second.points.push_back({r.bpp, r.psnr.y});
  }
  return out;
}

}  // namespace spac::eval
