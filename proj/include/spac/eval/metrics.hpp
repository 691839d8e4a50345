// Copyright 2026 The spac Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "spac/cloud.hpp"

namespace spac::eval {

struct YuvPsnr {
  double y = 0.0;
  double u = 0.0;
  double v = 0.0;
  double combined = 0.0;
};

// 6:1:1 weighting, averaged in the dB domain.
double combine_yuv(double y, double u, double v);

// Both clouds must cover the same coordinates (any order).  RGB8 inputs are
// converted to YUV first.
YuvPsnr psnr_yuv(const PointCloud& ref, const PointCloud& test);

//============================================================================
// Rate-distortion curves and Bjontegaard deltas.

struct RDPoint {
  double rate = 0.0;  // bpp
  double psnr = 0.0;  // dB
};

struct RDCurve {
  std::vector<RDPoint> points;

  // At least four points, positive strictly increasing rates, finite PSNR.
  void validate() const;
};

enum class BdInterpolation { kCubic, kPchip };

// Average rate change (percent) at equal quality.
double bd_rate(const RDCurve& reference, const RDCurve& test,
               BdInterpolation mode = BdInterpolation::kCubic);
// Average quality change (dB) at equal rate.
double bd_psnr(const RDCurve& reference, const RDCurve& test,
               BdInterpolation mode = BdInterpolation::kCubic);

//============================================================================
// Report files.

struct RDRow {
  std::string label;
  double bpp = 0.0;
  YuvPsnr psnr;
};

// CSV with columns label,bpp,Y,U,V,YUV and 4 decimals.  Rows are written in
// the given order.
std::string format_rd_csv(const std::vector<RDRow>& rows);
std::vector<RDRow> parse_rd_csv(const std::string& text);

// Writes `path` (CSV) and `path` + ".dat", one gnuplot index block per label.
void write_rd_report(const std::string& path, const std::vector<RDRow>& rows);
std::vector<RDRow> read_rd_report(const std::string& path);

// Groups rows by label (first-seen order) into Y-PSNR curves.
std::vector<std::pair<std::string, RDCurve>> curves_by_label(const std::vector<RDRow>& rows);

}  // namespace spac::eval
