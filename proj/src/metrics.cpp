/**
 * Copyright 2026, The polsar-srsr Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "srsr/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

namespace srsr::metrics {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);  // shortest round-trip form
  return std::string(buf, res.ptr);
}

}  // namespace

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto v : counts) t += v;
  return t;
}

std::uint64_t ConfusionMatrix::row_sum(int r) const {
  std::uint64_t t = 0;
  for (int c = 0; c < classes; ++c) t += at(r, c);
  return t;
}

std::uint64_t ConfusionMatrix::col_sum(int c) const {
  std::uint64_t t = 0;
  for (int r = 0; r < classes; ++r) t += at(r, c);
  return t;
}

ConfusionMatrix confusion(const data::LabelMap& pred, const data::LabelMap& truth, int classes) {
  if (pred.height != truth.height || pred.width != truth.width || pred.labels.size() != truth.labels.size()) {
    throw Error(ErrorCode::DimensionMismatch, "prediction is " + std::to_string(pred.height) + "x" +
                                                  std::to_string(pred.width) + ", reference is " +
                                                  std::to_string(truth.height) + "x" + std::to_string(truth.width));
  }
  int c = std::max(classes, std::max(pred.max_label(), truth.max_label()));
  ConfusionMatrix cm(c);
  for (std::size_t i = 0; i < truth.labels.size(); ++i) {
    const int t = truth.labels[i];
    if (t == 0) continue;
    const int p = pred.labels[i];
    if (p == 0) {
      ++cm.unpredicted;
    } else {
      ++cm.at(t - 1, p - 1);
    }
  }
  return cm;
}

MetricsReport report(const ConfusionMatrix& cm) {
  MetricsReport r;
  r.total = cm.total();
  if (cm.classes <= 0 || r.total == 0) throw Error(ErrorCode::EmptyMatrix, "confusion matrix has no counts");
  const int C = cm.classes;
  const double n = static_cast<double>(r.total);
  r.user_accuracy.assign(C, kNaN);
  r.producer_accuracy.assign(C, kNaN);

  // Kappa = (n diag - sum row*col) / (n^2 - sum row*col), evaluated on exact
  // integers so simple tables give exact results.
  __extension__ typedef __int128 Wide;
  double diag = 0.0;
  Wide pe = 0;
  double aa = 0.0, f1 = 0.0, iou = 0.0;
  int aa_n = 0, f1_n = 0, iou_n = 0;
  for (int c = 0; c < C; ++c) {
    const double tp = static_cast<double>(cm.at(c, c));
    const double row = static_cast<double>(cm.row_sum(c));
    const double col = static_cast<double>(cm.col_sum(c));
    diag += tp;
    pe += static_cast<Wide>(cm.row_sum(c)) * static_cast<Wide>(cm.col_sum(c));
    if (col > 0) r.user_accuracy[c] = tp / col;
    if (row > 0) {
      r.producer_accuracy[c] = tp / row;
      aa += tp / row;
      ++aa_n;
    } else {
      r.warnings.push_back("class " + std::to_string(c + 1) + " is absent from the reference");
    }
    if (row > 0 || col > 0) {
      const double prec = col > 0 ? tp / col : 0.0;
      const double rec = row > 0 ? tp / row : 0.0;
      f1 += prec + rec > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
      ++f1_n;
      iou += tp / (row + col - tp);
      ++iou_n;
    }
  }
  r.overall_accuracy = diag / n;
  r.average_accuracy = aa_n > 0 ? aa / aa_n : kNaN;
  r.f1 = f1_n > 0 ? f1 / f1_n : kNaN;
  r.miou = iou_n > 0 ? iou / iou_n : kNaN;
  const Wide wn = static_cast<Wide>(r.total);
  const Wide num = wn * static_cast<Wide>(diag) - pe;
  const Wide den = wn * wn - pe;
  if (den <= 0) {
    r.kappa_degenerate = true;
    r.kappa = r.overall_accuracy == 1.0 ? 1.0 : 0.0;
    r.warnings.push_back("kappa undefined (chance agreement is 1)");
  } else {
    r.kappa = static_cast<double>(static_cast<long double>(num) / static_cast<long double>(den));
  }
  return r;
}

std::string to_key_value(const MetricsReport& r) {
  std::ostringstream os;
  os << "total=" << r.total << "\n";
  os << "overall_accuracy=" << fmt(r.overall_accuracy) << "\n";
  os << "average_accuracy=" << fmt(r.average_accuracy) << "\n";
  os << "kappa=" << fmt(r.kappa) << "\n";
  os << "kappa_degenerate=" << (r.kappa_degenerate ? 1 : 0) << "\n";
  os << "f1=" << fmt(r.f1) << "\n";
  os << "miou=" << fmt(r.miou) << "\n";
  for (std::size_t c = 0; c < r.user_accuracy.size(); ++c) {
    os << "user_accuracy_" << c + 1 << "=" << fmt(r.user_accuracy[c]) << "\n";
    os << "producer_accuracy_" << c + 1 << "=" << fmt(r.producer_accuracy[c]) << "\n";
  }
  for (const auto& w : r.warnings) os << "warning=" << w << "\n";
  return os.str();
}

std::string to_csv(const MetricsReport& r) {
  std::ostringstream os;
  os << "class,user_accuracy,producer_accuracy,overall_accuracy,average_accuracy,kappa,f1,miou\n";
  for (std::size_t c = 0; c < r.user_accuracy.size(); ++c) {
    os << c + 1 << "," << fmt(r.user_accuracy[c]) << "," << fmt(r.producer_accuracy[c]) << ",,,,,\n";
  }
  os << "all,,," << fmt(r.overall_accuracy) << "," << fmt(r.average_accuracy) << "," << fmt(r.kappa) << ","
     << fmt(r.f1) << "," << fmt(r.miou) << "\n";
  return os.str();
}

}  // namespace srsr::metrics
