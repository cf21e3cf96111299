// SPDX-License-Identifier: Apache-2.0
#include "redaff/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace redaff {

std::vector<int> acc_flags(std::span<const EvalPair> pairs) {
  std::vector<int> flags;
  flags.reserve(pairs.size());
  for (const auto& p : pairs) {
    flags.push_back(p.prediction.argmax() == p.truth.argmax() ? 1 : 0);
  }
  return flags;
}

double acc_at_1(std::span<const EvalPair> pairs) {
  if (pairs.empty()) throw DataError("acc_at_1: no documents");
  const auto flags = acc_flags(pairs);
  double hits = 0.0;
  for (int f : flags) hits += f;
  return hits / static_cast<double>(pairs.size());
}

AveragedPearson ap_document(std::span<const EvalPair> pairs) {
  AveragedPearson r;
  double sum = 0.0;
  for (const auto& p : pairs) {
    const auto c = pearson(p.prediction.values(), p.truth.values());
    if (c) {
      sum += *c;
      ++r.included;
    } else {
      ++r.excluded;
    }
  }
  if (r.included == 0) {
    throw DataError("ap_document: every document has a zero-variance profile");
  }
  r.value = sum / static_cast<double>(r.included);
  return r;
}

EmotionPearson ap_emotion(std::span<const EvalPair> pairs) {
  if (pairs.size() < 2) throw DataError("ap_emotion: need at least 2 documents");
  EmotionPearson r;
  double sum = 0.0;
  std::vector<double> a(pairs.size());
  std::vector<double> b(pairs.size());
  for (std::size_t e = 0; e < kNumEmotions; ++e) {
    for (std::size_t j = 0; j < pairs.size(); ++j) {
      a[j] = pairs[j].prediction[e];
      b[j] = pairs[j].truth[e];
    }
    r.per_emotion[e] = pearson(a, b);
    if (r.per_emotion[e]) {
      sum += *r.per_emotion[e];
      ++r.mean.included;
    } else {
      ++r.mean.excluded;
    }
  }
  if (r.mean.included == 0) {
    throw DataError("ap_emotion: every emotion column has zero variance");
  }
  r.mean.value = sum / static_cast<double>(r.mean.included);
  return r;
}

double rmse(const EmotionProfile& x, const EmotionProfile& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < kNumEmotions; ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(kNumEmotions));
}

std::vector<double> rmse_per_doc(std::span<const EvalPair> pairs) {
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(rmse(p.prediction, p.truth));
  return out;
}

double rmse_d(std::span<const EvalPair> pairs) {
  if (pairs.empty()) throw DataError("rmse_d: no documents");
  double s = 0.0;
  for (const auto& p : pairs) s += rmse(p.prediction, p.truth);
  return s / static_cast<double>(pairs.size());
}

double wasserstein(const EmotionProfile& x, const EmotionProfile& y, double bin_spacing) {
  double cx = 0.0;
  double cy = 0.0;
  double total = 0.0;
  // The last CDF difference is zero for two distributions.
  for (std::size_t k = 0; k + 1 < kNumEmotions; ++k) {
    cx += x[k];
    cy += y[k];
    total += std::abs(cx - cy);
  }
  return bin_spacing * total;
}

double wd_d(std::span<const EvalPair> pairs, double bin_spacing) {
  if (pairs.empty()) throw DataError("wd_d: no documents");
  double s = 0.0;
  for (const auto& p : pairs) s += wasserstein(p.prediction, p.truth, bin_spacing);
  return s / static_cast<double>(pairs.size());
}

EvalReport evaluate(std::span<const EvalPair> pairs) {
  EvalReport r;
  r.documents = pairs.size();
  r.acc_at_1 = acc_at_1(pairs);
  r.rmse_d = rmse_d(pairs);
  r.wd_d = wd_d(pairs);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  try {
    const auto d = ap_document(pairs);
    r.ap_document = d.value;
    r.ap_document_excluded = d.excluded;
  } catch (const DataError&) {
    r.ap_document = nan;
    r.ap_document_excluded = pairs.size();
  }
  try {
    const auto e = ap_emotion(pairs);
    r.ap_emotion = e.mean.value;
    r.ap_emotion_excluded = e.mean.excluded;
    r.per_emotion = e.per_emotion;
  } catch (const DataError&) {
    r.ap_emotion = nan;
    r.ap_emotion_excluded = kNumEmotions;
  }
  return r;
}

void write_report_header(std::ostream& out) {
  out << "model\tAcc@1(%)\tAP_document\tAP_emotion\tRMSE_D\tWD_D\tdocs\tap_document_excluded"
         "\tap_emotion_excluded\n";
}

void write_report_row(std::ostream& out, const std::string& label, const EvalReport& r) {
  auto cell = [](double x) { return std::isnan(x) ? std::string("NA") : format_fixed(x, 4); };
  out << label << '\t' << format_fixed(100.0 * r.acc_at_1, 2) << '\t' << cell(r.ap_document) << '\t'
      << cell(r.ap_emotion) << '\t' << cell(r.rmse_d) << '\t' << cell(r.wd_d) << '\t' << r.documents
      << '\t' << r.ap_document_excluded << '\t' << r.ap_emotion_excluded << '\n';
}

double chi2_1_sf(double x) {
  if (x <= 0.0) return 1.0;
  return std::erfc(std::sqrt(x / 2.0));
}

McNemarResult mcnemar(std::span<const int> flags_a, std::span<const int> flags_b) {
  if (flags_a.size() != flags_b.size()) {
    throw DataError("mcnemar: flag lists have different lengths");
  }
  McNemarResult r;
  for (std::size_t i = 0; i < flags_a.size(); ++i) {
    if (flags_a[i] != 0 && flags_b[i] == 0) ++r.b;
    if (flags_a[i] == 0 && flags_b[i] != 0) ++r.c;
  }
  const std::size_t n = r.b + r.c;
  if (n == 0) return r;
  const double diff = std::abs(static_cast<double>(r.b) - static_cast<double>(r.c)) - 1.0;
  const double stat = diff * diff / static_cast<double>(n);
  r.statistic = stat;
  r.p_value = chi2_1_sf(stat);
  return r;
}

double kolmogorov_sf(double x) {
  if (x <= 0.0) return 1.0;
  if (x < 1.18) {
    // Dual series converges fast for small x.
    const double w = std::sqrt(2.0 * M_PI) / x;
    const double z = -M_PI * M_PI / (8.0 * x * x);
    double s = 0.0;
    for (int k = 1; k <= 50; k += 2) s += std::exp(k * k * z);
    return std::clamp(1.0 - w * s, 0.0, 1.0);
  }
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    s += (k % 2 == 1 ? term : -term);
    if (term < 1e-300) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

KsResult ks_test(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw DataError("ks_test: empty sample");
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double n = static_cast<double>(x.size());
  const double m = static_cast<double>(y.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < x.size() || j < y.size()) {
    double v;
    if (j >= y.size() || (i < x.size() && x[i] <= y[j])) {
      v = x[i];
    } else {
      v = y[j];
    }
    while (i < x.size() && x[i] <= v) ++i;
    while (j < y.size() && y[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  KsResult r;
  r.statistic = d;
  r.p_value = kolmogorov_sf(std::sqrt(n * m / (n + m)) * d);
  return r;
}

}  // namespace redaff
