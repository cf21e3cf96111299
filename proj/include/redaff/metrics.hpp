// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "redaff/corpus.hpp"

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace redaff {

struct EvalPair {
  EmotionProfile prediction;
  EmotionProfile truth;
  std::string doc_id;
};

/// Per-document 1 when both argmaxes (lowest index on ties) coincide.
std::vector<int> acc_flags(std::span<const EvalPair> pairs);
double acc_at_1(std::span<const EvalPair> pairs);

struct AveragedPearson {
  double value = 0.0;
  std::size_t included = 0;
  std::size_t excluded = 0;
};

/// Mean per-document Pearson over the five components; documents with a
/// zero-variance prediction or truth are excluded and counted.
AveragedPearson ap_document(std::span<const EvalPair> pairs);

struct EmotionPearson {
  AveragedPearson mean;
  std::array<std::optional<double>, kNumEmotions> per_emotion{};
};

/// Mean over emotions of the Pearson between prediction and truth columns;
/// zero-variance columns are excluded and counted.
EmotionPearson ap_emotion(std::span<const EvalPair> pairs);

double rmse(const EmotionProfile& x, const EmotionProfile& y);
std::vector<double> rmse_per_doc(std::span<const EvalPair> pairs);
double rmse_d(std::span<const EvalPair> pairs);

/// 1-Wasserstein distance on emotion indices 0..4 with ground metric
/// |i - j| scaled by `bin_spacing`: spacing * sum_k |CDF_x(k) - CDF_y(k)|.
double wasserstein(const EmotionProfile& x, const EmotionProfile& y, double bin_spacing = 1.0);
double wd_d(std::span<const EvalPair> pairs, double bin_spacing = 1.0);

struct EvalReport {
  double acc_at_1 = 0.0;
  double ap_document = 0.0;
  double ap_emotion = 0.0;
  double rmse_d = 0.0;
  double wd_d = 0.0;
  std::array<std::optional<double>, kNumEmotions> per_emotion{};
  std::size_t documents = 0;
  std::size_t ap_document_excluded = 0;
  std::size_t ap_emotion_excluded = 0;
};

/// Pearson-based fields are NaN when every document (or emotion) was
/// excluded; the exclusion counts say why.
EvalReport evaluate(std::span<const EvalPair> pairs);

/// Header and row in the column order Acc@1 (%), AP_document, AP_emotion,
/// RMSE_D, WD_D, followed by the exclusion counts.
void write_report_header(std::ostream& out);
void write_report_row(std::ostream& out, const std::string& label, const EvalReport& r);

struct McNemarResult {
  std::size_t b = 0;  // first correct, second wrong
  std::size_t c = 0;  // first wrong, second correct
  /// Empty when b + c == 0 (no discordance).
  std::optional<double> statistic;
  std::optional<double> p_value;
};

/// Continuity-corrected McNemar test on paired 0/1 correctness flags.
McNemarResult mcnemar(std::span<const int> flags_a, std::span<const int> flags_b);

/// Upper tail of the chi-square distribution with one degree of freedom.
double chi2_1_sf(double x);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value
/// Q(sqrt(n m / (n + m)) D).
KsResult ks_test(std::span<const double> a, std::span<const double> b);

/// Kolmogorov survival function Q(x) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 x^2).
double kolmogorov_sf(double x);

}  // namespace redaff
