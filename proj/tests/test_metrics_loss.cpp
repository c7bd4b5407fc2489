#include <gtest/gtest.h>

#include <random>

#include "support/support.hpp"

using namespace glider;

// ---------------------------------------------------------------------------
// Pearson

TEST(Pearson, FixedCase) {
  auto r = pearson(PairedScores({1, 2, 3, 4}, {1, 3, 2, 4}));
  ASSERT_TRUE(r);
  EXPECT_NEAR(r.value(), 0.8, 1e-12);
}

TEST(Pearson, PerfectAndInverse) {
  EXPECT_NEAR(pearson(PairedScores({1, 2, 3}, {2, 4, 6})).value(), 1.0, 1e-15);
  EXPECT_NEAR(pearson(PairedScores({1, 2, 3}, {3, 2, 1})).value(), -1.0, 1e-15);
}

TEST(Pearson, DegenerateAndInvalid) {
  EXPECT_FALSE(pearson(PairedScores({2, 2, 2}, {1, 2, 3})));
  EXPECT_FALSE(pearson(PairedScores({1}, {1})));
  EXPECT_THROW(PairedScores({1, 2}, {1}), ValidationError);
  EXPECT_THROW(PairedScores({}, {}), ValidationError);
  EXPECT_THROW(PairedScores({1, std::nan("")}, {1, 2}), ValidationError);
}

TEST(Pearson, MatchesOracle) {
  std::mt19937_64 rng(1);
  int checked = 0;
  for (int i = 0; i < 500; ++i) {
    const std::size_t n = 2 + rng() % 11;
    std::vector<double> x(n), y(n);
    for (std::size_t k = 0; k < n; ++k) {
      x[k] = static_cast<double>(1 + rng() % 5);
      y[k] = std::uniform_real_distribution<double>(-10, 10)(rng);
    }
    auto r = pearson(PairedScores(x, y));
    if (!r) continue;
    ++checked;
    EXPECT_NEAR(r.value(), testsupport::oracle_pearson(x, y), 1e-9);
  }
  EXPECT_GT(checked, 400);
}

// ---------------------------------------------------------------------------
// F1

TEST(F1, FixedCase) {
  std::vector<int> gold{1, 1, 0, 0, 1}, pred{1, 0, 0, 1, 1};
  EXPECT_NEAR(f1_binary(pred, gold).value(), 2.0 / 3.0, 1e-12);
}

TEST(F1, EdgeCases) {
  std::vector<int> zeros{0, 0, 0}, ones{1, 1, 1};
  EXPECT_FALSE(f1_binary(zeros, zeros));
  EXPECT_EQ(f1_binary(zeros, ones).value(), 0.0);
  EXPECT_EQ(f1_binary(ones, ones).value(), 1.0);
  std::vector<int> bad{0, 2, 1};
  EXPECT_THROW(f1_binary(bad, ones), ValidationError);
  std::vector<int> short_one{1};
  EXPECT_THROW(f1_binary(short_one, ones), ValidationError);
}

TEST(F1, MatchesOracle) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 500; ++i) {
    const std::size_t n = 1 + rng() % 12;
    std::vector<int> p(n), g(n);
    for (std::size_t k = 0; k < n; ++k) {
      p[k] = static_cast<int>(rng() % 2);
      g[k] = static_cast<int>(rng() % 2);
    }
    auto ours = f1_binary(p, g);
    auto oracle = testsupport::oracle_f1(p, g);
    ASSERT_EQ(ours.has_value(), oracle.has_value());
    if (oracle) EXPECT_NEAR(ours.value(), *oracle, 1e-9);
  }
}

// ---------------------------------------------------------------------------
// Krippendorff

TEST(Krippendorff, FixedCase) {
  auto m = AnnotationMatrix::from_ints({{1, 1}, {1, 1}, {0, 0}, {0, 1}});
  EXPECT_NEAR(krippendorff_alpha_nominal(m).value(), 8.0 / 15.0, 1e-12);
}

TEST(Krippendorff, PerfectAgreementAndDegenerate) {
  auto perfect = AnnotationMatrix::from_ints({{1, 1, 1}, {2, 2, std::nullopt}, {3, 3, 3}});
  EXPECT_NEAR(krippendorff_alpha_nominal(perfect).value(), 1.0, 1e-12);
  auto single = AnnotationMatrix::from_ints({{1, 1}, {1, 1}});
  EXPECT_FALSE(krippendorff_alpha_nominal(single));
}

TEST(Krippendorff, MatrixValidation) {
  EXPECT_THROW(AnnotationMatrix::from_ints({{1, 1}}), ValidationError);
  EXPECT_THROW(AnnotationMatrix::from_ints({{1}, {1}}), ValidationError);
  EXPECT_THROW(AnnotationMatrix::from_ints({{1, 1}, {1}}), ValidationError);
  EXPECT_THROW(AnnotationMatrix::from_ints({{1, std::nullopt}, {std::nullopt, 2}}), ValidationError);
}

TEST(Krippendorff, MatchesOracleWithMissingValues) {
  std::mt19937_64 rng(3);
  int checked = 0;
  for (int i = 0; i < 500; ++i) {
    const std::size_t items = 2 + rng() % 11;
    const std::size_t raters = 2 + rng() % 4;
    std::vector<std::vector<std::optional<int>>> rows(items, std::vector<std::optional<int>>(raters));
    for (auto& row : rows) {
      for (auto& v : row) {
        if (rng() % 5 != 0) v = static_cast<int>(rng() % 3);
      }
    }
    std::optional<AnnotationMatrix> m;
    try {
      m.emplace(AnnotationMatrix::from_ints(rows));
    } catch (const ValidationError&) {
      continue;
    }
    auto ours = krippendorff_alpha_nominal(*m);
    auto oracle = testsupport::oracle_alpha(rows);
    ASSERT_EQ(ours.has_value(), oracle.has_value());
    if (oracle) {
      ++checked;
      EXPECT_NEAR(ours.value(), *oracle, 1e-9);
    }
  }
  EXPECT_GT(checked, 300);
}

// ---------------------------------------------------------------------------
// Corpus statistics

TEST(CorpusStats, WordCounts) {
  EXPECT_EQ(count_words(""), 0U);
  EXPECT_EQ(count_words("  one\ttwo\nthree  "), 3U);
  auto record = testsupport::harry_potter_record();
  EXPECT_EQ(record_words(record, WordBasis::DataOnly), 10U + 6U + 9U);
  EXPECT_EQ(record_words(record, WordBasis::FullPrompt), count_words(build_judge_prompt(record)));
}

TEST(CorpusStats, Aggregates) {
  std::vector<EvaluationRecord> records{testsupport::simple_record(1), testsupport::simple_record(2, Scale::Binary),
                                        testsupport::harry_potter_record().with_metadata("domain", "Books")};
  auto stats = corpus_stats(records, WordBasis::DataOnly);
  ASSERT_TRUE(stats);
  EXPECT_EQ(stats->count, 3U);
  EXPECT_EQ(stats->min_words, 17U);
  EXPECT_EQ(stats->max_words, 25U);
  EXPECT_DOUBLE_EQ(stats->mean_words(), 19.667);
  EXPECT_EQ(stats->scales.at("likert5"), 1U);
  EXPECT_EQ(stats->domains.at("unknown"), 2U);
  EXPECT_FALSE(corpus_stats({}));

  CorpusStats a, b, all;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto words = record_words(records[i], WordBasis::FullPrompt);
    (i < 2 ? a : b).add(words, "s", "d");
    all.add(words, "s", "d");
  }
  CorpusStats merged = b;
  merged.merge(a);
  EXPECT_EQ(merged.to_json(), all.to_json());
}

// ---------------------------------------------------------------------------
// Loss

namespace {

LossInputs from_rho(double rho_w, double rho_l, double beta, double alpha, double logp_w = -20.0) {
  return LossInputs(logp_w, -20.0, logp_w - rho_w, -20.0 - rho_l, beta, alpha);
}

double total_at(double a, double b, double c, double d, double beta, double alpha, const LossOptions& o = {}) {
  return apo_zero_nll(LossInputs(a, b, c, d, beta, alpha), o).total;
}

}  // namespace

TEST(Loss, DocumentedExamples) {
  auto zero = apo_zero_nll(from_rho(0, 0, 0.1, 0));
  EXPECT_DOUBLE_EQ(zero.apo_term, 1.0);
  EXPECT_DOUBLE_EQ(zero.total, 1.0);
  // High-precision reference values: 1 - s(0.2) + s(-0.2) and the same plus 5.
  EXPECT_NEAR(apo_zero_nll(from_rho(2, -2, 0.1, 0)).total, 0.9003320053750442, 1e-12);
  auto with_nll = apo_zero_nll(from_rho(2, -2, 0.1, 1, -5.0));
  EXPECT_NEAR(with_nll.total, 5.9003320053750442, 1e-12);
  EXPECT_DOUBLE_EQ(with_nll.nll_term, 5.0);
  EXPECT_DOUBLE_EQ(with_nll.total, with_nll.apo_term + with_nll.nll_term);
}

TEST(Loss, Defaults) {
  LossInputs in(-1, -2, -1, -2);
  EXPECT_EQ(in.beta(), 0.1);
  EXPECT_EQ(in.alpha(), 1.0);
}

TEST(Loss, InputValidation) {
  EXPECT_THROW(LossInputs(0.1, -1, -1, -1), ValidationError);
  EXPECT_THROW(LossInputs(-1, -1, -1, -1, 0.0), ValidationError);
  EXPECT_THROW(LossInputs(-1, -1, -1, -1, 0.1, -1), ValidationError);
  EXPECT_THROW(LossInputs(-INFINITY, -1, -1, -1), ValidationError);
  EXPECT_THROW(apo_zero_nll(LossInputs(-1, -1, -1, -1), LossOptions{0}), ValidationError);
}

TEST(Loss, TokenNormalization) {
  LossInputs in(-12, -3, -10, -3, 0.1, 2);
  auto plain = apo_zero_nll(in);
  auto norm = apo_zero_nll(in, LossOptions{4});
  EXPECT_DOUBLE_EQ(plain.nll_term, 24.0);
  EXPECT_DOUBLE_EQ(norm.nll_term, 6.0);
  EXPECT_DOUBLE_EQ(norm.apo_term, plain.apo_term);
  EXPECT_DOUBLE_EQ(loss_gradients(in, LossOptions{4}).logp_w_policy - loss_gradients(in).logp_w_policy, 2.0 - 0.5);
}

TEST(Loss, GradientStructure) {
  auto g0 = loss_gradients(from_rho(1.3, 0, 0.2, 0));
  EXPECT_DOUBLE_EQ(g0.logp_l_ref, -g0.logp_l_policy);
  auto with_alpha = loss_gradients(from_rho(1.3, -0.4, 0.2, 1.5));
  auto without = loss_gradients(from_rho(1.3, -0.4, 0.2, 0));
  EXPECT_DOUBLE_EQ(with_alpha.logp_w_policy, without.logp_w_policy - 1.5);
  EXPECT_DOUBLE_EQ(with_alpha.logp_l_policy, without.logp_l_policy);
  EXPECT_DOUBLE_EQ(with_alpha.logp_w_ref, without.logp_w_ref);
  EXPECT_LT(without.logp_w_policy, 0.0);  // raising log pi(y_w) lowers the loss
  EXPECT_GT(without.logp_l_policy, 0.0);  // raising log pi(y_l) raises it
}

TEST(Loss, FiniteDifferences) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> lp(-30.0, -0.01), beta(0.01, 0.5), alpha(0.0, 2.0);
  const double h = 1e-5;
  for (int i = 0; i < 300; ++i) {
    double x[4] = {lp(rng), lp(rng), lp(rng), lp(rng)};
    const double b = beta(rng), a = alpha(rng);
    auto g = loss_gradients(LossInputs(x[0], x[1], x[2], x[3], b, a));
    const double analytic[4] = {g.logp_w_policy, g.logp_l_policy, g.logp_w_ref, g.logp_l_ref};
    for (int k = 0; k < 4; ++k) {
      double up[4] = {x[0], x[1], x[2], x[3]}, down[4] = {x[0], x[1], x[2], x[3]};
      up[k] += h;
      down[k] -= h;
      const double fd = (total_at(up[0], up[1], up[2], up[3], b, a) - total_at(down[0], down[1], down[2], down[3], b, a)) /
                        (2 * h);
      EXPECT_NEAR(analytic[k], fd, 1e-6) << "partial " << k;
    }
  }
}

TEST(Loss, ApoBoundsAndMonotonicity) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> lp(-60.0, 0.0), beta(0.01, 0.5);
  for (int i = 0; i < 5000; ++i) {
    auto out = apo_zero_nll(LossInputs(lp(rng), lp(rng), lp(rng), lp(rng), beta(rng), 1.0));
    EXPECT_GT(out.apo_term, 0.0);
    EXPECT_LT(out.apo_term, 2.0);
  }
  for (int ladder = 0; ladder < 50; ++ladder) {
    const double b = beta(rng);
    double prev_w = 3.0, prev_l = -1.0;
    for (int step = -20; step <= 20; ++step) {
      const double rho = step * 0.5;
      const double w = apo_zero_nll(from_rho(rho, 0, b, 0)).apo_term;
      const double l = apo_zero_nll(from_rho(0, rho, b, 0)).apo_term;
      EXPECT_LT(w, prev_w);
      EXPECT_GT(l, prev_l);
      prev_w = w;
      prev_l = l;
    }
  }
}

TEST(Loss, ShiftInvarianceWithoutNll) {
  const double base = apo_zero_nll(LossInputs(-4, -6, -5, -3, 0.3, 0)).total;
  for (double shift : {-0.5, -1.0, -2.5}) {
    EXPECT_NEAR(apo_zero_nll(LossInputs(-4 + shift, -6, -5 + shift, -3, 0.3, 0)).total, base, 1e-12);
  }
}

TEST(Loss, JsonRows) {
  auto in = loss_inputs_from_json(json{{"logp_w_policy", -5}, {"logp_l_policy", -5}, {"logp_w_ref", -7}, {"logp_l_ref", -3}});
  EXPECT_EQ(in.beta(), 0.1);
  auto out = to_json(apo_zero_nll(in));
  EXPECT_NEAR(out["total"].get<double>(), 5.900332005375044, 1e-12);
  EXPECT_THROW(loss_inputs_from_json(json{{"logp_w_policy", "x"}}), ValidationError);
}
