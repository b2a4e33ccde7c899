#include <gtest/gtest.h>

#include <boost/math/special_functions/gamma.hpp>
#include <random>

#include "ctalab/metrics.hpp"
#include "oracles.hpp"

using namespace ctalab;
using namespace ctalab::metrics;

namespace {

std::vector<Label> labels(const std::vector<int>& v) {
    std::vector<Label> out;
    for (int x : v) out.push_back(x ? Label::positive : Label::negative);
    return out;
}

}  // namespace

TEST(Evaluate, PerfectPredictions) {
    auto t = labels({1, 0, 1, 1, 0});
    auto r = evaluate_predictions(t, t);
    EXPECT_EQ(r.precision, 1.0);
    EXPECT_EQ(r.recall, 1.0);
    EXPECT_EQ(r.f1_binary, 1.0);
    EXPECT_EQ(r.f1_macro, 1.0);
    EXPECT_EQ(r.kappa, 1.0);
}

TEST(Evaluate, HandComputedCounts) {
    ConfusionCounts c{3, 1, 1, 5};
    auto r = report_from_counts(c);
    EXPECT_DOUBLE_EQ(r.precision, 0.75);
    EXPECT_DOUBLE_EQ(r.recall, 0.75);
    EXPECT_DOUBLE_EQ(r.f1_binary, 0.75);
    EXPECT_NEAR(r.f1_macro, (0.75 + 5.0 / 6.0) / 2, 1e-12);
    EXPECT_NEAR(r.f1_macro, 0.7917, 5e-5);
}

TEST(Evaluate, ZeroDenominators) {
    auto t = labels({0, 0, 0});
    auto r = evaluate_predictions(t, t);
    EXPECT_EQ(r.precision, 0.0);
    EXPECT_EQ(r.recall, 0.0);
    EXPECT_EQ(r.f1_binary, 0.0);
    EXPECT_DOUBLE_EQ(r.f1_macro, 0.5);
    EXPECT_EQ(safe_f1(0, 0), 0.0);
}

TEST(Evaluate, Errors) {
    auto a = labels({1, 0});
    auto b = labels({1});
    EXPECT_THROW(evaluate_predictions(a, b), Error);
    EXPECT_THROW(evaluate_predictions(std::vector<Label>{}, std::vector<Label>{}), Error);
}

TEST(Evaluate, PrecisionRecallHarmonicMean) {
    EXPECT_NEAR(safe_f1(0.95, 0.75), 0.8382, 5e-5);
}

TEST(Evaluate, RandomAgainstRecount) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 300; ++trial) {
        std::size_t n = 1 + rng() % 1000;
        std::vector<int> t(n), p(n);
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = rng() % 2;
            p[i] = rng() % 2;
        }
        auto r = evaluate_predictions(labels(t), labels(p));
        auto c = tsupport::oracle_counts(t, p);
        EXPECT_EQ(r.counts.tp, c.tp);
        EXPECT_EQ(r.counts.tn, c.tn);
        EXPECT_NEAR(r.precision, tsupport::oracle_div(c.tp, c.tp + c.fp), 1e-12);
        EXPECT_NEAR(r.recall, tsupport::oracle_div(c.tp, c.tp + c.fn), 1e-12);
        EXPECT_NEAR(r.f1_binary, tsupport::oracle_f1(c.tp, c.fp, c.fn), 1e-12);
        EXPECT_NEAR(r.f1_macro, tsupport::oracle_macro_f1(c), 1e-12);
        EXPECT_NEAR(r.kappa, tsupport::oracle_kappa(t, p), 1e-12);
    }
}

TEST(Kappa, Examples) {
    std::vector<int> a{1, 1, 0, 0}, b{1, 0, 0, 0};
    EXPECT_DOUBLE_EQ(cohens_kappa(a, b), 0.5);
    EXPECT_DOUBLE_EQ(cohens_kappa(a, a), 1.0);
    std::vector<int> constant{1, 1, 1, 1}, mixed{1, 0, 1, 0};
    EXPECT_DOUBLE_EQ(cohens_kappa(constant, mixed), 0.0);
    std::vector<int> same{2, 2, 2};
    EXPECT_DOUBLE_EQ(cohens_kappa(same, same), 1.0);
    EXPECT_THROW(cohens_kappa(std::vector<int>{}, std::vector<int>{}), Error);
}

TEST(Kappa, SymmetricAndPermutationInvariant) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t n = 2 + rng() % 40;
        std::vector<int> a(n), b(n), pa(n), pb(n);
        int perm[3] = {2, 0, 1};
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = rng() % 3;
            b[i] = rng() % 3;
            pa[i] = perm[a[i]];
            pb[i] = perm[b[i]];
        }
        double k = cohens_kappa(a, b);
        EXPECT_NEAR(k, cohens_kappa(b, a), 1e-12);
        EXPECT_NEAR(k, cohens_kappa(pa, pb), 1e-12);
        EXPECT_NEAR(k, tsupport::oracle_kappa(a, b), 1e-9);
    }
}

TEST(Alpha, WorkedExample) {
    VoteMatrix m{{1, 1}, {1, 0}, {0, 0}, {0, 0}};
    double a = krippendorff_alpha(m);
    EXPECT_NEAR(a, 1 - 0.25 / (15.0 / 28.0), 1e-12);
    EXPECT_NEAR(a, 0.5333, 1e-4);
    EXPECT_NEAR(a, tsupport::oracle_alpha(m), 1e-12);
}

TEST(Alpha, PerfectAgreementAndMissingColumn) {
    VoteMatrix all{{1, 1, 1}, {0, 0, std::nullopt}, {1, 1, 1}};
    EXPECT_DOUBLE_EQ(krippendorff_alpha(all), 1.0);
    VoteMatrix with_missing{{1, 1, std::nullopt}, {1, 0, std::nullopt}, {0, 0, std::nullopt}, {0, 0, std::nullopt}};
    VoteMatrix without{{1, 1}, {1, 0}, {0, 0}, {0, 0}};
    EXPECT_DOUBLE_EQ(krippendorff_alpha(with_missing), krippendorff_alpha(without));
    VoteMatrix none{{1, std::nullopt}, {std::nullopt, 0}};
    EXPECT_THROW(krippendorff_alpha(none), Error);
}

TEST(Alpha, RandomAgainstPairOracle) {
    std::mt19937_64 rng(3);
    int checked = 0;
    while (checked < 300) {
        std::size_t items = 1 + rng() % 20, coders = 2 + rng() % 9;
        int cats = 2 + static_cast<int>(rng() % 3);
        VoteMatrix m(items, std::vector<std::optional<int>>(coders));
        for (auto& row : m)
            for (auto& v : row)
                if (rng() % 100 >= 30) v = static_cast<int>(rng() % cats);
        double oracle = tsupport::oracle_alpha(m);
        bool pairable = false;
        for (const auto& row : m) {
            int valid = 0;
            for (const auto& v : row) valid += v.has_value();
            pairable |= valid >= 2;
        }
        if (!pairable) {
            EXPECT_THROW(krippendorff_alpha(m), Error);
            continue;
        }
        EXPECT_NEAR(krippendorff_alpha(m), oracle, 1e-9);
        ++checked;
    }
}

TEST(ChiSquare, ClosedFormTwoByTwo) {
    ContingencyTable t{{"a", "b"}, {"x", "y"}, {{30, 10}, {10, 30}}};
    auto r = chi_square_test(t);
    EXPECT_NEAR(r.statistic, 20.0, 1e-12);
    EXPECT_EQ(r.df, 1);
    EXPECT_NEAR(r.cramers_v, 0.5, 1e-12);
    EXPECT_NEAR(r.p_value, boost::math::gamma_q(0.5, 10.0), 1e-12);
}

TEST(ChiSquare, IndependentTable) {
    ContingencyTable t{{"a", "b"}, {"x", "y"}, {{10, 20}, {20, 40}}};
    auto r = chi_square_test(t);
    EXPECT_NEAR(r.statistic, 0.0, 1e-12);
    EXPECT_NEAR(r.p_value, 1.0, 1e-12);
}

TEST(ChiSquare, SixteenRowShape) {
    ContingencyTable t;
    std::mt19937_64 rng(9);
    for (int i = 0; i < 16; ++i) {
        t.row_labels.push_back("r" + std::to_string(i));
        t.counts.push_back({static_cast<double>(5 + rng() % 50), static_cast<double>(5 + rng() % 50)});
    }
    t.col_labels = {"cta", "no_cta"};
    EXPECT_EQ(chi_square_test(t).df, 15);
}

TEST(ChiSquare, ZeroMarginalRejected) {
    ContingencyTable t{{"a", "b"}, {"x", "y"}, {{0, 0}, {3, 4}}};
    EXPECT_THROW(chi_square_test(t), Error);
}

TEST(ChiSquare, PermutationAndScaling) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t r = 2 + rng() % 4, c = 2 + rng() % 3;
        ContingencyTable t;
        t.counts.assign(r, std::vector<double>(c));
        for (auto& row : t.counts)
            for (auto& x : row) x = static_cast<double>(1 + rng() % 30);
        for (std::size_t i = 0; i < r; ++i) t.row_labels.push_back(std::to_string(i));
        for (std::size_t j = 0; j < c; ++j) t.col_labels.push_back(std::to_string(j));
        auto base = chi_square_test(t);
        EXPECT_NEAR(base.statistic, tsupport::oracle_chi_square(t.counts), 1e-9);
        EXPECT_EQ(base.df, static_cast<int>((r - 1) * (c - 1)));

        auto perm = t;
        std::reverse(perm.counts.begin(), perm.counts.end());
        for (auto& row : perm.counts) std::rotate(row.begin(), row.begin() + 1, row.end());
        EXPECT_NEAR(chi_square_test(perm).statistic, base.statistic, 1e-9);

        auto scaled = t;
        for (auto& row : scaled.counts)
            for (auto& x : row) x *= 3;
        EXPECT_NEAR(chi_square_test(scaled).statistic, 3 * base.statistic, 1e-8);
        EXPECT_NEAR(base.p_value, boost::math::gamma_q(base.df / 2.0, base.statistic / 2.0), 1e-10);
    }
}

TEST(CramersV, Examples) {
    EXPECT_DOUBLE_EQ(cramers_v(20, 80, 2, 2), 0.5);
    EXPECT_NEAR(cramers_v(501.84, 2920, 2, 2), 0.4146, 1e-4);
    EXPECT_EQ(cramers_v(0, 10, 3, 2), 0.0);
    EXPECT_THROW(cramers_v(1, 0, 2, 2), Error);
    EXPECT_THROW(cramers_v(1, 10, 1, 2), Error);
}

TEST(GammaQ, MatchesBoostAcrossRange) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> ua(0.5, 60), ux(0.0, 200);
    for (int i = 0; i < 2000; ++i) {
        double a = ua(rng), x = ux(rng);
        EXPECT_NEAR(gamma_q(a, x), boost::math::gamma_q(a, x), 1e-10) << a << " " << x;
    }
    EXPECT_DOUBLE_EQ(chi_square_sf(0, 3), 1.0);
}

TEST(EvalCsv, FixedColumns) {
    EXPECT_EQ(eval_csv_header(), "model,prompt,kappa,f1_macro,f1_binary,precision,recall,n");
    auto r = report_from_counts({3, 1, 1, 5});
    auto row = eval_csv_row("m", "few_shot", r);
    EXPECT_EQ(row.rfind("m,few_shot,", 0), 0u);
    EXPECT_EQ(std::count(row.begin(), row.end(), ','), 7);
    auto j = to_json(r);
    for (auto key : {"kappa", "f1_macro", "f1_binary", "precision", "recall"}) EXPECT_TRUE(j.contains(key));
}
