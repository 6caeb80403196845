#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "schns/regularization.hpp"

using namespace schns;

TEST(PsiBar, PlateauAndTail) {
  const CutoffParams p{2.0};
  EXPECT_EQ(psi_bar(p, 0.0), 1.0);
  EXPECT_EQ(psi_bar(p, 1.0), 1.0);
  EXPECT_EQ(psi_bar(p, 6.0), 0.0);
  EXPECT_EQ(psi_bar(p, 4.0), 0.0);
}

TEST(PsiBar, MonotoneBridge) {
  const CutoffParams p{1.0};
  const double mid = psi_bar(p, 1.5);
  EXPECT_GT(mid, 0.0);
  EXPECT_LT(mid, 1.0);
  EXPECT_NEAR(mid, 0.5, 1e-15);
  EXPECT_GE(psi_bar(p, 1.4), psi_bar(p, 1.6));
  double prev = 1.0;
  for (int k = 0; k <= 1000; ++k) {
    const double v = psi_bar(p, 1.0 + k / 1000.0);
    EXPECT_LE(v, prev);
    prev = v;
  }
}

TEST(PsiBar, RejectsBadArguments) {
  const CutoffParams p{1.0};
  EXPECT_THROW(psi_bar(p, -1.0), ParameterError);
  EXPECT_THROW(psi_bar(p, NAN), DataError);
  EXPECT_THROW(psi_bar(CutoffParams{0.0}, 1.0), ParameterError);
}

TEST(PsiBar, InfiniteRadiusDisables) {
  const CutoffParams p;
  EXPECT_FALSE(p.enabled());
  EXPECT_EQ(psi_bar(p, 1e300), 1.0);
}

TEST(PsiR, ProductOfFactors) {
  const CutoffParams p{1.0};
  EXPECT_EQ(psi_R(p, 0.5, 0.9), 1.0);
  EXPECT_EQ(psi_R(p, 2.0, 0.0), 0.0);
  EXPECT_EQ(psi_R(p, 5.0, 0.1), 0.0);
  EXPECT_DOUBLE_EQ(psi_R(p, 1.5, 0.5), psi_bar(p, 1.5));
  EXPECT_DOUBLE_EQ(psi_R(p, 1.3, 1.7), psi_bar(p, 1.3) * psi_bar(p, 1.7));
}

TEST(PsiBar, DerivativeConstantIsFinite) {
  const double c = psi_bar_profile_constant();
  EXPECT_GT(c, 1.0);
  EXPECT_LT(c, 10.0);
}

TEST(StoppingTime, NeverCrossing) {
  const std::vector<NormSample> t{{0.1, 0.2}, {0.5, 0.3}, {1.0, 1.0}};
  EXPECT_FALSE(stopping_time_index(t, 1.0).has_value());
}

TEST(StoppingTime, FirstCrossing) {
  std::vector<NormSample> t(12, NormSample{0.1, 0.1});
  t[7] = {2.5, 0.0};
  t[9] = {3.0, 3.0};
  EXPECT_EQ(stopping_time_index(t, 1.0, StopNorm::velocity), 7u);
  EXPECT_EQ(stopping_time_index(t, 1.0, StopNorm::phase), 9u);
}

TEST(StoppingTime, ImmediateCrossing) {
  const std::vector<NormSample> t{{2.0, 0.0}, {0.0, 0.0}};
  EXPECT_EQ(stopping_time_index(t, 1.0, StopNorm::velocity), 0u);
}

TEST(StoppingTime, NormVariants) {
  const NormSample s{3.0, 4.0};
  EXPECT_DOUBLE_EQ(combined_norm(s, StopNorm::euclidean), 5.0);
  EXPECT_DOUBLE_EQ(combined_norm(s, StopNorm::sum), 7.0);
  const std::vector<NormSample> t{{1.2, 1.2}};
  EXPECT_EQ(stopping_time_index(t, 1.0, StopNorm::sum), 0u);
  EXPECT_FALSE(stopping_time_index(t, 1.0, StopNorm::euclidean).has_value());
}

TEST(StoppingTime, RejectsBadTrajectories) {
  const std::vector<NormSample> empty;
  EXPECT_THROW(stopping_time_index(empty, 1.0), DataError);
  const std::vector<NormSample> t{{0.0, 0.0}, {NAN, 0.0}};
  EXPECT_THROW(stopping_time_index(t, 1.0), DataError);
}
