#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include <cellpinn/error.hpp>
#include <cellpinn/optim.hpp>

using namespace cellpinn;

TEST(Schedule, StepDecay) {
    OptimizerConfig c;
    EXPECT_DOUBLE_EQ(lr_at(c, 0), 0.005);
    EXPECT_DOUBLE_EQ(lr_at(c, 799), 0.005);
    EXPECT_DOUBLE_EQ(lr_at(c, 800), 0.002);
    EXPECT_NEAR(lr_at(c, 1600), 0.0008, 1e-18);
    EXPECT_NEAR(lr_at(c, 5999), 0.005 * std::pow(0.4, 7), 1e-18);
}

TEST(Schedule, InvalidConfigs) {
    OptimizerConfig c;
    c.decay = 1.0;
    EXPECT_THROW(c.validate(), ContractViolation);
    c = OptimizerConfig{};
    c.decay_interval = 0;
    EXPECT_THROW(c.validate(), ContractViolation);
    EXPECT_THROW(lr_at(OptimizerConfig{}, -1), ContractViolation);
}

TEST(Adam, ZeroGradientLeavesParameters) {
    OptimizerConfig c;
    AdamState st(3);
    std::vector<double> p = {1.0, -2.0, 3.0}, g(3, 0.0);
    std::vector<std::uint8_t> mask(3, 1);
    adam_update(c, st, p, g, mask, 0.01);
    EXPECT_EQ(p, (std::vector<double>{1.0, -2.0, 3.0}));
}

TEST(Adam, FirstStepHasMagnitudeLr) {
    // m_hat = g, v_hat = g^2 -> step = lr * g / (|g| + eps).
    OptimizerConfig c;
    AdamState st(1);
    std::vector<double> p = {0.0}, g = {0.37};
    std::vector<std::uint8_t> mask = {1};
    adam_update(c, st, p, g, mask, 0.01);
    EXPECT_NEAR(p[0], -0.01 * 0.37 / (0.37 + 1e-8), 1e-15);
}

TEST(Adam, ConvergesOnQuadratic) {
    OptimizerConfig c;
    AdamState st(1);
    std::vector<double> p = {1.0}, g(1);
    std::vector<std::uint8_t> mask = {1};
    for (int k = 0; k < 1000; ++k) {
        g[0] = p[0];
        adam_update(c, st, p, g, mask, 0.01);
    }
    EXPECT_LT(std::abs(p[0]), 1e-3);
}

TEST(Adam, MaskedEntriesAndMomentsUntouched) {
    OptimizerConfig c;
    AdamState st(2);
    std::vector<double> p = {1.0, 1.0}, g = {0.5, 0.5};
    std::vector<std::uint8_t> mask = {1, 0};
    for (int k = 0; k < 10; ++k) adam_update(c, st, p, g, mask, 0.01);
    EXPECT_EQ(p[1], 1.0);
    EXPECT_EQ(st.m[1], 0.0);
    EXPECT_EQ(st.v[1], 0.0);
    EXPECT_NE(p[0], 1.0);
    EXPECT_EQ(st.step, 10);
}

TEST(Adam, NonFiniteGradientThrowsBeforeWriting) {
    OptimizerConfig c;
    AdamState st(2);
    std::vector<double> p = {1.0, 2.0}, g = {0.1, std::numeric_limits<double>::infinity()};
    std::vector<std::uint8_t> mask = {1, 1};
    EXPECT_THROW(adam_update(c, st, p, g, mask, 0.01), TrainingError);
    EXPECT_EQ(p, (std::vector<double>{1.0, 2.0}));
}

TEST(Adam, SizeMismatchThrows) {
    OptimizerConfig c;
    AdamState st(2);
    std::vector<double> p = {1.0, 2.0}, g = {0.1};
    std::vector<std::uint8_t> mask = {1, 1};
    EXPECT_THROW(adam_update(c, st, p, g, mask, 0.01), ContractViolation);
}
