#include <gtest/gtest.h>

#include "vimcan/vimcan.hpp"

using namespace vimcan;

TEST(Smoke, TinyModelForward) {
  auto m = model::init_model(model::ModelConfig::tiny(), 0);
  const auto s = preprocess::synth_sequence(1, 9, 0.0);
  const auto y = m.predict(s.keypoints, s.imu);
  EXPECT_EQ(y.frames, 9u);
}
