#pragma once

#include "vimcan/error.hpp"
#include "vimcan/autodiff/tensor.hpp"
#include "vimcan/autodiff/ops.hpp"
#include "vimcan/autodiff/gradcheck.hpp"
#include "vimcan/nn.hpp"
#include "vimcan/skeleton.hpp"
#include "vimcan/ssm/selective_scan.hpp"
#include "vimcan/ssm/ss2d.hpp"
#include "vimcan/ssm/blocks.hpp"
#include "vimcan/fusion/cross_attention.hpp"
#include "vimcan/fusion/cross_mamba.hpp"
#include "vimcan/fusion/temporal_attention.hpp"
#include "vimcan/preprocess/quaternion.hpp"
#include "vimcan/preprocess/sequences.hpp"
#include "vimcan/preprocess/keypoints.hpp"
#include "vimcan/preprocess/calibration.hpp"
#include "vimcan/preprocess/synth.hpp"
#include "vimcan/preprocess/dataset_io.hpp"
#include "vimcan/model/config.hpp"
#include "vimcan/model/vimcan_model.hpp"
#include "vimcan/model/checkpoint.hpp"
#include "vimcan/losses.hpp"
#include "vimcan/metrics.hpp"
#include "vimcan/train/optimizer.hpp"
#include "vimcan/train/trainer.hpp"
#include "vimcan/train/bench.hpp"
#include "vimcan/train/gradcheck_suite.hpp"
