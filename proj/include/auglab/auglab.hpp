#pragma once

// Umbrella header.

#include "auglab/augment/mix.hpp"
#include "auglab/augment/ops.hpp"
#include "auglab/augment/pipeline.hpp"
#include "auglab/augment/policy.hpp"
#include "auglab/cifar_io.hpp"
#include "auglab/config.hpp"
#include "auglab/dataset.hpp"
#include "auglab/errors.hpp"
#include "auglab/image.hpp"
#include "auglab/metrics.hpp"
#include "auglab/nn/checkpoint.hpp"
#include "auglab/nn/gradcheck.hpp"
#include "auglab/nn/layers.hpp"
#include "auglab/nn/loss.hpp"
#include "auglab/nn/model.hpp"
#include "auglab/nn/optim.hpp"
#include "auglab/nn/tensor.hpp"
#include "auglab/rng.hpp"
#include "auglab/stats.hpp"
#include "auglab/synthetic.hpp"
#include "auglab/train/schedule.hpp"
#include "auglab/train/trainer.hpp"
#include "auglab/version.hpp"
