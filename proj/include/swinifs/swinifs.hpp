#pragma once

// Everything except the OpenCV-backed image_io.hpp and plot.hpp.

#include "swinifs/archive.hpp"
#include "swinifs/autograd.hpp"
#include "swinifs/checkpoint.hpp"
#include "swinifs/config.hpp"
#include "swinifs/dataset.hpp"
#include "swinifs/degradation.hpp"
#include "swinifs/feature_net.hpp"
#include "swinifs/heatmaps.hpp"
#include "swinifs/landmarks.hpp"
#include "swinifs/layout.hpp"
#include "swinifs/losses.hpp"
#include "swinifs/metrics.hpp"
#include "swinifs/model.hpp"
#include "swinifs/ops.hpp"
#include "swinifs/optim.hpp"
#include "swinifs/resample.hpp"
#include "swinifs/seed.hpp"
#include "swinifs/synthetic.hpp"
#include "swinifs/tensor.hpp"
#include "swinifs/trainer.hpp"
