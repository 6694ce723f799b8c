// Copyright 2026 The PSOT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "psot/ablation.hpp"
#include "psot/ablation_runner.hpp"
#include "psot/activations.hpp"
#include "psot/autodiff.hpp"
#include "psot/batching.hpp"
#include "psot/bundle.hpp"
#include "psot/checkpoint.hpp"
#include "psot/errors.hpp"
#include "psot/gradcheck.hpp"
#include "psot/graphs.hpp"
#include "psot/model.hpp"
#include "psot/model_config.hpp"
#include "psot/model_gradcheck.hpp"
#include "psot/numerics.hpp"
#include "psot/optimizer.hpp"
#include "psot/parameters.hpp"
#include "psot/random.hpp"
#include "psot/synthetic.hpp"
#include "psot/tensor.hpp"
#include "psot/training.hpp"
#include "psot/visualize.hpp"
