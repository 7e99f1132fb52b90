// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ranger/campaign.hpp"
#include "ranger/engine.hpp"
#include "ranger/error.hpp"
#include "ranger/graph.hpp"
#include "ranger/io.hpp"
#include "ranger/modelzoo/datasets.hpp"
#include "ranger/modelzoo/metrics.hpp"
#include "ranger/modelzoo/models.hpp"
#include "ranger/modelzoo/trainer.hpp"
#include "ranger/numerics.hpp"
#include "ranger/profiler.hpp"
#include "ranger/ranger_pass.hpp"
#include "ranger/rng.hpp"
#include "ranger/tensor.hpp"
