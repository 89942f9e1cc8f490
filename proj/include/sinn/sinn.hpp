// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "sinn/checkpoint.hpp"
#include "sinn/data.hpp"
#include "sinn/error.hpp"
#include "sinn/graph.hpp"
#include "sinn/metrics.hpp"
#include "sinn/model.hpp"
#include "sinn/numerics.hpp"
#include "sinn/observation.hpp"
#include "sinn/rng.hpp"
#include "sinn/training.hpp"
