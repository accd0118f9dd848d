#pragma once

// Umbrella header: the full propensity-fitting pipeline, estimators,
// diagnostics, simulation benchmarks, and file I/O.

#include "lbcnet/adam.hpp"
#include "lbcnet/benchmark.hpp"
#include "lbcnet/csv.hpp"
#include "lbcnet/dataset.hpp"
#include "lbcnet/diagnostics.hpp"
#include "lbcnet/error.hpp"
#include "lbcnet/estimators.hpp"
#include "lbcnet/generators.hpp"
#include "lbcnet/json_io.hpp"
#include "lbcnet/kernel.hpp"
#include "lbcnet/logistic.hpp"
#include "lbcnet/network.hpp"
#include "lbcnet/objective.hpp"
#include "lbcnet/rng.hpp"
#include "lbcnet/train.hpp"
