#pragma once

// Umbrella header: the whole library plus the experiment harness.

#include "ccsmc/random.hpp"
#include "ccsmc/normal.hpp"
#include "ccsmc/marginals.hpp"
#include "ccsmc/combinatorics.hpp"
#include "ccsmc/stable.hpp"
#include "ccsmc/generators.hpp"
#include "ccsmc/copula.hpp"
#include "ccsmc/tail_dependence.hpp"
#include "ccsmc/geometry.hpp"
#include "ccsmc/particles.hpp"
#include "ccsmc/kernels.hpp"
#include "ccsmc/gibbs.hpp"
#include "ccsmc/smc_sampler.hpp"
#include "ccsmc/estimators.hpp"
#include "ccsmc/baselines.hpp"
#include "ccsmc/quantiles.hpp"
#include "ccsmc/harness/config.hpp"
#include "ccsmc/harness/metrics.hpp"
#include "ccsmc/harness/experiment.hpp"
