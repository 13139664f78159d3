#pragma once

#include "adko/benchmark.hpp"
#include "adko/config.hpp"
#include "adko/design_space.hpp"
#include "adko/error.hpp"
#include "adko/fidelity_mc.hpp"
#include "adko/gp.hpp"
#include "adko/graph.hpp"
#include "adko/lm.hpp"
#include "adko/lm_adapter.hpp"
#include "adko/metrics.hpp"
#include "adko/reasoning.hpp"
#include "adko/rng.hpp"
#include "adko/runtime.hpp"
#include "adko/token.hpp"
