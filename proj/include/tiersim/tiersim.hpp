#pragma once

// Umbrella header for the tiered-memory QoS simulator.

#include "tiersim/baselines.hpp"
#include "tiersim/controller.hpp"
#include "tiersim/core.hpp"
#include "tiersim/mercury.hpp"
#include "tiersim/perfmodel.hpp"
#include "tiersim/profiler.hpp"
#include "tiersim/report.hpp"
#include "tiersim/scenario_io.hpp"
#include "tiersim/scenarios.hpp"
#include "tiersim/sim.hpp"
