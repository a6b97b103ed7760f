#pragma once

// Numerical core. The scenario and experiment layers (scenario.hpp, experiments.hpp)
// additionally need nlohmann/json and OpenSSL and are not included here.

#include "impulse/bellman.hpp"
#include "impulse/costs.hpp"
#include "impulse/discounting.hpp"
#include "impulse/errors.hpp"
#include "impulse/linalg.hpp"
#include "impulse/model.hpp"
#include "impulse/montecarlo.hpp"
#include "impulse/process.hpp"
#include "impulse/stationary.hpp"
#include "impulse/validation.hpp"
