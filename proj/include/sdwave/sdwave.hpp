#pragma once

#include "sdwave/asymptotics.hpp"
#include "sdwave/config.hpp"
#include "sdwave/error.hpp"
#include "sdwave/estimators.hpp"
#include "sdwave/functionals.hpp"
#include "sdwave/model.hpp"
#include "sdwave/numeric.hpp"
#include "sdwave/simulator.hpp"
#include "sdwave/stats.hpp"
