#pragma once

#include "kwlngb/errors.hpp"
#include "kwlngb/specfun.hpp"
#include "kwlngb/random.hpp"
#include "kwlngb/distributions.hpp"
#include "kwlngb/fit.hpp"
#include "kwlngb/discrimination.hpp"
#include "kwlngb/divergence.hpp"
#include "kwlngb/montecarlo.hpp"
