#pragma once

#include "isac/acrb.hpp"
#include "isac/errors.hpp"
#include "isac/fim.hpp"
#include "isac/numerics.hpp"
#include "isac/optimizer.hpp"
#include "isac/parallel.hpp"
#include "isac/rng.hpp"
#include "isac/scenario.hpp"
#include "isac/scenario_json.hpp"
