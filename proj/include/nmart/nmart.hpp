#pragma once

#include "nmart/config.hpp"
#include "nmart/controlled.hpp"
#include "nmart/csv.hpp"
#include "nmart/errors.hpp"
#include "nmart/hjb.hpp"
#include "nmart/levy.hpp"
#include "nmart/martingale.hpp"
#include "nmart/operators.hpp"
#include "nmart/problem.hpp"
#include "nmart/quadrature.hpp"
#include "nmart/recipes.hpp"
#include "nmart/rng.hpp"
#include "nmart/stats.hpp"
#include "nmart/types.hpp"
#include "nmart/value_field.hpp"
