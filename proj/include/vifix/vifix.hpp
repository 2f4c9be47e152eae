#pragma once

#include "vifix/errors.hpp"
#include "vifix/space.hpp"
#include "vifix/operators.hpp"
#include "vifix/schedules.hpp"
#include "vifix/solvers.hpp"
#include "vifix/verify.hpp"
