#pragma once

#include "fwdopt/errors.hpp"
#include "fwdopt/forward_calculus.hpp"
#include "fwdopt/information_flow.hpp"
#include "fwdopt/levy_measure.hpp"
#include "fwdopt/market_model.hpp"
#include "fwdopt/optimal_control.hpp"
#include "fwdopt/optimality_audit.hpp"
#include "fwdopt/parallel.hpp"
#include "fwdopt/random.hpp"
#include "fwdopt/scenario.hpp"
#include "fwdopt/statistics.hpp"
#include "fwdopt/time_grid.hpp"
#include "fwdopt/utility.hpp"
