#pragma once

#include "catnet/common.hpp"
#include "catnet/polynomial.hpp"
#include "catnet/newton.hpp"
#include "catnet/catastrophe.hpp"
#include "catnet/network.hpp"
#include "catnet/control_path.hpp"
#include "catnet/diagnostics.hpp"
#include "catnet/cascade.hpp"
#include "catnet/copula.hpp"
#include "catnet/json_io.hpp"
#include "catnet/scenario.hpp"
