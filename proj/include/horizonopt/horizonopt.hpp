#ifndef HORIZONOPT__HORIZONOPT_HPP_
#define HORIZONOPT__HORIZONOPT_HPP_

#include "admissible_set.hpp"
#include "errors.hpp"
#include "expression.hpp"
#include "horizon.hpp"
#include "mesh.hpp"
#include "nonlinearity.hpp"
#include "objective.hpp"
#include "operators.hpp"
#include "optimizer.hpp"
#include "problem.hpp"
#include "projection.hpp"
#include "solvers.hpp"
#include "weighted_spaces.hpp"

#endif  // HORIZONOPT__HORIZONOPT_HPP_
