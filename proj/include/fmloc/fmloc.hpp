#ifndef FMLOC_FMLOC_HPP
#define FMLOC_FMLOC_HPP

#include "fmloc/topology.hpp"
#include "fmloc/disorder.hpp"
#include "fmloc/model.hpp"
#include "fmloc/numerics.hpp"
#include "fmloc/sampling.hpp"
#include "fmloc/estimators.hpp"
#include "fmloc/inequality_lab.hpp"
#include "fmloc/runner/config.hpp"
#include "fmloc/runner/record.hpp"
#include "fmloc/runner/run.hpp"

#endif  // FMLOC_FMLOC_HPP
