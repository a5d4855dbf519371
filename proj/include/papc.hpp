#pragma once

#include "papc/errors.hpp"
#include "papc/functions.hpp"
#include "papc/io.hpp"
#include "papc/linops.hpp"
#include "papc/problems.hpp"
#include "papc/prox.hpp"
#include "papc/solver.hpp"
