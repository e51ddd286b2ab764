#pragma once

#include "fsbayes/errors.hpp"
#include "fsbayes/numeric.hpp"
#include "fsbayes/fspace.hpp"
#include "fsbayes/noise.hpp"
#include "fsbayes/priors.hpp"
#include "fsbayes/likelihood.hpp"
#include "fsbayes/posterior.hpp"
#include "fsbayes/convergence.hpp"
