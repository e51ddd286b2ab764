#pragma once

#include "fsbayes/fsbayes.hpp"
#include "fsbayes/harness/io.hpp"
#include "fsbayes/harness/config.hpp"
#include "fsbayes/harness/experiment.hpp"
#include "fsbayes/harness/recipes.hpp"
