#pragma once

#include "tse/core.hpp"
#include "tse/csv.hpp"
#include "tse/experiment.hpp"
#include "tse/metrics.hpp"
#include "tse/mlr.hpp"
#include "tse/pipeline.hpp"
#include "tse/random.hpp"
#include "tse/scenario.hpp"
#include "tse/sensors.hpp"
#include "tse/simnet.hpp"
#include "tse/study.hpp"
