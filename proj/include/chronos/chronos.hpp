#pragma once

#include "chronos/adam.hpp"
#include "chronos/backprop.hpp"
#include "chronos/checkpoint.hpp"
#include "chronos/error.hpp"
#include "chronos/evaluator.hpp"
#include "chronos/metrics.hpp"
#include "chronos/parallel.hpp"
#include "chronos/report_io.hpp"
#include "chronos/scorer_net.hpp"
#include "chronos/signal.hpp"
#include "chronos/synthgen.hpp"
#include "chronos/trainer.hpp"
#include "chronos/trajectory_store.hpp"
#include "chronos/voter.hpp"
