#pragma once

#include "error.hpp"
#include "rng.hpp"
#include "parallel.hpp"
#include "graph.hpp"
#include "dense.hpp"
#include "dataset.hpp"
#include "walk.hpp"
#include "propagation.hpp"
#include "model.hpp"
#include "train.hpp"
#include "influence.hpp"
#include "run_config.hpp"
#include "experiment.hpp"
