#pragma once

#include "iterank/dataset.hpp"
#include "iterank/engine.hpp"
#include "iterank/error.hpp"
#include "iterank/eval.hpp"
#include "iterank/graph.hpp"
#include "iterank/oracle.hpp"
#include "iterank/parallel.hpp"
#include "iterank/phase1.hpp"
#include "iterank/phase2.hpp"
#include "iterank/run_config.hpp"
