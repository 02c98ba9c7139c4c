#pragma once

#include "gcr/autodiff.hpp"
#include "gcr/checkpoint.hpp"
#include "gcr/config.hpp"
#include "gcr/errors.hpp"
#include "gcr/evaluator.hpp"
#include "gcr/fpenv.hpp"
#include "gcr/graph.hpp"
#include "gcr/io.hpp"
#include "gcr/log.hpp"
#include "gcr/logic.hpp"
#include "gcr/metrics.hpp"
#include "gcr/model.hpp"
#include "gcr/optim.hpp"
#include "gcr/report.hpp"
#include "gcr/synthetic.hpp"
#include "gcr/tensor.hpp"
#include "gcr/trainer.hpp"
