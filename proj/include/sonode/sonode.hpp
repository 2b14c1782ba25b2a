#pragma once

// Umbrella header.

#include "sonode/adjoint.hpp"
#include "sonode/analysis.hpp"
#include "sonode/checkpoint.hpp"
#include "sonode/closed_form.hpp"
#include "sonode/config.hpp"
#include "sonode/datasets.hpp"
#include "sonode/errors.hpp"
#include "sonode/experiments.hpp"
#include "sonode/gradcheck.hpp"
#include "sonode/mlp.hpp"
#include "sonode/model.hpp"
#include "sonode/objective.hpp"
#include "sonode/ode.hpp"
#include "sonode/reproduce.hpp"
#include "sonode/tensor.hpp"
#include "sonode/training.hpp"
