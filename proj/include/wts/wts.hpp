// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "wts/checks.hpp"
#include "wts/config.hpp"
#include "wts/embedding.hpp"
#include "wts/error.hpp"
#include "wts/evaluator.hpp"
#include "wts/experiment.hpp"
#include "wts/losses.hpp"
#include "wts/matrix.hpp"
#include "wts/noise.hpp"
#include "wts/random.hpp"
#include "wts/teacher.hpp"
#include "wts/trainer.hpp"
