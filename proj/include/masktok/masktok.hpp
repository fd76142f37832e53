// Copyright 2026 the masktok authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.

#pragma once

#include "masktok/analytics.hpp"
#include "masktok/bundle.hpp"
#include "masktok/fixed_rate.hpp"
#include "masktok/mask_engine.hpp"
#include "masktok/merge.hpp"
#include "masktok/report.hpp"
#include "masktok/synth.hpp"
#include "masktok/tensor.hpp"
#include "masktok/token_io.hpp"
