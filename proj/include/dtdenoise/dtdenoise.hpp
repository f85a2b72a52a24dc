// Copyright (c) 2026 The dtdenoise Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Umbrella header pulling in the whole public surface.

#include <dtdenoise/errors.hpp>
#include <dtdenoise/rng.hpp>
#include <dtdenoise/tensor.hpp>
#include <dtdenoise/ops.hpp>
#include <dtdenoise/graph.hpp>
#include <dtdenoise/init.hpp>
#include <dtdenoise/param_store.hpp>
#include <dtdenoise/conv.hpp>
#include <dtdenoise/attention.hpp>
#include <dtdenoise/cadt.hpp>
#include <dtdenoise/sne.hpp>
#include <dtdenoise/model.hpp>
#include <dtdenoise/image.hpp>
#include <dtdenoise/image_io.hpp>
#include <dtdenoise/mask.hpp>
#include <dtdenoise/synth.hpp>
#include <dtdenoise/metrics.hpp>
#include <dtdenoise/adam.hpp>
#include <dtdenoise/checkpoint.hpp>
#include <dtdenoise/grad_check.hpp>
#include <dtdenoise/trainer.hpp>
#include <dtdenoise/config.hpp>
#include <dtdenoise/cli.hpp>
#include <dtdenoise/cli_main.hpp>
