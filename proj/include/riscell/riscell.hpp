// SPDX-License-Identifier: Apache-2.0
//
// riscell: joint association and beamforming for RIS-aided cellular downlinks
// Copyright 2026 the riscell authors
//
// Licensed under the Apache License, Version 2.0; see the LICENSE file.

#pragma once

#include <riscell/association.hpp>
#include <riscell/channel.hpp>
#include <riscell/experiments.hpp>
#include <riscell/metrics.hpp>
#include <riscell/precoder.hpp>
#include <riscell/ris_optimizer.hpp>
#include <riscell/scenario.hpp>
#include <riscell/system_model.hpp>
