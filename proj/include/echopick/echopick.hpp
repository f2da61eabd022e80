// echopick - multi-echo LiDAR denoising toolkit
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "echopick/baselines.hpp"
#include "echopick/checkpoint.hpp"
#include "echopick/csr.hpp"
#include "echopick/errors.hpp"
#include "echopick/evalkit.hpp"
#include "echopick/inference.hpp"
#include "echopick/io.hpp"
#include "echopick/net.hpp"
#include "echopick/neighbors.hpp"
#include "echopick/projection.hpp"
#include "echopick/rng.hpp"
#include "echopick/sim.hpp"
#include "echopick/train.hpp"
#include "echopick/types.hpp"
