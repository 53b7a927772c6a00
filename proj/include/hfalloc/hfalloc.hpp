// SPDX-FileCopyrightText: Copyright (c) 2026 The hfalloc Authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "hfalloc/config.hpp"
#include "hfalloc/arena.hpp"
#include "hfalloc/allocator.hpp"
#include "hfalloc/inspector.hpp"
#include "hfalloc/workload.hpp"
#include "hfalloc/trace.hpp"
