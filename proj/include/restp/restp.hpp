// Copyright 2026 The restp Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Umbrella header: the whole library in one include.

#pragma once

#include "restp/error.hpp"      // IWYU pragma: export
#include "restp/rng.hpp"        // IWYU pragma: export
#include "restp/binio.hpp"      // IWYU pragma: export
#include "restp/tensor.hpp"     // IWYU pragma: export
#include "restp/tensor_io.hpp"  // IWYU pragma: export
#include "restp/conv.hpp"       // IWYU pragma: export
#include "restp/ops.hpp"        // IWYU pragma: export
#include "restp/blocks.hpp"     // IWYU pragma: export
#include "restp/network.hpp"    // IWYU pragma: export
#include "restp/checkpoint.hpp" // IWYU pragma: export
#include "restp/gradcheck.hpp"  // IWYU pragma: export
#include "restp/dataset.hpp"    // IWYU pragma: export
#include "restp/trainer.hpp"    // IWYU pragma: export
#include "restp/svm.hpp"        // IWYU pragma: export
#include "restp/eval.hpp"       // IWYU pragma: export
