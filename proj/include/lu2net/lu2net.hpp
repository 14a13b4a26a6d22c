/*
 * Copyright 2026 the lu2net authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "lu2net/checkpoint.hpp"
#include "lu2net/color.hpp"
#include "lu2net/common.hpp"
#include "lu2net/config.hpp"
#include "lu2net/dataset.hpp"
#include "lu2net/image.hpp"
#include "lu2net/loss.hpp"
#include "lu2net/manifest.hpp"
#include "lu2net/metrics.hpp"
#include "lu2net/network.hpp"
#include "lu2net/ops.hpp"
#include "lu2net/optim.hpp"
#include "lu2net/pipeline.hpp"
#include "lu2net/tape.hpp"
#include "lu2net/tensor.hpp"
#include "lu2net/trainer.hpp"
