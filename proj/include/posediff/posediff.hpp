// Copyright 2026 The posediff Authors. All Rights Reserved.
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
#pragma once

#include "posediff/codec.hpp"
#include "posediff/config.hpp"
#include "posediff/dataset.hpp"
#include "posediff/denoiser.hpp"
#include "posediff/diffusion.hpp"
#include "posediff/error.hpp"
#include "posediff/layers.hpp"
#include "posediff/metrics.hpp"
#include "posediff/oracle.hpp"
#include "posediff/pipeline.hpp"
#include "posediff/rng.hpp"
#include "posediff/schedule.hpp"
#include "posediff/segment.hpp"
#include "posediff/skeleton.hpp"
#include "posediff/synthetic.hpp"
#include "posediff/tokens.hpp"
#include "posediff/transition.hpp"
#include "posediff/vocab.hpp"
