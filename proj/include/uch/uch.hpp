// Copyright 2026 The UCH Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "uch/baseline.hpp"
#include "uch/commands.hpp"
#include "uch/config.hpp"
#include "uch/core.hpp"
#include "uch/dataio.hpp"
#include "uch/encoder.hpp"
#include "uch/error.hpp"
#include "uch/graph.hpp"
#include "uch/objective.hpp"
#include "uch/retrieval.hpp"
#include "uch/trainer.hpp"
