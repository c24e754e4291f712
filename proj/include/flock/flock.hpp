// Copyright 2026 The Authors.
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

#ifndef FLOCK_FLOCK_HPP
#define FLOCK_FLOCK_HPP

#include <flock/bench.hpp>
#include <flock/brackets.hpp>
#include <flock/cluster.hpp>
#include <flock/detect.hpp>
#include <flock/error.hpp>
#include <flock/feature.hpp>
#include <flock/ingest.hpp>
#include <flock/model.hpp>
#include <flock/overhead.hpp>
#include <flock/parallel.hpp>
#include <flock/pipeline.hpp>
#include <flock/prune.hpp>
#include <flock/random.hpp>
#include <flock/synth.hpp>
#include <flock/synth_workload.hpp>

#endif  // FLOCK_FLOCK_HPP
