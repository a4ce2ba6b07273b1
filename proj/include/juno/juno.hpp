// Copyright 2026 The Juno Authors.
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

#include "juno/alignment.hpp"
#include "juno/attention_index.hpp"
#include "juno/common.hpp"
#include "juno/corpus.hpp"
#include "juno/doc_model.hpp"
#include "juno/encoders.hpp"
#include "juno/eval.hpp"
#include "juno/pipeline.hpp"
#include "juno/synth.hpp"
