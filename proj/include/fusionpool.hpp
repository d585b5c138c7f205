// Copyright 2026 The FusionPool Authors
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

#include "fusionpool/backbone_spec.hpp"
#include "fusionpool/config.hpp"
#include "fusionpool/error.hpp"
#include "fusionpool/evaluation.hpp"
#include "fusionpool/explain/gradcam.hpp"
#include "fusionpool/explain/render.hpp"
#include "fusionpool/explain/tsne.hpp"
#include "fusionpool/extraction.hpp"
#include "fusionpool/fusion_pool.hpp"
#include "fusionpool/heads.hpp"
#include "fusionpool/image.hpp"
#include "fusionpool/ingest.hpp"
