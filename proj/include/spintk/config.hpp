/* Copyright 2026 The spintk Authors. All Rights Reserved.
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at
    http://www.apache.org/licenses/LICENSE-2.0
Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

#include "spintk/dynamics.hpp"
#include "spintk/odmr.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace spintk {

struct SweepGrid {
  FrequencyGrid freq;
  double b_min_mt = 0.0;
  double b_max_mt = 10.0;
  double b_step_mt = 0.1;
  Vec3 b_axis = Vec3::UnitZ();

  bool operator==(const SweepGrid&) const = default;
};

/////////////////////////////////////////////////////////////////////////
// Configuration document
// ------------------
// key = value lines under [family.<name>], [lineshape], [grid] and
// [rate_model.<name>] headers; '#' starts a comment. Rate models list
// their levels and then edges as rate.<from>.<to> = value, with
//   radiative = ES0->GS0, ES1->GS1
//   pump = GS0->ES0, GS1->ES1
//   rf_mix = GS0<->GS1
/////////////////////////////////////////////////////////////////////////
struct ConfigDocument {
  std::vector<Family> families;
  std::optional<LineShape> lineshape;
  std::optional<SweepGrid> grid;
  std::vector<std::pair<std::string, RateModel>> rate_models;

  const Family& family(std::string_view name) const;
  const RateModel& rate_model(std::string_view name) const;

  bool operator==(const ConfigDocument&) const = default;
};

// Throws ParseError with the offending line and column.
ConfigDocument parse_config(std::string_view text);
std::string serialize_config(const ConfigDocument& doc);

// The shipped families, default line shape and grid, and fig1f-default.
ConfigDocument preset_config();

}  // namespace spintk
