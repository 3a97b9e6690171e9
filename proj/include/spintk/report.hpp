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

#include "spintk/least_squares.hpp"

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace spintk {

// Extra scalar entries reported next to the fitted parameters.
using ReportExtras = std::vector<std::pair<std::string, double>>;

// JSON with a fixed key order; non-finite numbers become null.
std::string fit_report_json(const FitResult& fit, std::string_view kind, const ReportExtras& extras = {});

std::string fit_report_text(const FitResult& fit, std::string_view kind, const ReportExtras& extras = {});

}  // namespace spintk
