// Copyright (c) 2026 the dsim authors.
// SPDX-License-Identifier: MIT
//
// Built-in experiment specs reproducing the headline figures. The JSON files
// under presets/ are the source of truth; their bytes are embedded at
// configure time so the CLI works from any directory.

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dsim {

struct Preset {
    std::string name;       // file stem, e.g. "fig-bound-dcsgd"
    std::string json_text;  // full spec body
};

const std::vector<Preset>& preset_registry();

// nullptr when no preset has that name.
const Preset* find_preset(std::string_view name);

}  // namespace dsim
