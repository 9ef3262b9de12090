// Copyright (c) 2026 the dsim authors.
// SPDX-License-Identifier: MIT

#include "dsim/presets.hpp"

namespace dsim {

const std::vector<Preset>& preset_registry() {
    static const std::vector<Preset> registry = {
#include "preset_data.inc"
    };
    return registry;
}

const Preset* find_preset(std::string_view name) {
    for (const Preset& p : preset_registry()) {
        if (p.name == name) return &p;
    }
    return nullptr;
}

}  // namespace dsim
