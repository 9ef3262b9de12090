// Copyright (c) 2026 the dsim authors.
// SPDX-License-Identifier: MIT
//
// CSV rendering with byte-deterministic output: floats are written as their
// shortest round-trip decimal, rows follow recording order, lines end in a
// single \n. Rendering to a string and writing to a path are split so tests
// can assert exact bytes.

#pragma once

#include <string>

#include "dsim/ensemble.hpp"
#include "dsim/experiment.hpp"

namespace dsim {

// Header: step,time followed by {series}_mean,{series}_variance,
// {series}_stderr for every series. time is step * time_scale (the learning
// rate for discrete runs, dt for SDE runs).
std::string render_csv(const EnsembleStats& stats);

// Header: eta,max_error (the fitted slope is part of the table struct, not
// the file).
std::string render_csv(const WeakErrorTable& table);

// Writes the rendered bytes; throws std::runtime_error on unwritable paths.
void emit_csv(const EnsembleStats& stats, const std::string& path);
void emit_csv(const WeakErrorTable& table, const std::string& path);

// Shortest round-trip decimal for a double (std::to_chars).
std::string format_double(double v);

}  // namespace dsim
