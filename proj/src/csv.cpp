// Copyright (c) 2026 the dsim authors.
// SPDX-License-Identifier: MIT

#include "dsim/csv.hpp"

#include <charconv>
#include <fstream>
#include <stdexcept>
#include <system_error>

namespace dsim {

std::string format_double(double v) {
    char buf[64];
    const std::to_chars_result res = std::to_chars(buf, buf + sizeof(buf), v);
    if (res.ec != std::errc())
        throw std::runtime_error("format_double: conversion failed");
    return std::string(buf, res.ptr);
}

namespace {

void append_int(std::string& out, std::int64_t v) {
    char buf[32];
    const std::to_chars_result res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

void append_double(std::string& out, double v) {
    char buf[64];
    const std::to_chars_result res = std::to_chars(buf, buf + sizeof(buf), v);
    if (res.ec != std::errc())
        throw std::runtime_error("render_csv: float conversion failed");
    out.append(buf, res.ptr);
}

void write_file(const std::string& bytes, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("emit_csv: cannot open '" + path + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw std::runtime_error("emit_csv: write failed for '" + path + "'");
}

}  // namespace

std::string render_csv(const EnsembleStats& stats) {
    std::string out;
    out.reserve(64 * (stats.recorded_steps.size() + 1));
    out += "step,time";
    for (const SeriesStats& s : stats.series) {
        out += ',';
        out += s.name;
        out += "_mean,";
        out += s.name;
        out += "_variance,";
        out += s.name;
        out += "_stderr";
    }
    out += '\n';
    for (std::size_t i = 0; i < stats.recorded_steps.size(); ++i) {
        append_int(out, stats.recorded_steps[i]);
        out += ',';
        append_double(out,
                      static_cast<double>(stats.recorded_steps[i]) *
                          stats.time_scale);
        for (const SeriesStats& s : stats.series) {
            out += ',';
            append_double(out, s.value[i]);
            out += ',';
            append_double(out, s.variance[i]);
            out += ',';
            append_double(out, s.std_error[i]);
        }
        out += '\n';
    }
    return out;
}

std::string render_csv(const WeakErrorTable& table) {
    std::string out = "eta,max_error\n";
    for (const WeakErrorRow& row : table.rows) {
        append_double(out, row.eta);
        out += ',';
        append_double(out, row.max_error);
        out += '\n';
    }
    return out;
}

void emit_csv(const EnsembleStats& stats, const std::string& path) {
    write_file(render_csv(stats), path);
}

void emit_csv(const WeakErrorTable& table, const std::string& path) {
    write_file(render_csv(table), path);
}

}  // namespace dsim
