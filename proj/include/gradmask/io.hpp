#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "gradmask/datasets.hpp"
#include "gradmask/landscape.hpp"
#include "gradmask/masking.hpp"

namespace gradmask::io {

// Shortest representation that round-trips exactly through from_chars.
inline std::string fmt_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw std::runtime_error("fmt_double: conversion failed");
    return {buf, ptr};
}

inline double parse_double(std::string_view s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw std::runtime_error("parse_double: bad value '" + std::string(s) + "'");
    return v;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    std::stringstream ss(line);
    while (std::getline(ss, cur, ',')) fields.push_back(cur);
    return fields;
}

// --- dataset persistence: one env_<id>.csv per environment + manifest.json ---

inline void save_dataset(const EnvDataset& ds, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<std::string> env_ids;
    for (const auto& env : ds.envs) {
        env_ids.push_back(env.id);
        std::ostringstream csv;
        for (int f = 0; f < ds.feature_dim; ++f) csv << 'f' << f << ',';
        csv << "label\n";
        for (Eigen::Index i = 0; i < env.y.size(); ++i) {
            for (Eigen::Index f = 0; f < env.x.cols(); ++f) csv << fmt_double(env.x(i, f)) << ',';
            csv << env.y[i] << '\n';
        }
        write_text_file(dir / ("env_" + env.id + ".csv"), csv.str());
    }
    nlohmann::json manifest = {{"provenance", ds.provenance},
                               {"feature_dim", ds.feature_dim},
                               {"num_classes", ds.num_classes},
                               {"env_ids", env_ids}};
    write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

inline EnvDataset load_dataset(const std::filesystem::path& dir) {
    std::ifstream mf(dir / "manifest.json");
    if (!mf) throw std::runtime_error("cannot open manifest: " + (dir / "manifest.json").string());
    nlohmann::json manifest = nlohmann::json::parse(mf);
    EnvDataset ds;
    ds.feature_dim = manifest.at("feature_dim").get<int>();
    ds.num_classes = manifest.at("num_classes").get<int>();
    ds.provenance = manifest.at("provenance");
    for (const auto& id : manifest.at("env_ids")) {
        Env env;
        env.id = id.get<std::string>();
        std::ifstream in(dir / ("env_" + env.id + ".csv"));
        if (!in) throw std::runtime_error("cannot open env csv for " + env.id);
        std::string line;
        std::getline(in, line);  // header
        std::vector<std::vector<double>> rows;
        std::vector<int> labels;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto fields = split_csv_line(line);
            if (static_cast<int>(fields.size()) != ds.feature_dim + 1)
                throw std::runtime_error("bad column count in env csv for " + env.id);
            std::vector<double> row(static_cast<std::size_t>(ds.feature_dim));
            for (int f = 0; f < ds.feature_dim; ++f)
                row[static_cast<std::size_t>(f)] = parse_double(fields[static_cast<std::size_t>(f)]);
            rows.push_back(std::move(row));
            labels.push_back(std::stoi(fields.back()));
        }
        env.x.resize(static_cast<Eigen::Index>(rows.size()), ds.feature_dim);
        env.y.resize(static_cast<Eigen::Index>(labels.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            for (int f = 0; f < ds.feature_dim; ++f)
                env.x(static_cast<Eigen::Index>(i), f) = rows[i][static_cast<std::size_t>(f)];
            env.y[static_cast<Eigen::Index>(i)] = labels[i];
        }
        ds.envs.push_back(std::move(env));
    }
    ds.validate();
    return ds;
}

// --- mask-shape curve export: columns a,sigma2,mask ---

inline void write_mask_curve_csv(const std::filesystem::path& path,
                                 const std::vector<MaskCurvePoint>& rows) {
    std::ostringstream out;
    out << "a,sigma2,mask\n";
    for (const auto& r : rows)
        out << fmt_double(r.agreement) << ',' << fmt_double(r.sigma2) << ',' << fmt_double(r.mask)
            << '\n';
    write_text_file(path, out.str());
}

// --- vector-field export, plottable as quiver/stream data ---

inline void write_field_csv(const std::filesystem::path& path, const landscape::FieldGrid& field,
                            const landscape::DeadZoneMap& dead) {
    if (field.num_envs != 2)
        throw std::invalid_argument("write_field_csv: expects exactly 2 environments");
    std::ostringstream out;
    out << "x,y,gxA,gyA,gxB,gyB,mask_x,mask_y,ux,uy,dead\n";
    for (int iy = 0; iy < field.grid.ny; ++iy) {
        for (int ix = 0; ix < field.grid.nx; ++ix) {
            const Eigen::Index c = static_cast<Eigen::Index>(iy) * field.grid.nx + ix;
            out << fmt_double(field.x_at(ix)) << ',' << fmt_double(field.y_at(iy)) << ','
                << fmt_double(field.env_grad[0](c, 0)) << ',' << fmt_double(field.env_grad[0](c, 1))
                << ',' << fmt_double(field.env_grad[1](c, 0)) << ','
                << fmt_double(field.env_grad[1](c, 1)) << ',' << fmt_double(field.mask(c, 0)) << ','
                << fmt_double(field.mask(c, 1)) << ',' << fmt_double(field.update(c, 0)) << ','
                << fmt_double(field.update(c, 1)) << ','
                << static_cast<int>(dead.dead[static_cast<std::size_t>(c)]) << '\n';
        }
    }
    write_text_file(path, out.str());
}

}  // namespace gradmask::io
