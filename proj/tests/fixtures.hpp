#pragma once

#include "decotime/model.hpp"

#include <filesystem>

namespace fixtures {

inline std::filesystem::path source_dir()
{
    return DECOTIME_SOURCE_DIR;
}

inline std::filesystem::path config(const char* name)
{
    return source_dir() / "configs" / name;
}

// Benchmark model with the site count replaced by a chain of n sites.
inline decotime::Model benchmark(double n = 1e4)
{
    auto m = decotime::load_model_file(config("benchmark.cfg"));
    m.geometry.count = n;
    return m;
}

} // namespace fixtures
