#pragma once

#include <optional>
#include <string>
#include <vector>

#include "margmc/graph.hpp"
#include "margmc/samplers.hpp"

#include "config.hpp"

namespace margmc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitRuntime = 3;

/// Entry point shared by the executable and the tests.
int run_cli(int argc, const char* const* argv);

/// Parses "AC,AD,ABCD" (or "A:C,..." for multi-character names).
std::vector<VertexSet> parse_marginals(const std::vector<std::string>& words,
                                       const BidirectedGraph& g);

/// Builds and validates the sampler settings from [sampler] and [prior].
ChainConfig chain_config(const Config& cfg);

/// Wall-clock seconds recorded by `fit` in a metadata file: the total, or
/// chain `chain` (1-based) when given.
std::optional<double> metadata_wall_seconds(const std::string& path,
                                            std::optional<int> chain = std::nullopt);

}  // namespace margmc::cli
