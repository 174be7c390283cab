#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "seqdi/errors.hpp"
#include "seqdi/harness.hpp"

namespace seqdi::cli {

inline constexpr std::uint64_t kDefaultSeed = 20240901;
inline constexpr std::size_t kFullScaleReplications = 100000;

// Problems with the command line or a configuration document (exit 2).
class ConfigError : public Error { public: using Error::Error; };

// JSON experiment configuration: McConfig plus the output directory.
struct RunConfig {
    McConfig mc;
    std::optional<std::string> out_dir;
};

// Unknown keys and mistyped values throw ConfigError naming the key and the
// expected type; semantic checks go through McConfig::validate.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::string& path);

// Thread count from SEQDI_THREADS, if set. Throws ConfigError when malformed.
std::optional<unsigned> threads_from_env();

// Entry point shared by the executable and the tests. Returns the exit code:
// 0 success (and --help), 1 runtime failure, 2 usage or configuration error.
int run_cli(int argc, const char* const* argv);

}  // namespace seqdi::cli
