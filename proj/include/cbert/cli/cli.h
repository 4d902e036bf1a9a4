#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

namespace cbert::cli {

inline constexpr const char* kRunFormat = "cbert-run/1";

// Every setting a subcommand can read, with defaults. Config files and
// flags are merged over this; the merged result is archived per run.
nlohmann::json default_run_config();

// Merges `overrides` into `base` key by key. Keys that do not exist in the
// defaults are a ConfigError, so typos are caught instead of ignored.
nlohmann::json merge_config(const nlohmann::json& base, const nlohmann::json& overrides, const std::string& where);

// Entry point. args[0] is the program name. Returns the process exit code:
// 0 on success, otherwise the code of the error's category.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace cbert::cli
