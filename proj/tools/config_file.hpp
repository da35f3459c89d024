#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace glmm::cli {

/// Reads a structured-text (INI) config with blocks such as [model], [prior],
/// [transforms], [sgld], [experiment] and turns every entry into a
/// `--key=value` argument. Section names only group keys; underscores in keys
/// become dashes. Array values are joined with commas.
std::vector<std::string> config_arguments(std::istream& in, const std::string& source);
std::vector<std::string> config_arguments(const std::string& path);

/// Builds the final argument list: config entries first, then the command
/// line, dropping config entries the command line sets itself. `--config` is
/// consumed here. When `accepts(verb, key)` is given, config entries it
/// rejects are skipped, so one file can serve several verbs.
using KeyFilter = std::function<bool(const std::string& verb, const std::string& key)>;
std::vector<std::string> merge_arguments(const std::vector<std::string>& argv, const KeyFilter& accepts = {});

}  // namespace glmm::cli
