#include "config_file.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "CLI11.hpp"
#include "glmm/errors.hpp"

namespace glmm::cli {

namespace {

const std::set<std::string> kSections{"model", "prior", "transforms", "data", "sgld", "correction",
                                      "gibbs", "experiment", "output", "report"};

std::string option_key(const std::string& arg) {
  if (arg.rfind("--", 0) != 0) return {};
  const auto eq = arg.find('=');
  std::string key = arg.substr(2, eq == std::string::npos ? std::string::npos : eq - 2);
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

}  // namespace

std::vector<std::string> config_arguments(std::istream& in, const std::string& source) {
  std::vector<std::string> args;
  const auto items = CLI::ConfigINI().from_config(in);
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    if (item.parents.size() > 1 || (item.parents.size() == 1 && !kSections.count(item.parents.front())))
      throw ConfigError(source + ": unknown section '" + item.parents.front() + "'");
    std::string key = item.name;
    std::replace(key.begin(), key.end(), '_', '-');
    std::string value;
    for (size_t j = 0; j < item.inputs.size(); ++j) value += (j ? "," : "") + item.inputs[j];
    args.push_back("--" + key + "=" + value);
  }
  return args;
}

std::vector<std::string> config_arguments(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return config_arguments(in, path);
}

std::vector<std::string> merge_arguments(const std::vector<std::string>& argv, const KeyFilter& accepts) {
  std::vector<std::string> user;
  std::string config_path;
  for (size_t j = 0; j < argv.size(); ++j) {
    if (argv[j] == "--config") {
      if (j + 1 >= argv.size()) throw ConfigError("--config needs a file name");
      config_path = argv[++j];
    } else if (argv[j].rfind("--config=", 0) == 0) {
      config_path = argv[j].substr(9);
    } else {
      user.push_back(argv[j]);
    }
  }
  if (config_path.empty()) return user;

  std::set<std::string> given;
  for (const auto& a : user) {
    const auto k = option_key(a);
    if (!k.empty()) given.insert(k);
  }
  std::vector<std::string> merged;
  // The verb (first non-option word) stays in front.
  size_t first = 0;
  if (!user.empty() && user.front().rfind("-", 0) != 0) {
    merged.push_back(user.front());
    first = 1;
  }
  const std::string verb = first == 1 ? user.front() : std::string();
  for (const auto& a : config_arguments(config_path)) {
    const auto key = option_key(a);
    if (given.count(key)) continue;
    if (accepts && !accepts(verb, key)) continue;
    merged.push_back(a);
  }
  merged.insert(merged.end(), user.begin() + static_cast<std::ptrdiff_t>(first), user.end());
  return merged;
}

}  // namespace glmm::cli
