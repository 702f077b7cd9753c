#include "config.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "margmc/error.hpp"

namespace margmc::cli {

const std::vector<KeySpec>& config_keys() {
  static const std::vector<KeySpec> keys = {
      {"model", "graph", "", "graph file (var/edge lines)", true},
      {"model", "counts", "", "counts CSV (variables + count)", true},
      {"model", "latent_levels", "3", "levels of each latent variable"},
      {"model", "marginals", "", "explicit marginal ordering, e.g. AC,AD,BD,ACD,ABD,ABCD"},
      {"sampler", "algorithm", "paa", "gibbs | pbis | paa | rw_lambda | rw_pi"},
      {"sampler", "iterations", "11000", "total iterations including burn-in"},
      {"sampler", "burn_in", "1000", "discarded initial iterations"},
      {"sampler", "seed", "1", "master seed; chain k uses stream k"},
      {"sampler", "chains", "1", "number of independent chains"},
      {"sampler", "threads", "1", "worker threads for chains"},
      {"sampler", "rw_scales", "", "random-walk scales (one, or one per block)"},
      {"sampler", "rw_tune", "true", "adapt scales during burn-in"},
      {"sampler", "rw_target", "0.35", "target acceptance for scale tuning"},
      {"sampler", "paa_stage1_iterations", "0", "PAA stage-1 Gibbs length (0: iterations + burn_in)"},
      {"sampler", "paa_reorder", "permute", "permute | thin:K"},
      {"sampler", "pbis_split_prior", "conditional", "conditional | uniform"},
      {"prior", "kind", "dellaportas_forster", "dellaportas_forster | iid_normal | flat"},
      {"prior", "sigma2", "10", "variance of the iid_normal prior"},
      {"prior", "alpha", "1", "Dirichlet parameter of the pseudo-prior"},
      {"output", "dir", "margmc_out", "output directory"},
      {"output", "dump_scheme", "false", "write M, C, K and effect tables"},
      {"output", "dump_jacobian", "false", "write the Jacobian report at the initial state"},
      {"simulate", "lambda", "", "free interactions in scheme order"},
      {"simulate", "lambda_file", "", "CSV of label,value for free interactions", true},
      {"simulate", "probabilities", "", "cell probabilities in canonical order"},
      {"simulate", "total", "500", "sample size N of each table"},
      {"simulate", "replicates", "1", "number of tables"},
  };
  return keys;
}

bool is_metadata_section(const std::string& section) {
  return section == "run" || section == "dimensions" || section == "timing" ||
         section == "results";
}

namespace {

const KeySpec* find_key(const std::string& name) {
  for (const auto& k : config_keys()) {
    if (k.name() == name) return &k;
  }
  return nullptr;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

}  // namespace

Config Config::load(const std::optional<std::filesystem::path>& file,
                    const std::map<std::string, std::string>& overrides) {
  Config c;
  for (const auto& k : config_keys()) c.values_[k.name()] = k.default_value;

  if (file) {
    std::ifstream in(*file);
    if (!in) throw InputError("cannot open config file '" + file->string() + "'");
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw InputError("config file '" + file->string() + "': " + e.message() + " (line " +
                       std::to_string(e.line()) + ")");
    }
    const auto base = std::filesystem::absolute(*file).parent_path();
    for (const auto& [section, body] : tree) {
      if (body.empty() && !body.data().empty()) {
        throw InputError("config key '" + section + "' must appear inside a [section]");
      }
      if (is_metadata_section(section)) continue;
      for (const auto& [key, value] : body) {
        const std::string name = section + "." + key;
        const KeySpec* spec = find_key(name);
        if (spec == nullptr) throw InputError("unknown config key '" + name + "'");
        std::string v = trim(value.data());
        if (spec->input_path && !v.empty() && std::filesystem::path(v).is_relative()) {
          v = (base / v).lexically_normal().string();
        }
        c.values_[name] = v;
      }
    }
  }
  for (const auto& [name, value] : overrides) {
    if (find_key(name) == nullptr) throw InputError("unknown config key '" + name + "'");
    c.values_[name] = trim(value);
  }
  return c;
}

bool Config::has(const std::string& name) const { return !str(name).empty(); }

const std::string& Config::str(const std::string& name) const {
  const auto it = values_.find(name);
  if (it == values_.end()) throw InputError("unknown config key '" + name + "'");
  return it->second;
}

long long Config::integer(const std::string& name) const {
  const std::string& s = str(name);
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw InputError("config key " + name + ": expected an integer, got '" + s + "'");
}

double Config::real(const std::string& name) const {
  const std::string& s = str(name);
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw InputError("config key " + name + ": expected a number, got '" + s + "'");
}

bool Config::boolean(const std::string& name) const {
  std::string s = str(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw InputError("config key " + name + ": expected true or false, got '" + str(name) + "'");
}

std::vector<std::string> Config::words(const std::string& name) const {
  std::string s = str(name);
  std::replace(s.begin(), s.end(), ',', ' ');
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

std::vector<double> Config::reals(const std::string& name) const {
  std::vector<double> out;
  for (const auto& w : words(name)) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(w, &pos));
      if (pos != w.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw InputError("config key " + name + ": '" + w + "' is not a number");
    }
  }
  return out;
}

void Config::write_ini(std::ostream& out) const {
  std::string section;
  for (const auto& k : config_keys()) {
    if (k.section != section) {
      out << (section.empty() ? "" : "\n") << '[' << k.section << "]\n";
      section = k.section;
    }
    out << k.key << " = " << values_.at(k.name()) << '\n';
  }
}

}  // namespace margmc::cli
