#include "lfm/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "lfm/errors.hpp"
#include "lfm/timeseries_io.hpp"

namespace lfm::app {

namespace pt = boost::property_tree;

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::SpringOpenLoop: return "spring-open-loop";
    case ExperimentKind::SpringControl: return "spring-control";
    case ExperimentKind::HeatControl: return "heat-control";
    case ExperimentKind::KernelCheck: return "kernel-check";
    case ExperimentKind::Certify: return "certify";
  }
  return "unknown";
}

ExperimentKind parse_experiment(const std::string& text) {
  for (auto k : {ExperimentKind::SpringOpenLoop, ExperimentKind::SpringControl, ExperimentKind::HeatControl,
                 ExperimentKind::KernelCheck, ExperimentKind::Certify}) {
    if (to_string(k) == text) return k;
  }
  throw ArgumentError("unknown experiment '" + text + "'");
}

gpss::CovarianceSpec GpSection::spec() const {
  gpss::CovarianceSpec s;
  s.kind = kind;
  s.sigma = sigma;
  s.ell = ell;
  s.se_order = {pade_numerator, pade_denominator};
  s.validate();
  return s;
}

void ExperimentConfig::validate() const {
  const auto& t = timing;
  if (!(t.dt > 0.0) || !(t.sim_dt > 0.0)) throw ArgumentError("config: dt and sim_dt must be positive");
  if (!(t.noise_std >= 0.0)) throw ArgumentError("config: noise_std must be non-negative");
  if (!(0.0 < t.train_end && t.train_end <= t.meas_end && t.meas_end <= t.horizon)) {
    throw ArgumentError("config: need 0 < train_end <= meas_end <= horizon");
  }
  if (t.control_on < 0.0 || t.control_on > t.horizon) {
    throw ArgumentError("config: control_on must lie in [0, horizon]");
  }
  if (cost.state_weight < 0.0 || cost.velocity_weight < 0.0 || !(cost.control_weight > 0.0)) {
    throw ArgumentError("config: state weights must be >= 0 and control_weight > 0");
  }
  if (heat.sensors_per_axis < 1 || heat.field_grid < 1 || !(heat.footprint > 0.0) ||
      !(heat.source_duration > 0.0)) {
    throw ArgumentError("config: invalid heat section");
  }
  if (kernel.points < 2 || !(kernel.tau_max_ells > 0.0)) throw ArgumentError("config: invalid kernel section");
  if (certify.system != "spring" && certify.system != "heat") {
    throw ArgumentError("config: certify.system must be spring or heat");
  }
  gp.spec();
}

namespace {

// One binding per configurable key: reads from text, writes canonical text.
struct Binding {
  std::function<void(const std::string&)> read;
  std::function<std::string()> write;
};

double to_double(const std::string& key, const std::string& text) {
  try {
    size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ArgumentError("config: " + key + " expects a number, got '" + text + "'");
  }
}

long to_long(const std::string& key, const std::string& text) {
  try {
    size_t used = 0;
    const long v = std::stol(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ArgumentError("config: " + key + " expects an integer, got '" + text + "'");
  }
}

std::vector<double> to_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::string item;
  std::istringstream is(text);
  while (std::getline(is, item, ',')) {
    const auto b = item.find_first_not_of(' '), e = item.find_last_not_of(' ');
    if (b == std::string::npos) continue;
    out.push_back(to_double(key, item.substr(b, e - b + 1)));
  }
  return out;
}

std::map<std::string, Binding> bindings(ExperimentConfig& c) {
  std::map<std::string, Binding> b;
  auto num = [&b](const std::string& key, double& field) {
    b[key] = {[&field, key](const std::string& s) { field = to_double(key, s); },
              [&field] { return io::format_double(field); }};
  };
  auto integer = [&b](const std::string& key, int& field) {
    b[key] = {[&field, key](const std::string& s) { field = int(to_long(key, s)); },
              [&field] { return std::to_string(field); }};
  };
  b["experiment.seed"] = {[&c](const std::string& s) {
                            c.seed = std::uint64_t(to_long("experiment.seed", s));
                          },
                          [&c] { return std::to_string(c.seed); }};
  b["experiment.out"] = {[&c](const std::string& s) { c.out_dir = s; }, [&c] { return c.out_dir.string(); }};
  num("spring.lambda", c.spring.lambda);
  num("spring.gamma", c.spring.gamma);
  num("spring.force_scale", c.spring.force_scale);
  num("spring.initial_position", c.spring.initial_position);
  num("spring.initial_velocity", c.spring.initial_velocity);
  b["gp.kind"] = {[&c](const std::string& s) { c.gp.kind = gpss::parse_kind(s); },
                  [&c] { return gpss::to_string(c.gp.kind); }};
  num("gp.sigma", c.gp.sigma);
  num("gp.ell", c.gp.ell);
  integer("gp.pade_numerator", c.gp.pade_numerator);
  integer("gp.pade_denominator", c.gp.pade_denominator);
  b["gp.fit"] = {[&c](const std::string& s) {
                   if (s == "true" || s == "1") {
                     c.gp.fit = true;
                   } else if (s == "false" || s == "0") {
                     c.gp.fit = false;
                   } else {
                     throw ArgumentError("config: gp.fit expects true or false");
                   }
                 },
                 [&c] { return std::string(c.gp.fit ? "true" : "false"); }};
  num("timing.dt", c.timing.dt);
  num("timing.sim_dt", c.timing.sim_dt);
  num("timing.noise_std", c.timing.noise_std);
  num("timing.train_end", c.timing.train_end);
  num("timing.meas_end", c.timing.meas_end);
  num("timing.horizon", c.timing.horizon);
  num("timing.control_on", c.timing.control_on);
  num("cost.state_weight", c.cost.state_weight);
  num("cost.velocity_weight", c.cost.velocity_weight);
  num("cost.control_weight", c.cost.control_weight);
  num("heat.D", c.heat.D);
  num("heat.lambda", c.heat.lambda);
  integer("heat.modes_per_axis", c.heat.modes_per_axis);
  integer("heat.sensors_per_axis", c.heat.sensors_per_axis);
  num("heat.space_ell", c.heat.space_ell);
  num("heat.amplitude", c.heat.amplitude);
  num("heat.footprint", c.heat.footprint);
  num("heat.start_x", c.heat.start_x);
  num("heat.start_y", c.heat.start_y);
  num("heat.end_x", c.heat.end_x);
  num("heat.end_y", c.heat.end_y);
  num("heat.source_duration", c.heat.source_duration);
  integer("heat.field_grid", c.heat.field_grid);
  b["heat.snapshot_times"] = {[&c](const std::string& s) { c.heat.snapshot_times = to_list("heat.snapshot_times", s); },
                              [&c] {
                                std::string out;
                                for (size_t i = 0; i < c.heat.snapshot_times.size(); ++i) {
                                  out += (i ? ", " : "") + io::format_double(c.heat.snapshot_times[i]);
                                }
                                return out;
                              }};
  num("kernel.tau_max_ells", c.kernel.tau_max_ells);
  integer("kernel.points", c.kernel.points);
  b["certify.system"] = {[&c](const std::string& s) { c.certify.system = s; }, [&c] { return c.certify.system; }};
  num("certify.coupling", c.certify.coupling);
  return b;
}

}  // namespace

ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  switch (kind) {
    case ExperimentKind::SpringOpenLoop:
      c.timing.control_on = c.timing.horizon;
      break;
    case ExperimentKind::SpringControl:
      c.timing.meas_end = c.timing.horizon;
      c.cost.control_weight = 0.1;
      break;
    case ExperimentKind::HeatControl:
      c.timing.dt = 0.1;
      c.timing.train_end = 20.0;
      c.timing.meas_end = 20.0;
      c.timing.horizon = 20.0;
      c.timing.control_on = 0.0;
      c.gp.sigma = 0.2;
      c.gp.ell = 2.0;
      c.gp.fit = false;
      c.cost.control_weight = 0.01;
      break;
    case ExperimentKind::KernelCheck:
      c.gp.fit = false;
      break;
    case ExperimentKind::Certify:
      c.gp.kind = gpss::CovarianceKind::MaternHalf;
      c.gp.ell = 2.0;
      c.gp.fit = false;
      break;
  }
  return c;
}

ExperimentConfig parse_config(const std::string& text, ExperimentKind kind) {
  ExperimentConfig c = default_config(kind);
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ArgumentError(std::string("config: ") + e.what());
  }
  auto b = bindings(c);
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ArgumentError("config: key '" + section + "' must sit inside a section");
    }
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      auto it = b.find(full);
      if (it == b.end()) throw ArgumentError("config: unknown key '" + full + "'");
      it->second.read(value.data());
    }
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentKind kind) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("config: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), kind);
}

std::string ExperimentConfig::to_ini() const {
  ExperimentConfig copy = *this;
  const auto b = bindings(copy);
  std::ostringstream os;
  os << "# experiment: " << to_string(kind) << "\n";
  std::string current;
  for (const auto& [full, binding] : b) {
    const auto dot = full.find('.');
    const std::string section = full.substr(0, dot);
    if (section != current) {
      os << (current.empty() ? "" : "\n") << "[" << section << "]\n";
      current = section;
    }
    os << full.substr(dot + 1) << " = " << binding.write() << "\n";
  }
  return os.str();
}

}  // namespace lfm::app
