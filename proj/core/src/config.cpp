#include "wsol/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "wsol/errors.hpp"

namespace wsol {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(std::string_view key, std::string_view v, int line) {
  const std::string s = trim(v);
  double out = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw ConfigError("'" + std::string(key) + "' expects a number, got '" + s + "'", line);
  return out;
}

std::uint64_t to_uint(std::string_view key, std::string_view v, int line) {
  const std::string s = trim(v);
  std::uint64_t out = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw ConfigError("'" + std::string(key) + "' expects a non-negative integer, got '" + s + "'", line);
  return out;
}

bool to_bool(std::string_view key, std::string_view v, int line) {
  const std::string s = trim(v);
  if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "off" || s == "no") return false;
  throw ConfigError("'" + std::string(key) + "' expects a boolean, got '" + s + "'", line);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

struct Field {
  std::function<void(RunConfig&, std::string_view key, std::string_view value, int line)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class Get>
Field real(Get ref) {
  return {[ref](RunConfig& c, std::string_view k, std::string_view v, int line) { ref(c) = to_double(k, v, line); },
          [ref](const RunConfig& c) { return fmt(ref(const_cast<RunConfig&>(c))); }};
}

template <class Get>
Field count(Get ref) {
  return {[ref](RunConfig& c, std::string_view k, std::string_view v, int line) {
            ref(c) = static_cast<std::remove_reference_t<decltype(ref(c))>>(to_uint(k, v, line));
          },
          [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); }};
}

template <class Get>
Field flag(Get ref) {
  return {[ref](RunConfig& c, std::string_view k, std::string_view v, int line) { ref(c) = to_bool(k, v, line); },
          [ref](const RunConfig& c) { return std::string(ref(const_cast<RunConfig&>(c)) ? "true" : "false"); }};
}

#define WSOL_REF(expr) [](RunConfig& c) -> auto& { return c.expr; }

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"synth.image_size", count(WSOL_REF(synth.image_size))},
      {"synth.n_classes", count(WSOL_REF(synth.n_classes))},
      {"synth.n_train", count(WSOL_REF(synth.n_train))},
      {"synth.n_val", count(WSOL_REF(synth.n_val))},
      {"synth.n_test", count(WSOL_REF(synth.n_test))},
      {"synth.min_radius", real(WSOL_REF(synth.min_radius))},
      {"synth.max_radius", real(WSOL_REF(synth.max_radius))},
      {"synth.head_fraction", real(WSOL_REF(synth.head_fraction))},
      {"synth.stripe_period", real(WSOL_REF(synth.stripe_period))},
      {"synth.head_contrast", real(WSOL_REF(synth.head_contrast))},
      {"synth.body_contrast", real(WSOL_REF(synth.body_contrast))},
      {"synth.object_level", real(WSOL_REF(synth.object_level))},
      {"synth.background_level", real(WSOL_REF(synth.background_level))},
      {"synth.n_distractors", count(WSOL_REF(synth.n_distractors))},
      {"synth.distractor_min", real(WSOL_REF(synth.distractor_min))},
      {"synth.distractor_max", real(WSOL_REF(synth.distractor_max))},
      {"synth.distractor_contrast", real(WSOL_REF(synth.distractor_contrast))},
      {"synth.noise_std", real(WSOL_REF(synth.noise_std))},
      {"synth.seed", count(WSOL_REF(synth.seed))},
      {"train.batch_size", count(WSOL_REF(train.batch_size))},
      {"train.learning_rate", real(WSOL_REF(train.learning_rate))},
      {"train.momentum", real(WSOL_REF(train.momentum))},
      {"train.weight_decay", real(WSOL_REF(train.weight_decay))},
      {"train.grad_clip", real(WSOL_REF(train.grad_clip))},
      {"train.epochs", count(WSOL_REF(train.epochs))},
      {"train.margin", real(WSOL_REF(train.margin))},
      {"train.seed", count(WSOL_REF(train.seed))},
      {"train.eval_every", count(WSOL_REF(train.eval_every))},
      {"mask.drop_rate", real(WSOL_REF(train.mask.drop_rate))},
      {"mask.gamma_fg", real(WSOL_REF(train.mask.gamma_fg))},
      {"mask.gamma_bg", real(WSOL_REF(train.mask.gamma_bg))},
      {"ablation.attention", flag(WSOL_REF(train.flags.attention))},
      {"ablation.contrastive", flag(WSOL_REF(train.flags.contrastive))},
      {"ablation.consistency", flag(WSOL_REF(train.flags.consistency))},
      {"ablation.nonlocal", flag(WSOL_REF(train.flags.nonlocal))},
      {"ablation.dropped_foreground", flag(WSOL_REF(train.flags.dropped_foreground))},
      {"model.c1", count(WSOL_REF(train.model.c1))},
      {"model.c2", count(WSOL_REF(train.model.c2))},
      {"model.c3", count(WSOL_REF(train.model.c3))},
      {"model.embed_dim", count(WSOL_REF(train.model.embed_dim))},
      {"model.key_channels1", count(WSOL_REF(train.model.key_channels1))},
      {"model.key_channels2", count(WSOL_REF(train.model.key_channels2))},
      {"eval.n_thresholds", count(WSOL_REF(train.eval.n_thresholds))},
      {"eval.deltas",
       {[](RunConfig& c, std::string_view, std::string_view v, int line) {
          std::vector<double> deltas;
          std::stringstream ss{std::string(v)};
          std::string item;
          while (std::getline(ss, item, ',')) deltas.push_back(to_double("eval.deltas", item, line));
          if (deltas.empty()) throw ConfigError("'eval.deltas' needs at least one value", line);
          c.train.eval.iou_deltas = deltas;
        },
        [](const RunConfig& c) {
          std::string s;
          for (double d : c.train.eval.iou_deltas) s += (s.empty() ? "" : ",") + fmt(d);
          return s;
        }}},
      {"eval.fixed_threshold",
       {[](RunConfig& c, std::string_view, std::string_view v, int line) {
          const std::string s = trim(v);
          if (s == "auto" || s.empty())
            c.train.eval.fixed_threshold.reset();
          else
            c.train.eval.fixed_threshold = to_double("eval.fixed_threshold", s, line);
        },
        [](const RunConfig& c) {
          return c.train.eval.fixed_threshold ? fmt(*c.train.eval.fixed_threshold) : std::string("auto");
        }}},
      {"eval.connectivity",
       {[](RunConfig& c, std::string_view, std::string_view v, int line) {
          const std::string s = trim(v);
          if (s == "4")
            c.train.eval.connectivity = Connectivity::four;
          else if (s == "8")
            c.train.eval.connectivity = Connectivity::eight;
          else
            throw ConfigError("'eval.connectivity' must be 4 or 8", line);
        },
        [](const RunConfig& c) {
          return std::string(c.train.eval.connectivity == Connectivity::four ? "4" : "8");
        }}},
  };
  return table;
}

#undef WSOL_REF

const Field& lookup(std::string_view key, int line) {
  for (const auto& [k, f] : fields())
    if (k == key) return f;
  throw ConfigError("unknown key '" + std::string(key) + "'", line);
}

}  // namespace

void RunConfig::set(std::string_view key, std::string_view value, int line) {
  const std::string k = trim(key);
  lookup(k, line).set(*this, k, value, line);
}

std::string RunConfig::get(std::string_view key) const { return lookup(key, 0).get(*this); }

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> out = [] {
    std::vector<std::string> k;
    for (const auto& [name, f] : fields()) k.push_back(name);
    return k;
  }();
  return out;
}

void RunConfig::finalize() {
  train.model.n_classes = synth.n_classes;
  try {
    synth.validate();
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [k, f] : fields()) out += k + " = " + f.get(*this) + "\n";
  return out;
}

RunConfig parse_config(std::istream& in) {
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value'", lineno);
    cfg.set(t.substr(0, eq), t.substr(eq + 1), lineno);
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  return parse_config(in);
}

void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' must be key=value");
    cfg.set(o.substr(0, eq), o.substr(eq + 1));
  }
}

AblationFlags parse_ablation(std::string_view list) {
  AblationFlags f;
  std::stringstream ss{std::string(list)};
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty() || item == "none" || item == "full") continue;
    if (item == "no-ca")
      f.contrastive = false;
    else if (item == "no-fc")
      f.consistency = false;
    else if (item == "no-nonlocal")
      f.nonlocal = false;
    else if (item == "no-dfg")
      f.dropped_foreground = false;
    else if (item == "cls-only")
      f.attention = false;
    else
      throw ConfigError("unknown ablation '" + item + "' (expected no-ca, no-fc, no-nonlocal, no-dfg, cls-only)");
  }
  return f;
}

std::string ablation_name(const AblationFlags& f) {
  if (!f.attention) return "cls-only";
  std::string s;
  auto add = [&](bool off, const char* name) {
    if (off) s += (s.empty() ? "" : ",") + std::string(name);
  };
  add(!f.contrastive, "no-ca");
  add(!f.consistency, "no-fc");
  add(!f.nonlocal, "no-nonlocal");
  add(!f.dropped_foreground, "no-dfg");
  return s.empty() ? "full" : s;
}

}  // namespace wsol
