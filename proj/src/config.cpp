// Copyright 2026 The lowres Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lowres/config.hpp"

#include <charconv>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "lowres/checkpoint.hpp"

namespace lowres {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = first + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) throw std::invalid_argument("not a valid number: '" + text + "'");
  return value;
}

template <typename T>
std::string format_number(T value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc{}) throw std::logic_error("number formatting failed");
  return std::string(buf, ptr);
}

bool parse_bool(const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw std::invalid_argument("not a boolean: '" + text + "'");
}

int parse_int(const std::string& text) {
  const long long v = parse_number<long long>(text);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw std::invalid_argument("integer out of range: '" + text + "'");
  }
  return static_cast<int>(v);
}

struct Field {
  std::string key;  // section.name
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <typename M>
Field number_field(std::string key, M RunConfig::*group, double std::remove_reference_t<M>::*member) {
  return {std::move(key), [=](const RunConfig& c) { return format_number((c.*group).*member); },
          [=](RunConfig& c, const std::string& v) { (c.*group).*member = parse_number<double>(v); }};
}

template <typename M>
Field int_field(std::string key, M RunConfig::*group, int std::remove_reference_t<M>::*member) {
  return {std::move(key), [=](const RunConfig& c) { return format_number((c.*group).*member); },
          [=](RunConfig& c, const std::string& v) { (c.*group).*member = parse_int(v); }};
}

template <typename M, typename U>
Field unsigned_field(std::string key, M RunConfig::*group, U std::remove_reference_t<M>::*member) {
  return {std::move(key), [=](const RunConfig& c) { return format_number((c.*group).*member); },
          [=](RunConfig& c, const std::string& v) {
            if (!v.empty() && v[0] == '-') throw std::invalid_argument("expected a non-negative integer: '" + v + "'");
            (c.*group).*member = parse_number<U>(v);
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    using R = RunConfig;
    std::vector<Field> f;
    f.push_back({"data.classes",
                 [](const R& c) {
                   std::string out;
                   for (std::size_t i = 0; i < c.data.classes.size(); ++i) {
                     out += (i ? "," : "") + std::string(motion_name(c.data.classes[i]));
                   }
                   return out;
                 },
                 [](R& c, const std::string& v) {
                   std::vector<MotionClass> classes;
                   std::istringstream in(v);
                   std::string name;
                   while (std::getline(in, name, ',')) classes.push_back(parse_motion(trim(name)));
                   c.data.classes = classes;
                 }});
    f.push_back(int_field("data.clips_per_class", &R::data, &SynthSpec::clips_per_class));
    f.push_back(int_field("data.frames_per_clip", &R::data, &SynthSpec::frames_per_clip));
    f.push_back(int_field("data.height", &R::data, &SynthSpec::height));
    f.push_back(int_field("data.width", &R::data, &SynthSpec::width));
    f.push_back(int_field("data.unit_length", &R::data, &SynthSpec::unit_length));
    f.push_back(number_field("data.sprite_min", &R::data, &SynthSpec::sprite_min));
    f.push_back(number_field("data.sprite_max", &R::data, &SynthSpec::sprite_max));
    f.push_back(number_field("data.speed_min", &R::data, &SynthSpec::speed_min));
    f.push_back(number_field("data.speed_max", &R::data, &SynthSpec::speed_max));
    f.push_back(number_field("data.texture_contrast", &R::data, &SynthSpec::texture_contrast));
    f.push_back(number_field("data.class_hue_bias", &R::data, &SynthSpec::class_hue_bias));
    f.push_back(number_field("data.noise", &R::data, &SynthSpec::noise));
    f.push_back(unsigned_field("data.seed", &R::data, &SynthSpec::seed));
    f.push_back({"data.train_fraction", [](const R& c) { return format_number(c.train_fraction); },
                 [](R& c, const std::string& v) { c.train_fraction = parse_number<double>(v); }});
    f.push_back({"data.split_seed", [](const R& c) { return format_number(c.split_seed); },
                 [](R& c, const std::string& v) {
                   if (!v.empty() && v[0] == '-') throw std::invalid_argument("expected a non-negative integer");
                   c.split_seed = parse_number<std::uint64_t>(v);
                 }});

    f.push_back({"model.preset", [](const R& c) { return std::string(preset_name(c.train.preset)); },
                 [](R& c, const std::string& v) { c.train.preset = parse_preset(v); }});
    f.push_back({"model.streams", [](const R& c) { return std::string(streams_name(c.train.streams)); },
                 [](R& c, const std::string& v) { c.train.streams = parse_streams(v); }});
    f.push_back({"model.gru", [](const R& c) { return std::string(gru_mode_name(c.train.gru)); },
                 [](R& c, const std::string& v) { c.train.gru = parse_gru_mode(v); }});
    f.push_back({"model.fusion", [](const R& c) { return std::string(fusion_name(c.train.fusion)); },
                 [](R& c, const std::string& v) { c.train.fusion = parse_fusion(v); }});
    f.push_back(unsigned_field("model.hidden_dim", &R::train, &TrainConfig::hidden_dim));
    f.push_back(unsigned_field("model.fusion_out_dim", &R::train, &TrainConfig::fusion_out_dim));

    f.push_back(number_field("train.learning_rate", &R::train, &TrainConfig::learning_rate));
    f.push_back(number_field("train.weight_decay", &R::train, &TrainConfig::weight_decay));
    f.push_back(int_field("train.epochs", &R::train, &TrainConfig::epochs));
    f.push_back(int_field("train.fusion_epochs", &R::train, &TrainConfig::fusion_epochs));
    f.push_back(int_field("train.batch_size", &R::train, &TrainConfig::batch_size));
    f.push_back(number_field("train.rmsprop_decay", &R::train, &TrainConfig::rmsprop_decay));
    f.push_back(number_field("train.rmsprop_eps", &R::train, &TrainConfig::rmsprop_eps));
    f.push_back(unsigned_field("train.seed", &R::train, &TrainConfig::seed));
    f.push_back({"train.coupled", [](const R& c) { return std::string(c.train.coupled ? "true" : "false"); },
                 [](R& c, const std::string& v) { c.train.coupled = parse_bool(v); }});
    f.push_back(int_field("train.threads", &R::train, &TrainConfig::threads));

    f.push_back(number_field("flow.alpha", &R::flow, &FlowParams::alpha));
    f.push_back(int_field("flow.max_levels", &R::flow, &FlowParams::max_levels));
    f.push_back(int_field("flow.min_level_size", &R::flow, &FlowParams::min_level_size));
    f.push_back(number_field("flow.scale_factor", &R::flow, &FlowParams::scale_factor));
    f.push_back(int_field("flow.warps", &R::flow, &FlowParams::warps));
    f.push_back(int_field("flow.iterations", &R::flow, &FlowParams::iterations));
    f.push_back(number_field("flow.sor_omega", &R::flow, &FlowParams::sor_omega));
    f.push_back(number_field("flow.presmooth_sigma", &R::flow, &FlowParams::presmooth_sigma));
    f.push_back(number_field("flow.saturation_max", &R::flow, &FlowParams::saturation_max));
    return f;
  }();
  return table;
}

const Field& find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.key == key) return f;
  }
  throw std::invalid_argument("unknown config key '" + key + "'");
}

}  // namespace

RunConfig RunConfig::benchmark() {
  RunConfig c;
  c.data.clips_per_class = 15;
  c.data.class_hue_bias = 1.0;
  c.train.epochs = 25;
  c.train.fusion_epochs = 30;
  c.train.weight_decay = 5e-3;
  return c;
}

void RunConfig::validate() const {
  data.validate();
  train.validate();
  flow.validate();
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw std::invalid_argument("train_fraction must be in (0,1)");
  if (train.streams != StreamSet::Both && train.fusion != FusionKind::Sum) {
    // Single-stream models have nothing to fuse; only the default kind is accepted to avoid silent no-ops.
    throw std::invalid_argument("model.fusion applies only when model.streams = both");
  }
}

void set_config_value(RunConfig& config, const std::string& dotted_key, const std::string& value) {
  const Field& f = find_field(dotted_key);
  try {
    f.set(config, value);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(dotted_key + ": " + e.what());
  }
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.push_back(f.key);
  return keys;
}

RunConfig parse_run_config(const std::string& text) {
  static const std::set<std::string> sections = {"data", "model", "train", "flow"};
  RunConfig config;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    const auto where = "line " + std::to_string(line_no) + ": ";
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw std::invalid_argument(where + "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!sections.count(section)) throw std::invalid_argument(where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument(where + "expected key = value");
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.find('.') == std::string::npos) {
      if (section.empty()) throw std::invalid_argument(where + "key '" + key + "' outside any section");
      key = section + "." + key;
    }
    if (!seen.insert(key).second) throw std::invalid_argument(where + "duplicate key '" + key + "'");
    try {
      set_config_value(config, key, value);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(where + e.what());
    }
  }
  config.validate();
  return config;
}

RunConfig load_run_config(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  return parse_run_config(std::string(bytes.begin(), bytes.end()));
}

std::string serialize_run_config(const RunConfig& config) {
  std::ostringstream os;
  std::string section;
  for (const auto& f : fields()) {
    const auto dot = f.key.find('.');
    const std::string s = f.key.substr(0, dot);
    if (s != section) {
      if (!section.empty()) os << '\n';
      os << '[' << s << "]\n";
      section = s;
    }
    os << f.key.substr(dot + 1) << " = " << f.get(config) << '\n';
  }
  return os.str();
}

}  // namespace lowres
