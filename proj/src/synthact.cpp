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

#include "lowres/synthact.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "lowres/checkpoint.hpp"
#include "lowres/clip_io.hpp"

namespace lowres {

namespace {

constexpr std::array<const char*, 8> kMotionNames = {"move_left", "move_right", "move_up", "move_down",
                                                     "grow",      "shrink",     "bounce",  "spin"};

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct Rgb {
  double r, g, b;
};

Rgb hsv_to_rgb(double h, double s, double v) {
  h = h - std::floor(h);
  const double c = v * s;
  const double hp = h * 6.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp) % 6) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  const double m = v - c;
  return {r + m, g + m, b + m};
}

struct Wave {
  double kx, ky, phase, amp;
};

std::vector<Wave> random_waves(std::mt19937_64& rng, int count, double kmin, double kmax) {
  std::uniform_real_distribution<double> freq(kmin, kmax);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> amp(0.5, 1.0);
  std::vector<Wave> waves;
  for (int i = 0; i < count; ++i) {
    const double k = freq(rng);
    const double a = angle(rng);
    waves.push_back({k * std::cos(a), k * std::sin(a), angle(rng), amp(rng)});
  }
  return waves;
}

double wave_sum(const std::vector<Wave>& waves, double x, double y) {
  double s = 0.0, norm = 0.0;
  for (const auto& w : waves) {
    s += w.amp * std::sin(w.kx * x + w.ky * y + w.phase);
    norm += w.amp;
  }
  return s / norm;  // in [-1, 1]
}

struct Pose {
  double cx, cy, scale, angle;
};

int class_label(const SynthSpec& spec, MotionClass motion) {
  auto it = std::find(spec.classes.begin(), spec.classes.end(), motion);
  if (it == spec.classes.end()) throw std::invalid_argument(std::string("class not in spec: ") + motion_name(motion));
  return static_cast<int>(it - spec.classes.begin());
}

}  // namespace

const char* motion_name(MotionClass m) { return kMotionNames[static_cast<std::size_t>(m)]; }

MotionClass parse_motion(const std::string& s) {
  std::string lower;
  for (char c : s) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  for (std::size_t i = 0; i < kMotionNames.size(); ++i) {
    if (lower == kMotionNames[i]) return static_cast<MotionClass>(i);
  }
  throw std::invalid_argument("unknown motion class '" + s + "'");
}

std::vector<MotionClass> directional_classes() {
  return {MotionClass::MoveLeft, MotionClass::MoveRight, MotionClass::MoveUp, MotionClass::MoveDown};
}

void SynthSpec::validate() const {
  if (classes.size() < 2) throw std::invalid_argument("synth spec needs at least 2 classes");
  std::set<MotionClass> unique(classes.begin(), classes.end());
  if (unique.size() != classes.size()) throw std::invalid_argument("synth spec lists a class twice");
  if (clips_per_class < 1) throw std::invalid_argument("clips_per_class must be >= 1");
  if (unit_length < 1) throw std::invalid_argument("unit_length must be >= 1");
  if (frames_per_clip < unit_length) throw std::invalid_argument("frames_per_clip must be >= unit_length");
  if (height < 32 || width < 32) throw std::invalid_argument("canvas must be at least 32x32");
  if (!(sprite_min > 0.0) || sprite_max < sprite_min) throw std::invalid_argument("bad sprite size range");
  if (!(speed_min >= 0.0) || speed_max < speed_min) throw std::invalid_argument("bad speed range");
  if (sprite_max >= std::min(height, width)) throw std::invalid_argument("sprite larger than canvas");
  if (!(texture_contrast >= 0.0 && texture_contrast <= 1.0)) throw std::invalid_argument("texture_contrast not in [0,1]");
  if (!(class_hue_bias >= 0.0 && class_hue_bias <= 1.0)) throw std::invalid_argument("class_hue_bias not in [0,1]");
  if (!(noise >= 0.0)) throw std::invalid_argument("noise must be non-negative");
}

std::string SynthSpec::canonical() const {
  std::ostringstream os;
  os.precision(17);
  os << "classes=";
  for (std::size_t i = 0; i < classes.size(); ++i) os << (i ? "," : "") << motion_name(classes[i]);
  os << ";clips_per_class=" << clips_per_class << ";frames=" << frames_per_clip << ";canvas=" << height << "x"
     << width << ";unit=" << unit_length << ";sprite=" << sprite_min << "-" << sprite_max << ";speed=" << speed_min
     << "-" << speed_max << ";contrast=" << texture_contrast << ";hue_bias=" << class_hue_bias
     << ";noise=" << noise << ";seed=" << seed;
  return os.str();
}

std::uint64_t SynthSpec::hash() const {
  const std::string text = canonical();
  return fnv1a(text.data(), text.size());
}

VideoClip render_clip(const SynthSpec& spec, MotionClass motion, int index) {
  spec.validate();
  const int label = class_label(spec, motion);
  std::mt19937_64 rng(mix64(spec.seed ^ mix64((static_cast<std::uint64_t>(motion) << 32) | static_cast<std::uint32_t>(index))));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  const int H = spec.height, W = spec.width, L = spec.frames_per_clip;
  const double size = uniform(spec.sprite_min, spec.sprite_max);
  const bool spin = motion == MotionClass::Spin;
  const bool ellipse = !spin && unit(rng) < 0.5;
  const double aspect = spin ? 1.7 : uniform(0.75, 1.3);
  const double half_w = 0.5 * size * std::sqrt(aspect);
  const double half_h = 0.5 * size / std::sqrt(aspect);

  const double class_hue = static_cast<double>(label) / static_cast<double>(spec.classes.size());
  const double hue = spec.class_hue_bias * class_hue + (1.0 - spec.class_hue_bias) * unit(rng) +
                     spec.class_hue_bias * uniform(-0.05, 0.05);
  const Rgb base = hsv_to_rgb(hue, uniform(0.55, 0.85), uniform(0.7, 0.95));
  const auto sprite_waves = random_waves(rng, 3, 4.0 / size, 10.0 / size);

  const double bg_level = uniform(0.2, 0.4);
  const Rgb bg_tint{uniform(0.85, 1.15), uniform(0.85, 1.15), uniform(0.85, 1.15)};
  const auto bg_waves = random_waves(rng, 4, 0.02, 0.08);

  // Motion program: pose per frame. Start positions keep the whole path on the canvas.
  const double speed = uniform(spec.speed_min, spec.speed_max);
  const double travel = speed * (L - 1);
  const double reach = std::hypot(half_w, half_h) + 2.0;
  auto span_start = [&](double extent, double path) {
    const double lo = reach, hi = extent - reach - path;
    return hi > lo ? uniform(lo, hi) : 0.5 * (extent - path);
  };
  std::vector<Pose> poses(static_cast<std::size_t>(L));
  const double cx0 = uniform(reach, W - reach);
  const double cy0 = uniform(reach, H - reach);
  const double angle0 = uniform(0.0, std::numbers::pi);
  const double spin_rate = (unit(rng) < 0.5 ? -1.0 : 1.0) * uniform(0.1, 0.16);
  const double bounce_period = uniform(10.0, 14.0);
  const double bounce_height = uniform(0.25, 0.35) * H;
  const double bounce_floor = uniform(0.5 * H + bounce_height * 0.5, H - reach);
  const double move_x = span_start(W, travel);
  const double move_y = span_start(H, travel);
  for (int t = 0; t < L; ++t) {
    Pose p{cx0, cy0, 1.0, ellipse ? 0.0 : angle0};
    const double frac = L > 1 ? static_cast<double>(t) / (L - 1) : 0.0;
    switch (motion) {
      case MotionClass::MoveLeft: p.cx = W - move_x - speed * t; break;
      case MotionClass::MoveRight: p.cx = move_x + speed * t; break;
      case MotionClass::MoveUp: p.cy = H - move_y - speed * t; break;
      case MotionClass::MoveDown: p.cy = move_y + speed * t; break;
      case MotionClass::Grow: p.scale = 0.55 + 0.9 * frac; break;
      case MotionClass::Shrink: p.scale = 1.45 - 0.9 * frac; break;
      case MotionClass::Bounce:
        p.cy = std::min(bounce_floor, H - reach) -
               bounce_height * std::abs(std::sin(std::numbers::pi * t / bounce_period));
        p.cy = std::max(p.cy, reach);
        break;
      case MotionClass::Spin: p.angle = angle0 + spin_rate * t; break;
    }
    if (motion == MotionClass::Grow || motion == MotionClass::Shrink) {
      p.cx = std::clamp(p.cx, reach * 1.45, W - reach * 1.45);
      p.cy = std::clamp(p.cy, reach * 1.45, H - reach * 1.45);
    }
    poses[static_cast<std::size_t>(t)] = p;
  }

  Frame background(H, W);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const double v = bg_level * (1.0 + 0.35 * wave_sum(bg_waves, x, y));
      background.at(y, x, 0) = static_cast<float>(v * bg_tint.r);
      background.at(y, x, 1) = static_cast<float>(v * bg_tint.g);
      background.at(y, x, 2) = static_cast<float>(v * bg_tint.b);
    }
  }

  std::normal_distribution<double> gauss(0.0, 1.0);
  VideoClip clip;
  clip.label = label;
  clip.resolution = Resolution::High;
  clip.source_id = clip_stem_for(motion, index);
  for (int t = 0; t < L; ++t) {
    const Pose& p = poses[static_cast<std::size_t>(t)];
    Frame f = background;
    const double c = std::cos(p.angle), s = std::sin(p.angle);
    const double r = reach * p.scale;
    const int y0 = std::max(0, static_cast<int>(std::floor(p.cy - r)));
    const int y1 = std::min(H - 1, static_cast<int>(std::ceil(p.cy + r)));
    const int x0 = std::max(0, static_cast<int>(std::floor(p.cx - r)));
    const int x1 = std::min(W - 1, static_cast<int>(std::ceil(p.cx + r)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dx = (x + 0.5 - p.cx) / p.scale, dy = (y + 0.5 - p.cy) / p.scale;
        const double u = c * dx + s * dy;   // sprite-local coords
        const double v = -s * dx + c * dy;
        const double nu = u / half_w, nv = v / half_h;
        const bool inside = ellipse ? nu * nu + nv * nv <= 1.0 : std::abs(nu) <= 1.0 && std::abs(nv) <= 1.0;
        if (!inside) continue;
        const double shade = 1.0 + spec.texture_contrast * wave_sum(sprite_waves, u, v);
        f.at(y, x, 0) = static_cast<float>(base.r * shade);
        f.at(y, x, 1) = static_cast<float>(base.g * shade);
        f.at(y, x, 2) = static_cast<float>(base.b * shade);
      }
    }
    if (spec.noise > 0.0) {
      for (float& px : f.pixels) px = static_cast<float>(px + spec.noise * gauss(rng));
    }
    clip.frames.push_back(quantize_frame(f));
  }
  return clip;
}

std::string clip_stem_for(MotionClass motion, int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "_%03d", index);
  return std::string(motion_name(motion)) + buf;
}

std::string clip_id_for(const std::string& stem, Resolution resolution) {
  return stem + (resolution == Resolution::High ? "-hr" : "-lr");
}

std::string clip_stem(const std::string& clip_id) {
  if (clip_id.size() > 3) {
    const std::string tail = clip_id.substr(clip_id.size() - 3);
    if (tail == "-hr" || tail == "-lr") return clip_id.substr(0, clip_id.size() - 3);
  }
  return clip_id;
}

std::vector<RenderedClip> generate_clips(const SynthSpec& spec, int threads) {
  spec.validate();
  std::vector<RenderedClip> out(spec.classes.size() * static_cast<std::size_t>(spec.clips_per_class));
  const std::size_t workers = static_cast<std::size_t>(std::max(1, threads));
  auto render = [&](std::size_t i) {
    const MotionClass m = spec.classes[i / spec.clips_per_class];
    const int index = static_cast<int>(i % spec.clips_per_class);
    out[i] = {clip_stem_for(m, index), class_label(spec, m), render_clip(spec, m, index)};
  };
  if (workers == 1) {
    for (std::size_t i = 0; i < out.size(); ++i) render(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < out.size(); i += workers) render(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  return out;
}

void DatasetManifest::validate() const {
  std::set<std::string> ids;
  for (const auto& e : entries) {
    if (!ids.insert(e.clip_id).second) throw std::invalid_argument("manifest: duplicate clip_id " + e.clip_id);
    if (e.label < 0 || static_cast<std::size_t>(e.label) >= class_names.size()) {
      throw std::invalid_argument("manifest: label out of range for " + e.clip_id);
    }
    if (e.split != "train" && e.split != "test" && e.split != "none") {
      throw std::invalid_argument("manifest: bad split tag '" + e.split + "' for " + e.clip_id);
    }
  }
}

std::vector<ManifestEntry> DatasetManifest::select(const std::string& split_tag, Resolution resolution) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries) {
    if (e.split == split_tag && e.resolution == resolution) out.push_back(e);
  }
  return out;
}

DatasetManifest generate_dataset(const SynthSpec& spec, const std::filesystem::path& root, int threads) {
  const auto clips = generate_clips(spec, threads);
  DatasetManifest manifest;
  manifest.spec_hash = spec.hash();
  for (MotionClass m : spec.classes) manifest.class_names.push_back(motion_name(m));
  std::vector<VideoClip> lows(clips.size());
  const std::size_t workers = static_cast<std::size_t>(std::max(1, threads));
  {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < clips.size(); i += workers) lows[i] = quantize_clip(make_lr_clip(clips[i].high));
      });
    }
    for (auto& t : pool) t.join();
  }
  for (std::size_t i = 0; i < clips.size(); ++i) {
    for (Resolution res : {Resolution::High, Resolution::Low}) {
      const std::string id = clip_id_for(clips[i].stem, res);
      const std::string rel = "clips/" + id;
      save_clip(root / rel, res == Resolution::High ? clips[i].high : lows[i]);
      manifest.entries.push_back({id, clips[i].label, rel, "none", res});
    }
  }
  write_manifest(root / "manifest.tsv", manifest);
  return manifest;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  manifest.validate();
  std::ostringstream os;
  os << "# spec_hash=" << hex64(manifest.spec_hash) << " classes=";
  for (std::size_t i = 0; i < manifest.class_names.size(); ++i) os << (i ? "," : "") << manifest.class_names[i];
  os << "\n";
  for (const auto& e : manifest.entries) {
    os << e.clip_id << '\t' << e.label << '\t' << e.path << '\t' << e.split << '\t' << resolution_name(e.resolution)
       << '\n';
  }
  const std::string text = os.str();
  write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  std::string line;
  DatasetManifest m;
  if (!std::getline(in, line) || line.rfind("# spec_hash=", 0) != 0) throw IoError(path, "missing manifest header");
  {
    std::istringstream hs(line.substr(2));
    std::string tok;
    while (hs >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) throw IoError(path, "bad header token '" + tok + "'");
      const std::string key = tok.substr(0, eq), value = tok.substr(eq + 1);
      if (key == "spec_hash") {
        m.spec_hash = std::stoull(value, nullptr, 16);
      } else if (key == "classes") {
        std::istringstream cs(value);
        std::string name;
        while (std::getline(cs, name, ',')) m.class_names.push_back(name);
      }
    }
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::istringstream ls(line);
    std::string field;
    while (std::getline(ls, field, '\t')) fields.push_back(field);
    if (fields.size() != 5) throw IoError(path, "line " + std::to_string(line_no) + ": expected 5 fields");
    ManifestEntry e;
    e.clip_id = fields[0];
    try {
      e.label = std::stoi(fields[1]);
      e.resolution = parse_resolution(fields[4]);
    } catch (const std::exception& ex) {
      throw IoError(path, "line " + std::to_string(line_no) + ": " + ex.what());
    }
    e.path = fields[2];
    e.split = fields[3];
    m.entries.push_back(e);
  }
  try {
    m.validate();
  } catch (const std::invalid_argument& ex) {
    throw IoError(path, ex.what());
  }
  return m;
}

std::pair<DatasetManifest, DatasetManifest> split(const DatasetManifest& manifest, double train_fraction,
                                                  std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("split: train_fraction must be in (0, 1)");
  }
  manifest.validate();
  const std::size_t K = manifest.class_names.size();
  std::vector<std::vector<std::string>> stems(K);
  {
    std::set<std::string> seen;
    for (const auto& e : manifest.entries) {
      const std::string stem = clip_stem(e.clip_id);
      if (seen.insert(stem).second) stems[static_cast<std::size_t>(e.label)].push_back(stem);
    }
  }
  std::size_t total = 0;
  for (std::size_t k = 0; k < K; ++k) {
    if (stems[k].size() < 2) {
      throw std::invalid_argument("split: class " + manifest.class_names[k] + " has fewer than 2 clips");
    }
    std::sort(stems[k].begin(), stems[k].end());
    total += stems[k].size();
  }

  // Largest-remainder apportionment of round(f * N) train slots, then keep each class in [1, n-1].
  const auto target = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(total)));
  std::vector<std::size_t> take(K);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < K; ++k) {
    const double quota = train_fraction * static_cast<double>(stems[k].size());
    take[k] = static_cast<std::size_t>(std::floor(quota));
    assigned += take[k];
    remainders.emplace_back(-(quota - std::floor(quota)), k);
  }
  std::stable_sort(remainders.begin(), remainders.end());
  for (std::size_t i = 0; assigned < target && i < remainders.size(); ++i, ++assigned) ++take[remainders[i].second];
  for (std::size_t k = 0; k < K; ++k) take[k] = std::clamp<std::size_t>(take[k], 1, stems[k].size() - 1);

  std::set<std::string> train_stems;
  for (std::size_t k = 0; k < K; ++k) {
    std::mt19937_64 rng(mix64(seed ^ mix64(0x53504c4954ULL + k)));
    std::shuffle(stems[k].begin(), stems[k].end(), rng);
    train_stems.insert(stems[k].begin(), stems[k].begin() + static_cast<std::ptrdiff_t>(take[k]));
  }
  DatasetManifest train{manifest.spec_hash, manifest.class_names, {}};
  DatasetManifest test{manifest.spec_hash, manifest.class_names, {}};
  for (ManifestEntry e : manifest.entries) {
    const bool is_train = train_stems.count(clip_stem(e.clip_id)) > 0;
    e.split = is_train ? "train" : "test";
    (is_train ? train : test).entries.push_back(e);
  }
  return {train, test};
}

DatasetManifest merge_split(const DatasetManifest& train, const DatasetManifest& test) {
  if (train.spec_hash != test.spec_hash || train.class_names != test.class_names) {
    throw std::invalid_argument("merge_split: halves come from different datasets");
  }
  DatasetManifest out{train.spec_hash, train.class_names, train.entries};
  out.entries.insert(out.entries.end(), test.entries.begin(), test.entries.end());
  out.validate();
  return out;
}

}  // namespace lowres
