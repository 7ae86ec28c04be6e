/*
 * Copyright 2026 The rmamba Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "rmamba/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <vector>

namespace rmamba {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

long long parse_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) {
    throw ConfigError("config: '" + key + "' expects an integer, got '" + v + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) {
    throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  const std::string l = lower(v);
  if (l == "1" || l == "true" || l == "yes" || l == "on") return true;
  if (l == "0" || l == "false" || l == "no" || l == "off") return false;
  throw ConfigError("config: '" + key + "' expects a boolean, got '" + v + "'");
}

std::array<Index, 4> parse_quad(const std::string& key, const std::string& v) {
  std::array<Index, 4> out{};
  std::stringstream ss(v);
  std::string item;
  std::size_t i = 0;
  while (std::getline(ss, item, ',')) {
    if (i >= 4) break;
    out[i++] = static_cast<Index>(parse_int(key, trim(item)));
  }
  if (i != 4 || std::getline(ss, item, ',')) {
    throw ConfigError("config: '" + key + "' expects four comma-separated integers, got '" + v +
                      "'");
  }
  return out;
}

std::string quad(const std::array<Index, 4>& q) {
  return std::to_string(q[0]) + "," + std::to_string(q[1]) + "," + std::to_string(q[2]) + "," +
         std::to_string(q[3]);
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

Variant parse_variant(const std::string& v) {
  const std::string l = lower(v);
  if (l == "t" || l == "tiny") return Variant::Tiny;
  if (l == "s" || l == "small") return Variant::Small;
  throw ConfigError("config: unknown variant '" + v + "' (expected T or S)");
}

AttentionMode parse_attention(const std::string& v) {
  const std::string l = lower(v);
  if (l == "rma") return AttentionMode::RMA;
  if (l == "ra") return AttentionMode::RA;
  throw ConfigError("config: unknown attention '" + v + "' (expected RMA or RA)");
}

ScanAlgorithm parse_scan(const std::string& v) {
  const std::string l = lower(v);
  if (l == "sequential") return ScanAlgorithm::Sequential;
  if (l == "parallel") return ScanAlgorithm::Parallel;
  throw ConfigError("config: unknown scan '" + v + "' (expected sequential or parallel)");
}

std::vector<std::pair<std::string, std::string>> parse_pairs(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    }
    out.emplace_back(lower(trim(line.substr(0, eq))), trim(line.substr(eq + 1)));
  }
  return out;
}

bool apply_model_key(ModelConfig& m, const std::string& k, const std::string& v) {
  if (k == "n_extra_vss") {
    m.n_extra_vss = static_cast<int>(parse_int(k, v));
  } else if (k == "attention") {
    m.attention = parse_attention(v);
  } else if (k == "ladder") {
    m.ladder = parse_quad(k, v);
  } else if (k == "depths") {
    m.depths = parse_quad(k, v);
  } else if (k == "desk_divisor") {
    m.desk_divisor = static_cast<Index>(parse_int(k, v));
  } else if (k == "d_state") {
    m.d_state = static_cast<Index>(parse_int(k, v));
  } else if (k == "expansion") {
    m.expansion = static_cast<Index>(parse_int(k, v));
  } else if (k == "ffn_ratio") {
    m.ffn_ratio = static_cast<Index>(parse_int(k, v));
  } else if (k == "decoder_channels") {
    m.decoder_channels = static_cast<Index>(parse_int(k, v));
  } else if (k == "scan") {
    m.scan = parse_scan(v);
  } else {
    return false;
  }
  return true;
}

bool apply_train_key(TrainConfig& t, const std::string& k, const std::string& v) {
  if (k == "lr") {
    t.lr = parse_double(k, v);
  } else if (k == "lr_factor") {
    t.lr_factor = parse_double(k, v);
  } else if (k == "lr_patience") {
    t.lr_patience = static_cast<int>(parse_int(k, v));
  } else if (k == "plateau_threshold") {
    t.plateau_threshold = parse_double(k, v);
  } else if (k == "max_epochs") {
    t.max_epochs = static_cast<int>(parse_int(k, v));
  } else if (k == "early_stop_patience") {
    t.early_stop_patience = static_cast<int>(parse_int(k, v));
  } else if (k == "batch_size") {
    t.batch_size = static_cast<int>(parse_int(k, v));
  } else if (k == "image_size") {
    t.image_size = static_cast<Index>(parse_int(k, v));
  } else if (k == "seed") {
    t.seed = static_cast<std::uint64_t>(parse_int(k, v));
  } else if (k == "augment") {
    t.augment = parse_bool(k, v);
  } else {
    return false;
  }
  return true;
}

}  // namespace

std::string to_string(Variant v) { return v == Variant::Tiny ? "T" : "S"; }
std::string to_string(AttentionMode m) { return m == AttentionMode::RMA ? "RMA" : "RA"; }

ModelConfig ModelConfig::for_variant(Variant v) {
  ModelConfig m;
  m.variant = v;
  if (v == Variant::Tiny) {
    m.n_extra_vss = 0;
    m.depths = {2, 2, 2, 2};
  } else {
    m.n_extra_vss = 1;
    m.depths = {2, 2, 4, 2};
  }
  return m;
}

ModelConfig ModelConfig::desk(Variant v) {
  ModelConfig m = for_variant(v);
  m.desk_divisor = 8;
  return m;
}

std::array<Index, 4> ModelConfig::channels() const {
  std::array<Index, 4> c{};
  for (std::size_t i = 0; i < 4; ++i) c[i] = ladder[i] / desk_divisor;
  return c;
}

void ModelConfig::validate() const {
  if (desk_divisor < 1) throw ConfigError("model: desk_divisor must be >= 1");
  for (std::size_t i = 0; i < 4; ++i) {
    if (ladder[i] % desk_divisor != 0 || ladder[i] / desk_divisor < 1) {
      throw ConfigError("model: ladder entry " + std::to_string(ladder[i]) +
                        " is not divisible by desk_divisor " + std::to_string(desk_divisor));
    }
    if (depths[i] < 1) throw ConfigError("model: every stage depth must be >= 1");
  }
  if (n_extra_vss < 0) throw ConfigError("model: n_extra_vss must be >= 0");
  if (d_state < 1 || expansion < 1 || ffn_ratio < 1 || decoder_channels < 1) {
    throw ConfigError("model: d_state, expansion, ffn_ratio, decoder_channels must be >= 1");
  }
}

std::map<std::string, std::string> ModelConfig::to_map() const {
  return {{"variant", to_string(variant)},
          {"n_extra_vss", std::to_string(n_extra_vss)},
          {"attention", to_string(attention)},
          {"ladder", quad(ladder)},
          {"depths", quad(depths)},
          {"desk_divisor", std::to_string(desk_divisor)},
          {"d_state", std::to_string(d_state)},
          {"expansion", std::to_string(expansion)},
          {"ffn_ratio", std::to_string(ffn_ratio)},
          {"decoder_channels", std::to_string(decoder_channels)},
          {"scan", scan == ScanAlgorithm::Sequential ? "sequential" : "parallel"}};
}

TrainConfig TrainConfig::desk() {
  TrainConfig t;
  t.lr = 2e-3;
  t.max_epochs = 200;
  t.batch_size = 2;
  t.image_size = 64;
  t.augment = false;
  return t;
}

void TrainConfig::validate() const {
  if (!(lr > 0)) throw ConfigError("train: lr must be positive");
  if (!(lr_factor > 0 && lr_factor < 1)) throw ConfigError("train: lr_factor must be in (0,1)");
  if (lr_patience < 1 || early_stop_patience < 1) {
    throw ConfigError("train: patience values must be positive");
  }
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
  if (image_size < 32 || image_size % 32 != 0) {
    throw ConfigError("train: image_size must be a positive multiple of 32, got " +
                      std::to_string(image_size));
  }
}

std::map<std::string, std::string> TrainConfig::to_map() const {
  return {{"lr", num(lr)},
          {"lr_factor", num(lr_factor)},
          {"lr_patience", std::to_string(lr_patience)},
          {"plateau_threshold", num(plateau_threshold)},
          {"max_epochs", std::to_string(max_epochs)},
          {"early_stop_patience", std::to_string(early_stop_patience)},
          {"batch_size", std::to_string(batch_size)},
          {"image_size", std::to_string(image_size)},
          {"seed", std::to_string(seed)},
          {"augment", augment ? "true" : "false"}};
}

RunConfig parse_config(const std::string& text) {
  const auto pairs = parse_pairs(text);
  RunConfig rc;
  Variant variant = Variant::Tiny;
  bool desk = false;
  for (const auto& [k, v] : pairs) {
    if (k == "variant") variant = parse_variant(v);
    if (k == "preset") {
      const std::string l = lower(v);
      if (l == "desk") {
        desk = true;
      } else if (l != "full") {
        throw ConfigError("config: unknown preset '" + v + "' (expected desk or full)");
      }
    }
  }
  rc.model = desk ? ModelConfig::desk(variant) : ModelConfig::for_variant(variant);
  if (desk) rc.train = TrainConfig::desk();
  for (const auto& [k, v] : pairs) {
    if (k == "variant" || k == "preset") continue;
    if (!apply_model_key(rc.model, k, v) && !apply_train_key(rc.train, k, v)) {
      throw ConfigError("config: unknown key '" + k + "'");
    }
  }
  rc.model.validate();
  rc.train.validate();
  return rc;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize(const ModelConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : cfg.to_map()) out += k + "=" + v + "\n";
  return out;
}

ModelConfig parse_model_config(const std::string& text) {
  ModelConfig m;
  for (const auto& [k, v] : parse_pairs(text)) {
    if (k == "variant") {
      m.variant = parse_variant(v);
    } else if (!apply_model_key(m, k, v)) {
      throw ConfigError("model config: unknown key '" + k + "'");
    }
  }
  m.validate();
  return m;
}

}  // namespace rmamba
