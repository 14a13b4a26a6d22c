/*
 * Copyright 2026 the lu2net authors
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

#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lu2net/loss.hpp"
#include "lu2net/optim.hpp"

namespace lu2net::config {

/// key = value lines grouped under [section] headers; '#' and ';' start
/// comments. Errors carry the 1-based line number.
struct IniEntry {
  std::string key;
  std::string value;
  int line = 0;
};

struct IniFile {
  std::map<std::string, std::vector<IniEntry>> sections;
};

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline IniFile parse_ini_text(const std::string& text, const std::string& origin) {
  IniFile ini;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(strcat_(origin, ":", lineno, ": malformed section header '", line, "'"));
      section = trim(line.substr(1, line.size() - 2));
      ini.sections[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(strcat_(origin, ":", lineno, ": expected 'key = value', got '", line, "'"));
    IniEntry e{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), lineno};
    if (e.key.empty()) throw ConfigError(strcat_(origin, ":", lineno, ": empty key"));
    ini.sections[section].push_back(std::move(e));
  }
  return ini;
}

inline IniFile parse_ini_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError(strcat_("cannot open config file ", path));
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_ini_text(ss.str(), path);
}

namespace detail {

inline int to_int(const IniEntry& e, const std::string& origin) {
  try {
    std::size_t used;
    const int v = std::stoi(e.value, &used);
    if (used != e.value.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw ConfigError(strcat_(origin, ":", e.line, ": '", e.key, "' expects an integer, got '", e.value, "'"));
  }
}

inline double to_double(const IniEntry& e, const std::string& origin) {
  try {
    std::size_t used;
    const double v = std::stod(e.value, &used);
    if (used != e.value.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw ConfigError(strcat_(origin, ":", e.line, ": '", e.key, "' expects a number, got '", e.value, "'"));
  }
}

inline bool to_bool(const IniEntry& e, const std::string& origin) {
  if (e.value == "true" || e.value == "1" || e.value == "on") return true;
  if (e.value == "false" || e.value == "0" || e.value == "off") return false;
  throw ConfigError(strcat_(origin, ":", e.line, ": '", e.key, "' expects true/false, got '", e.value, "'"));
}

inline std::vector<int> to_int_list(const IniEntry& e, const std::string& origin) {
  std::vector<int> out;
  std::istringstream is(e.value);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) continue;
    try {
      out.push_back(std::stoi(tok));
    } catch (...) {
      throw ConfigError(strcat_(origin, ":", e.line, ": '", e.key, "' expects a comma-separated integer list"));
    }
  }
  if (out.empty())
    throw ConfigError(strcat_(origin, ":", e.line, ": '", e.key, "' expects a nonempty integer list"));
  return out;
}

}  // namespace detail

/// Dataset-facing knobs that belong to neither the network nor the trainer.
struct DataConfig {
  int target_size = 256;
  double split_ratio = 0.8;
  std::uint64_t split_seed = 1;
};

inline void apply_network(const IniFile& ini, NetworkConfig& cfg, const std::string& origin) {
  auto it = ini.sections.find("network");
  if (it == ini.sections.end()) return;
  for (const auto& e : it->second) {
    if (e.key == "stage_widths")
      cfg.stage_widths = detail::to_int_list(e, origin);
    else if (e.key == "axial_k")
      cfg.axial_k = detail::to_int(e, origin);
    else if (e.key == "ca_reduction")
      cfg.ca_reduction = detail::to_int(e, origin);
    else if (e.key == "activation")
      cfg.activation = parse_activation(e.value);
    else if (e.key == "output_activation")
      cfg.output_activation = parse_activation(e.value);
    else if (e.key == "input_channels")
      cfg.input_channels = detail::to_int(e, origin);
    else if (e.key == "output_channels")
      cfg.output_channels = detail::to_int(e, origin);
    else
      throw ConfigError(strcat_(origin, ":", e.line, ": unknown [network] key '", e.key, "'"));
  }
}

inline void apply_train(const IniFile& ini, optim::TrainConfig& cfg, const std::string& origin) {
  auto it = ini.sections.find("train");
  if (it == ini.sections.end()) return;
  for (const auto& e : it->second) {
    if (e.key == "epochs")
      cfg.epochs = detail::to_int(e, origin);
    else if (e.key == "lr0")
      cfg.lr0 = detail::to_double(e, origin);
    else if (e.key == "decay_factor")
      cfg.decay_factor = detail::to_double(e, origin);
    else if (e.key == "decay_every")
      cfg.decay_every = detail::to_int(e, origin);
    else if (e.key == "beta1")
      cfg.beta1 = detail::to_double(e, origin);
    else if (e.key == "beta2")
      cfg.beta2 = detail::to_double(e, origin);
    else if (e.key == "eps")
      cfg.eps = detail::to_double(e, origin);
    else if (e.key == "batch_size")
      cfg.batch_size = detail::to_int(e, origin);
    else if (e.key == "checkpoint_every")
      cfg.checkpoint_every = detail::to_int(e, origin);
    else if (e.key == "eval_every")
      cfg.eval_every = detail::to_int(e, origin);
    else if (e.key == "grad_clip")
      cfg.grad_clip = detail::to_double(e, origin);
    else if (e.key == "seed")
      cfg.seed = static_cast<std::uint64_t>(detail::to_int(e, origin));
    else
      throw ConfigError(strcat_(origin, ":", e.line, ": unknown [train] key '", e.key, "'"));
  }
}

inline void apply_loss(const IniFile& ini, loss::LossConfig& cfg, const std::string& origin) {
  auto it = ini.sections.find("loss");
  if (it == ini.sections.end()) return;
  for (const auto& e : it->second) {
    if (e.key == "use_rgb")
      cfg.use_rgb = detail::to_bool(e, origin);
    else if (e.key == "use_lab")
      cfg.use_lab = detail::to_bool(e, origin);
    else if (e.key == "use_lch")
      cfg.use_lch = detail::to_bool(e, origin);
    else if (e.key == "use_ssim")
      cfg.use_ssim = detail::to_bool(e, origin);
    else if (e.key == "use_vgg")
      cfg.use_vgg = detail::to_bool(e, origin);
    else if (e.key == "w_rgb")
      cfg.w_rgb = detail::to_double(e, origin);
    else if (e.key == "w_lab")
      cfg.w_lab = detail::to_double(e, origin);
    else if (e.key == "w_lch")
      cfg.w_lch = detail::to_double(e, origin);
    else if (e.key == "w_ssim")
      cfg.w_ssim = detail::to_double(e, origin);
    else if (e.key == "w_vgg")
      cfg.w_vgg = detail::to_double(e, origin);
    else if (e.key == "lab_scale_l")
      cfg.lab_scale_l = detail::to_double(e, origin);
    else if (e.key == "lab_scale_a")
      cfg.lab_scale_a = detail::to_double(e, origin);
    else if (e.key == "lab_scale_b")
      cfg.lab_scale_b = detail::to_double(e, origin);
    else if (e.key == "lch_scale_l")
      cfg.lch_scale_l = detail::to_double(e, origin);
    else if (e.key == "lch_scale_c")
      cfg.lch_scale_c = detail::to_double(e, origin);
    else if (e.key == "lch_scale_h")
      cfg.lch_scale_h = detail::to_double(e, origin);
    else if (e.key == "ssim_window")
      cfg.ssim.window = detail::to_int(e, origin);
    else if (e.key == "ssim_sigma")
      cfg.ssim.sigma = detail::to_double(e, origin);
    else if (e.key == "ssim_k1")
      cfg.ssim.k1 = detail::to_double(e, origin);
    else if (e.key == "ssim_k2")
      cfg.ssim.k2 = detail::to_double(e, origin);
    else if (e.key == "vgg_weights")
      cfg.vgg_weights = e.value;
    else if (e.key == "vgg_layers")
      cfg.vgg_layers = detail::to_int_list(e, origin);
    else
      throw ConfigError(strcat_(origin, ":", e.line, ": unknown [loss] key '", e.key, "'"));
  }
}

inline void apply_data(const IniFile& ini, DataConfig& cfg, const std::string& origin) {
  auto it = ini.sections.find("data");
  if (it == ini.sections.end()) return;
  for (const auto& e : it->second) {
    if (e.key == "target_size")
      cfg.target_size = detail::to_int(e, origin);
    else if (e.key == "split_ratio")
      cfg.split_ratio = detail::to_double(e, origin);
    else if (e.key == "split_seed")
      cfg.split_seed = static_cast<std::uint64_t>(detail::to_int(e, origin));
    else
      throw ConfigError(strcat_(origin, ":", e.line, ": unknown [data] key '", e.key, "'"));
  }
}

/// Serializes the effective configuration, suitable for manifests and for
/// feeding back through the parser.
inline std::string dump_config(const NetworkConfig& net, const optim::TrainConfig& train,
                               const loss::LossConfig& loss_cfg, const DataConfig& data_cfg) {
  std::ostringstream os;
  os << "[network]\n";
  os << "stage_widths = ";
  for (std::size_t i = 0; i < net.stage_widths.size(); ++i)
    os << (i ? "," : "") << net.stage_widths[i];
  os << "\n";
  os << "axial_k = " << net.axial_k << "\n";
  os << "ca_reduction = " << net.ca_reduction << "\n";
  os << "activation = " << activation_name(net.activation) << "\n";
  os << "output_activation = " << activation_name(net.output_activation) << "\n";
  os << "input_channels = " << net.input_channels << "\n";
  os << "output_channels = " << net.output_channels << "\n";
  os << "[train]\n";
  os << "epochs = " << train.epochs << "\n";
  os << "lr0 = " << train.lr0 << "\n";
  os << "decay_factor = " << train.decay_factor << "\n";
  os << "decay_every = " << train.decay_every << "\n";
  os << "beta1 = " << train.beta1 << "\n";
  os << "beta2 = " << train.beta2 << "\n";
  os << "eps = " << train.eps << "\n";
  os << "batch_size = " << train.batch_size << "\n";
  os << "checkpoint_every = " << train.checkpoint_every << "\n";
  os << "eval_every = " << train.eval_every << "\n";
  os << "grad_clip = " << train.grad_clip << "\n";
  os << "seed = " << train.seed << "\n";
  os << "[loss]\n";
  os << "use_rgb = " << (loss_cfg.use_rgb ? "true" : "false") << "\n";
  os << "use_lab = " << (loss_cfg.use_lab ? "true" : "false") << "\n";
  os << "use_lch = " << (loss_cfg.use_lch ? "true" : "false") << "\n";
  os << "use_ssim = " << (loss_cfg.use_ssim ? "true" : "false") << "\n";
  os << "use_vgg = " << (loss_cfg.use_vgg ? "true" : "false") << "\n";
  os << "ssim_window = " << loss_cfg.ssim.window << "\n";
  os << "ssim_sigma = " << loss_cfg.ssim.sigma << "\n";
  if (!loss_cfg.vgg_weights.empty()) os << "vgg_weights = " << loss_cfg.vgg_weights << "\n";
  os << "[data]\n";
  os << "target_size = " << data_cfg.target_size << "\n";
  os << "split_ratio = " << data_cfg.split_ratio << "\n";
  os << "split_seed = " << data_cfg.split_seed << "\n";
  return os.str();
}

}  // namespace lu2net::config
