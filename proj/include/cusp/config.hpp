#pragma once

#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cusp/error.hpp"
#include "cusp/orc.hpp"
#include "cusp/product_manifold.hpp"
#include "cusp/train.hpp"

namespace cusp {

// Flat `key = value` configuration. Lines starting with '#' are comments.
// Every key has a default; unknown keys are rejected.
class Config {
 public:
  Config() : values_(defaults()) {}

  static const std::map<std::string, std::string>& defaults() {
    static const std::map<std::string, std::string> d = {
        {"orc.delta", "0.5"},
        {"orc.method", "exact"},
        {"orc.sinkhorn_eps", ""},  // empty: 0.01 x median support distance
        {"orc.sinkhorn_max_iters", "1000"},
        {"orc.sinkhorn_tol", "1e-9"},
        {"orc.normalize", "false"},
        {"histogram.bins", "40"},
        {"signature.spec", ""},  // empty: estimate from the curvature histogram
        {"signature.eps", "0.05"},
        {"signature.h_max", "2"},
        {"signature.s_max", "2"},
        {"signature.preferred_dims", ""},  // "h,s,e"
        {"signature.seed", "0"},
        {"model.d_m", "48"},
        {"model.d_c", "16"},
        {"model.d_pool", "16"},
        {"model.L", "10"},
        {"model.alpha", "0.3"},
        {"model.gamma_init", "ppr"},
        {"model.train_gamma", "true"},
        {"model.train_curvature", "true"},
        {"model.use_encoding", "true"},
        {"model.use_pooling", "true"},
        {"model.encoder_sigma", "1"},
        {"model.lp_radius", "2"},
        {"model.lp_temperature", "1"},
        {"train.task", "nc"},
        {"train.lr", "0.004"},
        {"train.epochs", "100"},
        {"train.weight_decay", "0.0005"},
        {"train.dropout", "0.3"},
        {"train.seed", "0"},
        {"train.split", ""},  // "train,val,test"; empty: 0.6,0.2,0.2 (nc) or 0.85,0.05,0.1 (lp)
        {"train.max_split_attempts", "10"},
        {"workers", "0"},
    };
    return d;
  }

  void set(const std::string& key, const std::string& value) {
    if (!defaults().count(key)) throw InputError("config: unknown key '" + key + "'");
    values_[key] = value;
  }

  // "key=value"
  void set_assignment(const std::string& kv) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw InputError("config: expected key=value, got '" + kv + "'");
    set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }

  void read(std::istream& in, const std::string& source = "<config>") {
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      try {
        set_assignment(t);
      } catch (const InputError& e) {
        throw InputError(source + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
  }

  void load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file " + path);
    read(in, path);
  }

  const std::string& str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw InputError("config: unknown key '" + key + "'");
    return it->second;
  }

  double real(const std::string& key) const {
    const std::string& s = str(key);
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw InputError("config: " + key + " expects a number, got '" + s + "'");
    return v;
  }

  long long integer(const std::string& key) const {
    const std::string& s = str(key);
    long long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw InputError("config: " + key + " expects an integer, got '" + s + "'");
    return v;
  }

  bool boolean(const std::string& key) const {
    const std::string& s = str(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw InputError("config: " + key + " expects true/false, got '" + s + "'");
  }

  std::vector<double> reals(const std::string& key) const {
    std::vector<double> out;
    std::stringstream ss(str(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      double v = 0.0;
      auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
      if (ec != std::errc() || p != item.data() + item.size())
        throw InputError("config: " + key + " expects comma-separated numbers");
      out.push_back(v);
    }
    return out;
  }

  OrcConfig orc() const {
    OrcConfig c;
    c.delta = real("orc.delta");
    c.method = parse_orc_method(str("orc.method"));
    if (!str("orc.sinkhorn_eps").empty()) c.sinkhorn_eps = real("orc.sinkhorn_eps");
    c.sinkhorn_max_iters = static_cast<int>(integer("orc.sinkhorn_max_iters"));
    c.sinkhorn_tol = real("orc.sinkhorn_tol");
    c.normalize = boolean("orc.normalize");
    c.workers = static_cast<int>(integer("workers"));
    c.validate();
    return c;
  }

  SignatureOptions signature_options() const {
    SignatureOptions o;
    o.eps = real("signature.eps");
    o.h_max = static_cast<int>(integer("signature.h_max"));
    o.s_max = static_cast<int>(integer("signature.s_max"));
    o.total_dim = static_cast<int>(integer("model.d_m"));
    o.seed = static_cast<std::uint64_t>(integer("signature.seed"));
    if (!str("signature.preferred_dims").empty()) {
      auto d = reals("signature.preferred_dims");
      if (d.size() != 3) throw InputError("config: signature.preferred_dims expects h,s,e");
      o.preferred = PreferredDims{static_cast<int>(d[0]), static_cast<int>(d[1]), static_cast<int>(d[2])};
    }
    return o;
  }

  // Model signature is filled in by the caller (given or estimated).
  TrainConfig train() const {
    TrainConfig c;
    c.orc = orc();
    ModelConfig& m = c.model;
    m.d_c = static_cast<int>(integer("model.d_c"));
    m.d_pool = static_cast<int>(integer("model.d_pool"));
    m.L = static_cast<int>(integer("model.L"));
    m.alpha = real("model.alpha");
    m.gamma_init = parse_gpr_init(str("model.gamma_init"));
    m.train_gamma = boolean("model.train_gamma");
    m.train_curvature = boolean("model.train_curvature");
    m.use_encoding = boolean("model.use_encoding");
    m.use_pooling = boolean("model.use_pooling");
    m.encoder_sigma = real("model.encoder_sigma");
    m.lp_radius = real("model.lp_radius");
    m.lp_temperature = real("model.lp_temperature");
    m.task = parse_task(str("train.task"));
    m.dropout = real("train.dropout");
    c.lr = real("train.lr");
    c.epochs = static_cast<int>(integer("train.epochs"));
    c.weight_decay = real("train.weight_decay");
    c.seed = static_cast<std::uint64_t>(integer("train.seed"));
    c.max_split_attempts = static_cast<int>(integer("train.max_split_attempts"));
    if (!str("train.split").empty()) {
      auto s = reals("train.split");
      if (s.size() != 3) throw InputError("config: train.split expects train,val,test");
      c.split = std::array<double, 3>{s[0], s[1], s[2]};
    }
    return c;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> values_;
};

}  // namespace cusp
