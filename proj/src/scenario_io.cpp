#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "isac/scenario.hpp"

// Scenario document conventions
//   *_db / *_dbm keys accept a bare number (interpreted in dB / dBm), a
//   string "<number> dB[m]", or the canonical lossless form "<number> linear".
//   Gains in dB are power gains; the linear amplitude is sqrt(10^(x/10)).
//   Complex numbers are [re, im]; matrices are row lists of such pairs.
//   Unknown keys are rejected everywhere.

namespace isac {

namespace {

using ojson = nlohmann::ordered_json;

void check_keys(const ojson& o, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!o.is_object()) throw ParseError(where + ": expected an object");
  for (const auto& [key, _] : o.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ParseError(where + ": unknown key '" + key + "'");
  }
}

const ojson& need(const ojson& o, const std::string& where, const char* key) {
  auto it = o.find(key);
  if (it == o.end()) throw ParseError(where + ": missing key '" + std::string(key) + "'");
  return *it;
}

double parse_number(const ojson& v, const std::string& where) {
  if (!v.is_number()) throw ParseError(where + ": expected a number");
  return v.get<double>();
}

// Returns the LINEAR value of a dB-keyed field.
double parse_db(const ojson& v, const std::string& where, const char* unit) {
  if (v.is_number()) return db_to_linear(v.get<double>());
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    size_t pos = 0;
    double num = 0.0;
    try {
      num = std::stod(s, &pos);
    } catch (const std::exception&) {
      throw ParseError(where + ": cannot parse value '" + s + "'");
    }
    std::string suffix = s.substr(pos);
    while (!suffix.empty() && suffix.front() == ' ') suffix.erase(suffix.begin());
    while (!suffix.empty() && suffix.back() == ' ') suffix.pop_back();
    if (suffix == "linear") return num;
    if (suffix == unit) return db_to_linear(num);
    throw ParseError(where + ": bad unit suffix '" + suffix + "' (expected '" +
                     unit + "' or 'linear')");
  }
  throw ParseError(where + ": expected a number or unit string");
}

ojson dump_linear(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g linear", v);
  return std::string(buf);
}

cxd parse_cx(const ojson& v, const std::string& where) {
  if (!v.is_array() || v.size() != 2)
    throw ParseError(where + ": expected a [re, im] pair");
  return cxd(parse_number(v[0], where), parse_number(v[1], where));
}

VecC parse_cvec(const ojson& v, const std::string& where) {
  if (!v.is_array()) throw ParseError(where + ": expected a list of [re, im] pairs");
  VecC out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out(int(i)) = parse_cx(v[i], where);
  return out;
}

MatC parse_cmat(const ojson& v, const std::string& where) {
  if (!v.is_array() || v.empty()) throw ParseError(where + ": expected a row list");
  MatC out(v.size(), v[0].size());
  for (size_t r = 0; r < v.size(); ++r) {
    VecC row = parse_cvec(v[r], where);
    if (row.size() != out.cols()) throw ParseError(where + ": ragged matrix rows");
    out.row(int(r)) = row.transpose();
  }
  return out;
}

ojson dump_cx(const cxd& z) { return ojson::array({z.real(), z.imag()}); }

ojson dump_cvec(const VecC& v) {
  ojson a = ojson::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(dump_cx(v(i)));
  return a;
}

ojson dump_cmat(const MatC& m) {
  ojson a = ojson::array();
  for (int r = 0; r < m.rows(); ++r) {
    ojson row = ojson::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(dump_cx(m(r, c)));
    a.push_back(row);
  }
  return a;
}

cxd parse_gain(const ojson& o, const std::string& where, const char* db_key,
               const char* lin_key, cxd fallback) {
  bool has_db = o.contains(db_key), has_lin = o.contains(lin_key);
  if (has_db && has_lin)
    throw ParseError(where + ": give either '" + db_key + "' or '" + lin_key + "'");
  if (has_db) return cxd(std::sqrt(parse_db(o[db_key], where + "." + db_key, "dB")), 0.0);
  if (has_lin) return parse_cx(o[lin_key], where + "." + lin_key);
  return fallback;
}

}  // namespace

Scenario load_scenario(const std::string& json_text) {
  ojson doc;
  try {
    doc = ojson::parse(json_text);
  } catch (const std::exception& e) {
    throw ParseError(std::string("scenario: invalid document: ") + e.what());
  }
  check_keys(doc, "scenario",
             {"geometry", "scatterers", "users", "power_budget_dbm",
              "radar_noise_dbm", "warden_noise_dbm", "blocklength",
              "covertness_eps", "outage", "error_model", "seed"});
  Scenario s;

  const ojson& g = need(doc, "scenario", "geometry");
  check_keys(g, "geometry", {"m_tx", "m_rx", "spacing_wavelengths"});
  s.geometry.m_tx = int(parse_number(need(g, "geometry", "m_tx"), "geometry.m_tx"));
  s.geometry.m_rx = int(parse_number(need(g, "geometry", "m_rx"), "geometry.m_rx"));
  s.geometry.spacing_wavelengths = parse_number(
      need(g, "geometry", "spacing_wavelengths"), "geometry.spacing_wavelengths");

  const ojson& wn = need(doc, "scenario", "warden_noise_dbm");
  if (wn.is_array() && wn.empty())
    throw ParseError("warden_noise_dbm: list must not be empty");

  const ojson& scats = need(doc, "scenario", "scatterers");
  if (!scats.is_array() || scats.empty())
    throw ParseError("scatterers: expected a nonempty list");
  int target_count = 0;
  for (size_t j = 0; j < scats.size(); ++j) {
    std::string where = "scatterers[" + std::to_string(j) + "]";
    const ojson& o = scats[j];
    check_keys(o, where,
               {"kind", "angle_deg", "reflection_gain_db", "reflection_gain",
                "warden_gain_db", "warden_gain"});
    Scatterer sc;
    std::string kind = need(o, where, "kind").get<std::string>();
    if (kind == "target")
      sc.kind = ScattererKind::target;
    else if (kind == "clutter")
      sc.kind = ScattererKind::clutter;
    else
      throw ParseError(where + ".kind: expected 'target' or 'clutter'");
    sc.angle_deg = parse_number(need(o, where, "angle_deg"), where + ".angle_deg");
    sc.reflection_gain =
        parse_gain(o, where, "reflection_gain_db", "reflection_gain", cxd(1, 0));
    if (sc.kind == ScattererKind::target) {
      sc.warden_gain = parse_gain(o, where, "warden_gain_db", "warden_gain", cxd(1, 0));
      const ojson& noise =
          wn.is_array() ? wn[std::min<size_t>(target_count, wn.size() - 1)] : wn;
      sc.warden_noise = parse_db(noise, "warden_noise_dbm", "dBm");
      ++target_count;
    } else if (o.contains("warden_gain_db") || o.contains("warden_gain")) {
      throw ParseError(where + ": warden gain only applies to targets");
    }
    s.scatterers.push_back(sc);
  }
  if (wn.is_array() && wn.size() != size_t(target_count))
    throw ParseError("warden_noise_dbm: list length must equal the number of targets");

  const ojson& users = need(doc, "scenario", "users");
  if (!users.is_array()) throw ParseError("users: expected a list");
  for (size_t k = 0; k < users.size(); ++k) {
    std::string where = "users[" + std::to_string(k) + "]";
    const ojson& o = users[k];
    check_keys(o, where, {"kind", "channel_est", "sinr_target_db", "noise_dbm"});
    User u;
    std::string kind = need(o, where, "kind").get<std::string>();
    if (kind == "overt")
      u.kind = UserKind::overt;
    else if (kind == "covert")
      u.kind = UserKind::covert;
    else
      throw ParseError(where + ".kind: expected 'overt' or 'covert'");
    u.sinr_target =
        parse_db(need(o, where, "sinr_target_db"), where + ".sinr_target_db", "dB");
    if (!(u.sinr_target > 0.0))
      throw ParseError(where + ".sinr_target_db: sinr_target must be positive");
    u.noise_power = parse_db(need(o, where, "noise_dbm"), where + ".noise_dbm", "dBm");
    if (o.contains("channel_est")) {
      u.channel_est = parse_cvec(o["channel_est"], where + ".channel_est");
    } else {
      // Rayleigh CN(0, I) estimate drawn from the scenario seed.
      uint64_t seed = doc.contains("seed") ? doc["seed"].get<uint64_t>() : 1;
      Rng rng(seed, stream_id(RngStream::comm_channel, uint32_t(k)));
      u.channel_est = rng.cnormal_vector(0, s.geometry.m_tx);
    }
    s.users.push_back(u);
  }

  s.power_budget = parse_db(need(doc, "scenario", "power_budget_dbm"),
                            "power_budget_dbm", "dBm");
  s.radar_noise =
      parse_db(need(doc, "scenario", "radar_noise_dbm"), "radar_noise_dbm", "dBm");
  s.blocklength =
      int(parse_number(need(doc, "scenario", "blocklength"), "blocklength"));
  s.covertness_eps =
      parse_number(need(doc, "scenario", "covertness_eps"), "covertness_eps");

  const ojson& og = need(doc, "scenario", "outage");
  check_keys(og, "outage", {"rho_r", "rho_c", "rho_w"});
  s.outage.rho_r = parse_number(need(og, "outage", "rho_r"), "outage.rho_r");
  s.outage.rho_c = parse_number(need(og, "outage", "rho_c"), "outage.rho_c");
  s.outage.rho_w = parse_number(need(og, "outage", "rho_w"), "outage.rho_w");

  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned())
      throw ParseError("seed: expected a nonnegative integer");
    s.seed = doc["seed"].get<uint64_t>();
  }

  const ojson& em = need(doc, "scenario", "error_model");
  check_keys(em, "error_model",
             {"type", "kappa", "comm_sq", "warden_sq", "radar_sq", "comm_cov",
              "warden_cov", "radar_cov_blocks"});
  std::string type = need(em, "error_model", "type").get<std::string>();
  if (type == "bounded")
    s.error_model.kind = ErrorModelKind::bounded;
  else if (type == "probabilistic")
    s.error_model.kind = ErrorModelKind::probabilistic;
  else
    throw ParseError("error_model.type: expected 'bounded' or 'probabilistic'");
  if (em.contains("kappa")) {
    double kappa = parse_number(em["kappa"], "error_model.kappa");
    if (kappa < 0.0) throw ParseError("error_model.kappa: must be >= 0");
    s.error_model.kappa = kappa;
    auto pair = derive_error_budgets(s, kappa);
    s.error_model.bounded = pair.bounded;
    s.error_model.probabilistic = pair.probabilistic;
  } else if (s.error_model.kind == ErrorModelKind::bounded) {
    BoundedErrors b;
    for (const auto& v : need(em, "error_model", "comm_sq"))
      b.comm_sq.push_back(parse_number(v, "error_model.comm_sq"));
    for (const auto& v : need(em, "error_model", "warden_sq"))
      b.warden_sq.push_back(parse_number(v, "error_model.warden_sq"));
    b.radar_sq = parse_number(need(em, "error_model", "radar_sq"), "error_model.radar_sq");
    s.error_model.bounded = b;
  } else {
    ProbabilisticErrors p;
    for (const auto& v : need(em, "error_model", "comm_cov"))
      p.comm_cov.push_back(parse_cmat(v, "error_model.comm_cov"));
    for (const auto& v : need(em, "error_model", "warden_cov"))
      p.warden_cov.push_back(parse_cmat(v, "error_model.warden_cov"));
    for (const auto& v : need(em, "error_model", "radar_cov_blocks"))
      p.radar_cov_blocks.push_back(parse_cmat(v, "error_model.radar_cov_blocks"));
    s.error_model.probabilistic = p;
  }

  validate(s);
  return s;
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_scenario(ss.str());
}

std::string save_scenario(const Scenario& s) {
  validate(s);
  ojson doc;
  doc["geometry"] = {{"m_tx", s.geometry.m_tx},
                     {"m_rx", s.geometry.m_rx},
                     {"spacing_wavelengths", s.geometry.spacing_wavelengths}};
  ojson scats = ojson::array();
  ojson wnoise = ojson::array();
  for (const auto& sc : s.scatterers) {
    ojson o;
    o["kind"] = sc.kind == ScattererKind::target ? "target" : "clutter";
    o["angle_deg"] = sc.angle_deg;
    o["reflection_gain"] = dump_cx(sc.reflection_gain);
    if (sc.kind == ScattererKind::target) {
      o["warden_gain"] = dump_cx(sc.warden_gain);
      wnoise.push_back(dump_linear(sc.warden_noise));
    }
    scats.push_back(o);
  }
  doc["scatterers"] = scats;
  ojson users = ojson::array();
  for (const auto& u : s.users) {
    ojson o;
    o["kind"] = u.kind == UserKind::overt ? "overt" : "covert";
    o["channel_est"] = dump_cvec(u.channel_est);
    o["sinr_target_db"] = dump_linear(u.sinr_target);
    o["noise_dbm"] = dump_linear(u.noise_power);
    users.push_back(o);
  }
  doc["users"] = users;
  doc["power_budget_dbm"] = dump_linear(s.power_budget);
  doc["radar_noise_dbm"] = dump_linear(s.radar_noise);
  doc["warden_noise_dbm"] = wnoise;
  doc["blocklength"] = s.blocklength;
  doc["covertness_eps"] = s.covertness_eps;
  doc["outage"] = {{"rho_r", s.outage.rho_r},
                   {"rho_c", s.outage.rho_c},
                   {"rho_w", s.outage.rho_w}};
  ojson em;
  em["type"] =
      s.error_model.kind == ErrorModelKind::bounded ? "bounded" : "probabilistic";
  if (s.error_model.kappa) {
    em["kappa"] = *s.error_model.kappa;
  } else if (s.error_model.kind == ErrorModelKind::bounded) {
    const auto& b = s.error_model.bounded.value();
    em["comm_sq"] = b.comm_sq;
    em["warden_sq"] = b.warden_sq;
    em["radar_sq"] = b.radar_sq;
  } else {
    const auto& p = s.error_model.probabilistic.value();
    ojson cc = ojson::array(), wc = ojson::array(), rc = ojson::array();
    for (const auto& m : p.comm_cov) cc.push_back(dump_cmat(m));
    for (const auto& m : p.warden_cov) wc.push_back(dump_cmat(m));
    for (const auto& m : p.radar_cov_blocks) rc.push_back(dump_cmat(m));
    em["comm_cov"] = cc;
    em["warden_cov"] = wc;
    em["radar_cov_blocks"] = rc;
  }
  doc["error_model"] = em;
  doc["seed"] = s.seed;
  return doc.dump(2) + "\n";
}

std::string scenario_hash(const Scenario& s) {
  std::string text = save_scenario(s);
  uint64_t h = 1469598103934665603ull;  // FNV-1a 64
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace isac
