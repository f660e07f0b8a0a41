#pragma once

// Persistence: dataset CSV loading with label-token mapping, rado CSV with
// a JSON metadata sidecar, and the versioned JSON model document. Doubles
// are serialized with shortest-round-trip formatting, so every file
// round-trips bit-exactly.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/sha.h>

#include <json.hpp>

#include "rado/core.hpp"
#include "rado/rados.hpp"

namespace rado {

namespace io_detail {

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline bool parse_double(const std::string& token, double& out) {
  const char* first = token.data();
  const char* last = token.data() + token.size();
  while (first < last && (*first == ' ' || *first == '\t')) ++first;
  while (last > first && (*(last - 1) == ' ' || *(last - 1) == '\t')) --last;
  if (first == last) return false;
  auto res = std::from_chars(first, last, out);
  return res.ec == std::errc{} && res.ptr == last;
}

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!trim(line).empty()) lines.push_back(line);
  }
  return lines;
}

}  // namespace io_detail

inline std::string sha256_hex(const std::string& payload) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(payload.data()), payload.size(),
         digest);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * SHA256_DIGEST_LENGTH);
  for (unsigned char byte : digest) {
    out.push_back(hex[byte >> 4]);
    out.push_back(hex[byte & 0xF]);
  }
  return out;
}

inline std::string seed_commitment(std::uint64_t seed) {
  return sha256_hex("rado-seed:" + std::to_string(seed));
}

// Loads a labeled CSV. The header names the columns; `label_column` holds
// the class tokens, every other column must be numeric. Exactly two label
// tokens are allowed; the lexicographically smaller one maps to -1 unless
// `positive_token` overrides the mapping.
inline Dataset load_csv(const std::filesystem::path& path,
                        const std::string& label_column,
                        const std::optional<std::string>& positive_token = {}) {
  const auto lines = io_detail::read_lines(path);
  if (lines.size() < 2) throw ParseError(path.string() + ": need a header and data rows");

  const auto header = io_detail::split_csv_line(lines[0]);
  std::size_t label_idx = header.size();
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == label_column) label_idx = j;
  }
  if (label_idx == header.size()) {
    throw ParseError(path.string() + ": no column named '" + label_column + "'");
  }

  std::vector<std::string> feature_names;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j != label_idx) feature_names.push_back(header[j]);
  }
  if (feature_names.empty()) throw ParseError(path.string() + ": no feature columns");

  const std::size_t m = lines.size() - 1;
  const std::size_t d = feature_names.size();
  Matrix features(m, d);
  std::vector<std::string> raw_labels(m);

  for (std::size_t i = 0; i < m; ++i) {
    const auto cells = io_detail::split_csv_line(lines[i + 1]);
    if (cells.size() != header.size()) {
      throw ParseError(path.string() + ": row " + std::to_string(i + 2) + " has " +
                       std::to_string(cells.size()) + " cells, expected " +
                       std::to_string(header.size()));
    }
    std::size_t col = 0;
    for (std::size_t j = 0; j < cells.size(); ++j) {
      if (j == label_idx) {
        raw_labels[i] = cells[j];
        continue;
      }
      if (cells[j].empty()) {
        throw MissingValueError(path.string() + ": empty cell at row " +
                                std::to_string(i + 2) + ", column '" + header[j] + "'");
      }
      double v;
      if (!io_detail::parse_double(cells[j], v)) {
        throw ParseError(path.string() + ": cannot parse '" + cells[j] + "' at row " +
                         std::to_string(i + 2) + ", column '" + header[j] + "'");
      }
      if (!std::isfinite(v)) {
        throw MissingValueError(path.string() + ": non-finite value at row " +
                                std::to_string(i + 2));
      }
      features(i, col++) = v;
    }
  }

  std::set<std::string> tokens(raw_labels.begin(), raw_labels.end());
  if (tokens.size() != 2) {
    std::string listing;
    for (const auto& t : tokens) listing += (listing.empty() ? "" : ", ") + t;
    throw LabelError(path.string() + ": expected exactly 2 label tokens, found " +
                     std::to_string(tokens.size()) + " {" + listing + "}");
  }
  std::string positive = *std::next(tokens.begin());  // lexicographically larger
  if (positive_token) {
    if (!tokens.count(*positive_token)) {
      throw LabelError(path.string() + ": positive token '" + *positive_token +
                       "' does not occur in the label column");
    }
    positive = *positive_token;
  }

  Dataset ds;
  ds.features = std::move(features);
  ds.feature_names = std::move(feature_names);
  ds.labels.resize(m);
  for (std::size_t i = 0; i < m; ++i) ds.labels[i] = raw_labels[i] == positive ? 1 : -1;
  ds.validate();
  return ds;
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& rado_csv) {
  return std::filesystem::path(rado_csv.string() + ".meta.json");
}

// Rado CSV: header = feature names, one rado per line. Provenance goes to
// the JSON sidecar; protected sets carry a hash commitment of the seed, not
// the seed itself.
inline void write_rados(const std::filesystem::path& path, const RadoSet& rset) {
  rset.validate();
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (std::size_t k = 0; k < rset.d(); ++k) {
    if (k) out << ',';
    out << (k < rset.feature_names.size() ? rset.feature_names[k]
                                          : "f" + std::to_string(k));
  }
  out << '\n';
  for (std::size_t j = 0; j < rset.n(); ++j) {
    auto row = rset.rados.row(j);
    for (std::size_t k = 0; k < rset.d(); ++k) {
      if (k) out << ',';
      out << io_detail::format_double(row[k]);
    }
    out << '\n';
  }

  nlohmann::ordered_json meta;
  meta["format_version"] = 1;
  meta["mode"] = to_string(rset.provenance.mode);
  meta["n"] = rset.n();
  meta["d"] = rset.d();
  meta["source_m"] = rset.provenance.source_m;
  if (rset.provenance.mode == RadoMode::Protected) {
    if (rset.provenance.epsilon) meta["epsilon"] = *rset.provenance.epsilon;
    if (rset.provenance.r_e) meta["r_e"] = *rset.provenance.r_e;
    if (rset.provenance.seed_commitment) {
      meta["seed_commitment"] = *rset.provenance.seed_commitment;
    } else if (rset.provenance.seed) {
      meta["seed_commitment"] = seed_commitment(*rset.provenance.seed);
    }
  } else if (rset.provenance.seed) {
    meta["seed"] = *rset.provenance.seed;
  }
  if (rset.scaling.enabled) {
    meta["scaling"] = {{"feature_min", rset.scaling.feature_min},
                       {"feature_range", rset.scaling.feature_range}};
  }
  std::ofstream meta_out(sidecar_path(path));
  if (!meta_out) throw DataError("cannot write " + sidecar_path(path).string());
  meta_out << meta.dump(2) << '\n';
}

inline RadoSet read_rados(const std::filesystem::path& path) {
  const auto lines = io_detail::read_lines(path);
  if (lines.size() < 2) throw ParseError(path.string() + ": need a header and rows");
  const auto header = io_detail::split_csv_line(lines[0]);
  const std::size_t d = header.size();
  const std::size_t n = lines.size() - 1;

  RadoSet rset;
  rset.feature_names = header;
  rset.rados = Matrix(n, d);
  for (std::size_t j = 0; j < n; ++j) {
    const auto cells = io_detail::split_csv_line(lines[j + 1]);
    if (cells.size() != d) {
      throw ParseError(path.string() + ": row " + std::to_string(j + 2) +
                       " has wrong arity");
    }
    for (std::size_t k = 0; k < d; ++k) {
      double v;
      if (!io_detail::parse_double(cells[k], v)) {
        throw ParseError(path.string() + ": cannot parse '" + cells[k] + "'");
      }
      rset.rados(j, k) = v;
    }
  }

  const auto meta_file = sidecar_path(path);
  if (!std::filesystem::exists(meta_file)) {
    throw DataError(path.string() + ": missing metadata sidecar " + meta_file.string());
  }
  std::ifstream meta_in(meta_file);
  nlohmann::json meta;
  try {
    meta_in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(meta_file.string() + ": " + e.what());
  }
  const int version = meta.value("format_version", 0);
  if (version != 1) {
    throw DataError(meta_file.string() + ": format version " + std::to_string(version) +
                    " not supported (reader supports 1)");
  }
  const std::string mode = meta.value("mode", "plain");
  if (mode == "full") rset.provenance.mode = RadoMode::Full;
  else if (mode == "plain") rset.provenance.mode = RadoMode::PlainRandom;
  else if (mode == "classwise") rset.provenance.mode = RadoMode::ClassWise;
  else if (mode == "protected") rset.provenance.mode = RadoMode::Protected;
  else throw ParseError(meta_file.string() + ": unknown mode '" + mode + "'");
  rset.provenance.source_m = meta.value("source_m", 0);
  if (meta.contains("seed")) rset.provenance.seed = meta["seed"].get<std::uint64_t>();
  if (meta.contains("epsilon")) rset.provenance.epsilon = meta["epsilon"].get<double>();
  if (meta.contains("r_e")) rset.provenance.r_e = meta["r_e"].get<double>();
  if (meta.contains("seed_commitment")) {
    rset.provenance.seed_commitment = meta["seed_commitment"].get<std::string>();
  }
  if (meta.contains("scaling")) {
    rset.scaling.enabled = true;
    rset.scaling.feature_min = meta["scaling"]["feature_min"].get<std::vector<double>>();
    rset.scaling.feature_range =
        meta["scaling"]["feature_range"].get<std::vector<double>>();
  }
  rset.validate();
  return rset;
}

// --- regularizer (de)serialization ---------------------------------------

inline std::string to_string(RegKind kind) {
  switch (kind) {
    case RegKind::Lasso: return "lasso";
    case RegKind::Ridge: return "ridge";
    case RegKind::LInf: return "linf";
    case RegKind::Slope: return "slope";
    case RegKind::Combo: return "combo";
  }
  return "?";
}

inline RegKind reg_kind_from_string(const std::string& s) {
  if (s == "lasso") return RegKind::Lasso;
  if (s == "ridge") return RegKind::Ridge;
  if (s == "linf") return RegKind::LInf;
  if (s == "slope") return RegKind::Slope;
  if (s == "combo") return RegKind::Combo;
  throw DataError("unknown regularizer kind '" + s + "'");
}

inline nlohmann::ordered_json regularizer_to_json(const RegularizerSpec& spec) {
  nlohmann::ordered_json j;
  j["kind"] = to_string(spec.kind);
  j["omega"] = spec.omega;
  if (spec.kind == RegKind::Ridge && !spec.gamma_diag.empty()) {
    j["gamma_diag"] = spec.gamma_diag;
  }
  if (spec.kind == RegKind::Slope) j["slope_q"] = spec.slope_q;
  if (spec.kind == RegKind::Combo) {
    auto terms = nlohmann::ordered_json::array();
    for (const auto& [w, sub] : spec.terms) {
      nlohmann::ordered_json term;
      term["weight"] = w;
      term["spec"] = regularizer_to_json(sub);
      terms.push_back(term);
    }
    j["terms"] = terms;
  }
  return j;
}

inline RegularizerSpec regularizer_from_json(const nlohmann::json& j) {
  RegularizerSpec spec;
  spec.kind = reg_kind_from_string(j.at("kind").get<std::string>());
  spec.omega = j.value("omega", 0.0);
  if (j.contains("gamma_diag")) {
    spec.gamma_diag = j["gamma_diag"].get<std::vector<double>>();
  }
  if (j.contains("slope_q")) spec.slope_q = j["slope_q"].get<double>();
  if (j.contains("terms")) {
    for (const auto& term : j["terms"]) {
      spec.terms.emplace_back(term.at("weight").get<double>(),
                              regularizer_from_json(term.at("spec")));
    }
  }
  spec.validate();
  return spec;
}

// --- model document --------------------------------------------------------

constexpr int kModelFormatVersion = 1;

inline std::string to_string(WlMode mode) {
  return mode == WlMode::FirstAdmissible ? "first" : "preference";
}

inline std::string to_string(SelectRule rule) {
  return rule == SelectRule::Last ? "last" : "best";
}

inline void write_model(const std::filesystem::path& path, const LinearModel& model) {
  model.validate();
  if (model.history.empty()) {
    throw DataError("write_model: refusing to persist a model with empty history");
  }
  nlohmann::ordered_json j;
  j["format_version"] = kModelFormatVersion;
  j["theta"] = model.theta;
  j["feature_names"] = model.feature_names;
  j["regularizer"] = regularizer_to_json(model.regularizer);
  j["config"] = {{"T", model.iterations_run},
                 {"clamp_gamma", model.clamp_gamma},
                 {"wl_mode", to_string(model.wl_mode)},
                 {"select", to_string(model.select)},
                 {"seed", model.seed}};
  j["iterations_run"] = model.iterations_run;
  j["selected_iteration"] = model.selected_iteration;
  j["underflow_events"] = model.underflow_events;
  if (model.scaling.enabled) {
    j["scaling"] = {{"feature_min", model.scaling.feature_min},
                    {"feature_range", model.scaling.feature_range}};
  }
  auto hist = nlohmann::ordered_json::array();
  for (const auto& rec : model.history) {
    hist.push_back({{"t", rec.t},
                    {"feature", rec.feature},
                    {"alpha", rec.alpha},
                    {"r", rec.edge_r},
                    {"delta", rec.delta},
                    {"z", rec.z_norm}});
  }
  j["history"] = std::move(hist);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline LinearModel read_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  const int version = j.value("format_version", 0);
  if (version != kModelFormatVersion) {
    throw DataError(path.string() + ": format version " + std::to_string(version) +
                    " not supported (reader supports " +
                    std::to_string(kModelFormatVersion) + ")");
  }
  LinearModel model;
  model.theta = j.at("theta").get<std::vector<double>>();
  model.feature_names = j.value("feature_names", std::vector<std::string>{});
  model.regularizer = regularizer_from_json(j.at("regularizer"));
  model.iterations_run = j.value("iterations_run", 0);
  model.selected_iteration = j.value("selected_iteration", 0);
  model.underflow_events = j.value("underflow_events", std::int64_t{0});
  const auto& cfg = j.at("config");
  model.clamp_gamma = cfg.value("clamp_gamma", 0.98);
  model.wl_mode = cfg.value("wl_mode", std::string("preference")) == "first"
                      ? WlMode::FirstAdmissible
                      : WlMode::PreferenceOrder;
  model.select = cfg.value("select", std::string("last")) == "best"
                     ? SelectRule::BestOnTraining
                     : SelectRule::Last;
  model.seed = cfg.value("seed", std::uint64_t{0});
  if (j.contains("scaling")) {
    model.scaling.enabled = true;
    model.scaling.feature_min = j["scaling"]["feature_min"].get<std::vector<double>>();
    model.scaling.feature_range =
        j["scaling"]["feature_range"].get<std::vector<double>>();
  }
  for (const auto& rec : j.at("history")) {
    model.history.push_back({rec.at("t").get<int>(), rec.at("feature").get<int>(),
                             rec.at("alpha").get<double>(), rec.at("r").get<double>(),
                             rec.at("delta").get<double>(), rec.at("z").get<double>()});
  }
  model.validate();
  return model;
}

}  // namespace rado
