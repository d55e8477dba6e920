#include <cctype>
#include <cmath>
#include <sstream>

#include "pgdrecon/cli.hpp"

namespace pgdrecon::cli {

std::string to_string(Method m) {
  switch (m) {
    case Method::FBP: return "fbp";
    case Method::BP: return "bp";
    case Method::TV: return "tv";
    case Method::Regressor: return "regressor";
    case Method::PGD: return "pgd";
    case Method::RPGD: return "rpgd";
  }
  return "unknown";
}

Method method_from_string(const std::string& s) {
  std::string t;
  for (char ch : s) t += char(std::tolower(static_cast<unsigned char>(ch)));
  if (t == "fbp") return Method::FBP;
  if (t == "bp") return Method::BP;
  if (t == "tv") return Method::TV;
  if (t == "regressor") return Method::Regressor;
  if (t == "pgd") return Method::PGD;
  if (t == "rpgd") return Method::RPGD;
  throw ConfigError("unknown method '" + s + "' (expected fbp, bp, tv, regressor, pgd or rpgd)");
}

std::string snr_label(const std::optional<double>& snr_db) {
  if (!snr_db) return "inf";
  std::ostringstream os;
  os << *snr_db;
  return os.str();
}

namespace {

json opt_to_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// null, "inf" and +inf all mean "absent".
std::optional<double> opt_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  double v = 0.0;
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "none") return std::nullopt;
    try {
      v = std::stod(s);
    } catch (const std::exception&) {
      throw ConfigError("expected a number or \"inf\", got '" + s + "'");
    }
  } else {
    v = j.get<double>();
  }
  if (std::isinf(v) && v > 0) return std::nullopt;
  return v;
}

void reject_unknown(const json& given, const json& known, const std::string& where) {
  for (const auto& [key, value] : given.items()) {
    if (!known.contains(key)) throw ConfigError("config: unknown key '" + where + key + "'");
    if (value.is_object() && known[key].is_object()) {
      reject_unknown(value, known[key], where + key + ".");
    }
  }
}

}  // namespace

json ExperimentConfig::to_json() const {
  return {
      {"dataset", dataset},
      {"sinograms", sinograms},
      {"out", out},
      {"model", model},
      {"split", split},
      {"recon", recon},
      {"method", cli::to_string(method)},
      {"seed", seed},
      {"data",
       {{"kind", data.kind},
        {"size", data.size},
        {"n_train", data.n_train},
        {"n_test", data.n_test},
        {"n_ellipses", data.n_ellipses},
        {"intensity_hi", data.intensity_hi}}},
      {"geometry",
       {{"n_views", geometry.n_views},
        {"n_offsets", geometry.n_offsets},
        {"jitter_std_deg", geometry.jitter_std_deg},
        {"snr_db", opt_to_json(geometry.snr_db)}}},
      {"solver",
       {{"gamma_factors", solver.gamma_factors},
        {"alpha0", solver.alpha0},
        {"c", solver.c},
        {"max_iter", solver.max_iter},
        {"stop_tol", solver.stop_tol},
        {"skip_first_gradient", solver.skip_first_gradient}}},
      {"tv",
       {{"n_grid", tv.n_grid},
        {"n_iter", tv.n_iter},
        {"lambda", opt_to_json(tv.lambda)},
        {"cg_max_iter", tv.cg_max_iter}}},
      {"training",
       {{"schedule", training.schedule.to_json()},
        {"data_scale", training.data_scale},
        {"noise_snr_db", opt_to_json(training.noise_snr_db)},
        {"view_perturb_prob", training.view_perturb_prob},
        {"resume", training.resume},
        {"n_train_use", training.n_train_use}}},
  };
}

ExperimentConfig ExperimentConfig::from_json(const json& given) {
  if (!given.is_object()) throw ConfigError("config: expected a JSON object");
  json j = ExperimentConfig{}.to_json();
  reject_unknown(given, j, "");
  j.merge_patch(given);
  // merge_patch treats null as deletion; restore the optional keys it may have removed.
  const json defaults = ExperimentConfig{}.to_json();
  for (const char* p : {"/geometry/snr_db", "/tv/lambda", "/training/noise_snr_db"}) {
    const json::json_pointer ptr(p);
    if (!j.contains(ptr)) j[ptr] = defaults[ptr];
  }

  ExperimentConfig c;
  try {
    c.dataset = j["dataset"].get<std::string>();
    c.sinograms = j["sinograms"].get<std::string>();
    c.out = j["out"].get<std::string>();
    c.model = j["model"].get<std::string>();
    c.split = j["split"].get<std::string>();
    c.recon = j["recon"].get<std::vector<std::string>>();
    c.method = method_from_string(j["method"].get<std::string>());
    c.seed = j["seed"].get<std::uint64_t>();

    const auto& d = j["data"];
    c.data.kind = d["kind"].get<std::string>();
    c.data.size = d["size"].get<std::size_t>();
    c.data.n_train = d["n_train"].get<std::size_t>();
    c.data.n_test = d["n_test"].get<std::size_t>();
    c.data.n_ellipses = d["n_ellipses"].get<std::size_t>();
    c.data.intensity_hi = d["intensity_hi"].get<double>();

    const auto& g = j["geometry"];
    c.geometry.n_views = g["n_views"].get<std::size_t>();
    c.geometry.n_offsets = g["n_offsets"].get<std::size_t>();
    c.geometry.jitter_std_deg = g["jitter_std_deg"].get<double>();
    c.geometry.snr_db = opt_from_json(g["snr_db"]);

    const auto& s = j["solver"];
    c.solver.gamma_factors = s["gamma_factors"].get<std::vector<double>>();
    c.solver.alpha0 = s["alpha0"].get<double>();
    c.solver.c = s["c"].get<double>();
    c.solver.max_iter = s["max_iter"].get<std::size_t>();
    c.solver.stop_tol = s["stop_tol"].get<double>();
    c.solver.skip_first_gradient = s["skip_first_gradient"].get<bool>();

    const auto& t = j["tv"];
    c.tv.n_grid = t["n_grid"].get<std::size_t>();
    c.tv.n_iter = t["n_iter"].get<std::size_t>();
    c.tv.lambda = opt_from_json(t["lambda"]);
    c.tv.cg_max_iter = t["cg_max_iter"].get<std::size_t>();

    const auto& tr = j["training"];
    c.training.schedule = TrainingSchedule::from_json(tr["schedule"]);
    c.training.data_scale = tr["data_scale"].get<double>();
    c.training.noise_snr_db = opt_from_json(tr["noise_snr_db"]);
    c.training.view_perturb_prob = tr["view_perturb_prob"].get<double>();
    c.training.resume = tr["resume"].get<std::string>();
    c.training.n_train_use = tr["n_train_use"].get<std::size_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  for (double f : c.solver.gamma_factors) {
    if (!(f > 0.0)) throw ConfigError("config: gamma factors must be positive");
  }
  return c;
}

}  // namespace pgdrecon::cli
