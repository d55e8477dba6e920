#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "pgdrecon/classical.hpp"
#include "pgdrecon/cli.hpp"
#include "pgdrecon/convnet.hpp"
#include "pgdrecon/io.hpp"
#include "pgdrecon/metrics.hpp"
#include "pgdrecon/solvers.hpp"
#include "pgdrecon/tv.hpp"

namespace pgdrecon::cli {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string index_name(std::size_t index) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%04zu", index);
  return buf;
}

void require(const std::string& value, const std::string& what) {
  if (value.empty()) throw ConfigError(what + " is required");
}

std::shared_ptr<const RadonOperator> nominal_operator(std::size_t size, const Sinogram& sino) {
  auto g = parallel_geometry(size, size, 1.0, sino.angles_deg, sino.n_offsets);
  return std::make_shared<const RadonOperator>(size, size, 1.0, std::move(g));
}

std::shared_ptr<const ConvNetParams> load_params(const std::string& path, std::size_t size) {
  if (path.empty()) throw ConfigError("a trained model is required (--model)");
  if (!fs::exists(path)) throw ConfigError("model file not found: " + path);
  auto p = std::make_shared<ConvNetParams>(load_model(path).params);
  if (p->width != size || p->height != size) {
    throw ConfigError("model " + path + " was trained at " + std::to_string(p->width) + "x" +
                      std::to_string(p->height) + ", data is " + std::to_string(size) + "x" +
                      std::to_string(size));
  }
  return p;
}

// Test-split ground truth and measurements, from disk or simulated in memory.
struct TestData {
  std::vector<Image> truth;
  std::vector<Sinogram> noisy;
  std::vector<Vector> clean;
  std::optional<double> snr_db;
};

TestData load_test_data(const ExperimentConfig& cfg) {
  require(cfg.dataset, "--dataset");
  TestData d;
  d.truth = load_split(cfg.dataset, "test");
  if (d.truth.empty()) throw ConfigError("dataset has no test images");
  if (!cfg.sinograms.empty()) {
    auto m = load_simulation(cfg.sinograms, "test", d.truth.size());
    d.noisy = std::move(m.noisy);
    d.clean = std::move(m.clean);
    const json sim = io::read_json(fs::path(cfg.sinograms) / "simulation.json");
    d.snr_db = ExperimentConfig::from_json(sim.at("config")).geometry.snr_db;
  } else {
    for (std::size_t i = 0; i < d.truth.size(); ++i) {
      auto m = simulate_image(cfg, "test", i, d.truth[i]);
      d.noisy.push_back(std::move(m.sinogram));
      d.clean.push_back(std::move(m.clean));
    }
    d.snr_db = cfg.geometry.snr_db;
  }
  return d;
}

SolverConfig solver_config(const ExperimentConfig& cfg, double gamma) {
  SolverConfig s;
  s.gamma = gamma;
  s.alpha0 = cfg.solver.alpha0;
  s.c = CSequence::constant(cfg.solver.c);
  s.max_iter = cfg.solver.max_iter;
  s.stop_tol = cfg.solver.stop_tol;
  s.skip_first_gradient = cfg.solver.skip_first_gradient;
  return s;
}

struct ImageOutcome {
  Image x;
  std::string trace_csv;
  json extra = json::object();
};

std::string objective_csv(const Vector& objective) {
  std::ostringstream os;
  os.precision(12);
  os << "k,objective\n";
  for (std::size_t k = 0; k < objective.size(); ++k) os << k << ',' << objective[k] << '\n';
  return os.str();
}

double mean_regressed(const std::vector<ImageOutcome>& outs, const std::vector<Image>& truth) {
  double s = 0.0;
  for (std::size_t i = 0; i < outs.size(); ++i) s += regressed_snr(outs[i].x, truth[i]).snr_db;
  return s / double(outs.size());
}

}  // namespace

void cmd_phantom_gen(const ExperimentConfig& cfg) { write_phantom_dataset(cfg); }

void cmd_simulate(const ExperimentConfig& cfg) { write_simulation(cfg); }

void cmd_train(const ExperimentConfig& cfg) {
  require(cfg.dataset, "--dataset");
  require(cfg.out, "--out");
  auto images = load_split(cfg.dataset, "train");
  if (cfg.training.n_train_use > 0 && cfg.training.n_train_use < images.size()) {
    images.resize(cfg.training.n_train_use);
  }
  if (images.empty()) throw ConfigError("dataset has no training images");
  const std::size_t size = images.front().width;
  auto op = std::make_shared<const RadonOperator>(
      size, size, 1.0,
      parallel_geometry(size, size, 1.0, cfg.geometry.n_views, cfg.geometry.n_offsets));
  const ReconstructorA A(ReconstructorA::Kind::FBP, op);

  TrainingOptions opt;
  opt.data_scale = cfg.training.data_scale;
  opt.noise.snr_db = cfg.training.noise_snr_db;
  opt.noise.view_perturb_prob = cfg.training.view_perturb_prob;
  opt.noise.jitter_std_deg = cfg.geometry.jitter_std_deg;
  if (!cfg.training.resume.empty()) {
    opt.resume_from_stage1 = *load_params(cfg.training.resume, size);
  }
  const auto test = load_split(cfg.dataset, "test");
  opt.held_out_inputs = linear_recon_inputs(test, *op, A, NoiseConfig{}, 0);
  opt.on_epoch = [](const EpochRecord& r) {
    std::fprintf(stderr, "stage %d epoch %zu lr %.3g loss %.6g linear %.6g (%.1fs)\n", r.stage,
                 r.epoch, r.lr, r.train_loss, r.linear_loss, r.seconds);
  };

  const auto t0 = Clock::now();
  const TrainingResult res = train(cfg.training.schedule, images, *op, A, opt);
  const fs::path out(cfg.out);
  save_model(out / "regressor.model", res.stage1, {{"config", cfg.to_json()}, {"stage", "regressor"}});
  save_model(out / "projector.model", res.final, {{"config", cfg.to_json()}, {"stage", "projector"}});
  io::write_text(out / "training_curve.csv", res.curve_csv());
  json summary = {{"config", cfg.to_json()},
                  {"n_train", images.size()},
                  {"epochs", res.curve.size()},
                  {"resumed", opt.resume_from_stage1.has_value()},
                  {"seconds", seconds_since(t0)}};
  summary["idempotence_defect"] =
      res.idempotence_defect ? json(*res.idempotence_defect) : json(nullptr);
  if (!res.curve.empty()) {
    summary["final_train_loss"] = res.curve.back().train_loss;
    summary["final_linear_loss"] = res.curve.back().linear_loss;
  }
  io::write_json(out / "training_summary.json", summary);
}

void cmd_reconstruct(const ExperimentConfig& cfg) {
  require(cfg.out, "--out");
  const auto t0 = Clock::now();
  const TestData data = load_test_data(cfg);
  const std::size_t size = data.truth.front().width;
  const auto op = nominal_operator(size, data.noisy.front());
  const ReconstructorA A(ReconstructorA::Kind::FBP, op);
  const std::size_t n = data.truth.size();

  std::shared_ptr<const ConvNetParams> params;
  if (cfg.method == Method::Regressor || cfg.method == Method::PGD || cfg.method == Method::RPGD) {
    params = load_params(cfg.model, size);
  }

  std::vector<ImageOutcome> outs(n);
  json report_extra = json::object();
  switch (cfg.method) {
    case Method::FBP:
      for (std::size_t i = 0; i < n; ++i) outs[i].x = A(data.noisy[i]);
      break;
    case Method::BP:
      for (std::size_t i = 0; i < n; ++i) outs[i].x = op->backproject(data.noisy[i]);
      break;
    case Method::Regressor:
      for (std::size_t i = 0; i < n; ++i) outs[i].x = forward(*params, A(data.noisy[i]));
      break;
    case Method::TV: {
      TvConfig base;
      base.n_iter = cfg.tv.n_iter;
      base.cg_max_iter = cfg.tv.cg_max_iter;
      for (std::size_t i = 0; i < n; ++i) {
        const auto& y = data.noisy[i].values;
        const Image x0 = A(data.noisy[i]);
        TvConfig tc = base;
        if (cfg.tv.lambda) {
          tc.lambda = *cfg.tv.lambda;
        } else {
          tc.lambda = lambda_grid_search(*op, y, data.truth[i], cfg.tv.n_grid, x0, base).best_lambda;
        }
        // Rerun at the chosen value to record its objective trace.
        TvResult r = tv_admm(*op, y, tc, x0);
        outs[i].x = std::move(r.x);
        outs[i].trace_csv = objective_csv(r.objective);
        outs[i].extra = {{"lambda", tc.lambda}};
      }
      break;
    }
    case Method::PGD:
    case Method::RPGD: {
      const NeuralProjector F(params);
      const SpectralBounds b = estimate_spectral_bounds(*op, 1e-8, 5000);
      json sweep = json::array();
      double best = -std::numeric_limits<double>::infinity();
      // No factors: the solver's own step-size rule.
      std::vector<double> gammas;
      for (double factor : cfg.solver.gamma_factors) gammas.push_back(factor / b.lambda_max);
      if (gammas.empty()) {
        gammas.push_back(cfg.method == Method::RPGD ? relaxed_step_size(b) : pgd_step_size(b));
      }
      for (double gamma : gammas) {
        const double factor = gamma * b.lambda_max;
        const SolverConfig sc = solver_config(cfg, gamma);
        std::vector<ImageOutcome> trial(n);
        for (std::size_t i = 0; i < n; ++i) {
          TraceOptions to;
          to.ground_truth = &data.truth[i];
          to.clean_measurements = &data.clean[i];
          const auto& y = data.noisy[i].values;
          SolverResult r = cfg.method == Method::RPGD ? rpgd(F, *op, y, A, sc, to)
                                                      : pgd(F, *op, y, sc, A(y), to);
          trial[i].x = std::move(r.x);
          trial[i].trace_csv = r.trace.to_csv();
          trial[i].extra = {{"status", to_string(r.trace.status)},
                            {"iterations", r.trace.iterations()},
                            {"final_alpha", r.trace.final_alpha()}};
        }
        const double score = mean_regressed(trial, data.truth);
        sweep.push_back({{"gamma_factor", factor}, {"gamma", gamma}, {"mean_regressed_snr_db", score}});
        if (score > best) {
          best = score;
          outs = std::move(trial);
          report_extra["gamma"] = gamma;
          report_extra["gamma_factor"] = factor;
        }
      }
      report_extra["gamma_sweep"] = sweep;
      report_extra["lambda_max"] = b.lambda_max;
      break;
    }
  }

  const fs::path out(cfg.out);
  std::vector<EvalEntry> entries;
  json per_image = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    const std::string name = index_name(i);
    io::save_image(out / "recon" / (name + ".f64"), outs[i].x);
    io::write_pgm16(out / "recon" / (name + ".pgm"), outs[i].x, 0.0, cfg.data.intensity_hi);
    if (!outs[i].trace_csv.empty()) io::write_text(out / "traces" / (name + ".csv"), outs[i].trace_csv);
    entries.push_back(evaluate_image(name, outs[i].x, data.truth[i], op.get(), &data.clean[i]));
    json e = outs[i].extra;
    e["name"] = name;
    per_image.push_back(e);
  }
  const EvalReport report = summarize(std::move(entries));
  const std::string label = snr_label(data.snr_db);
  json j = {{"config", cfg.to_json()},
            {"method", to_string(cfg.method)},
            {"snr_label", label},
            {"n_views", data.noisy.front().n_views},
            {"metrics", report.to_json()},
            {"per_image_extra", per_image},
            {"details", report_extra}};
  j["table"][label][to_string(cfg.method)] = io::number_or_inf(report.regressed_snr_db);
  io::write_json(out / "report.json", j);
  io::write_text(out / "report.csv", report.to_csv());
  io::write_json(out / "timing.json", {{"seconds", seconds_since(t0)}});
  std::fprintf(stderr, "%s @ %s dB: mean SNR %.3f, regressed %.3f, sinogram %.3f\n",
               to_string(cfg.method).c_str(), label.c_str(), report.snr_db,
               report.regressed_snr_db, report.sinogram_snr_db);
}

void cmd_evaluate(const ExperimentConfig& cfg) {
  require(cfg.out, "--out");
  if (cfg.recon.empty()) throw ConfigError("--recon is required");
  json entries = json::array();
  std::map<std::string, std::map<std::string, std::pair<double, double>>> table;
  std::vector<std::string> methods;
  for (const auto& dir : cfg.recon) {
    const fs::path rp = fs::path(dir) / "report.json";
    if (!fs::exists(rp)) throw ConfigError("missing " + rp.string());
    const json rep = io::read_json(rp);
    ExperimentConfig run_cfg = ExperimentConfig::from_json(rep.at("config"));
    if (!cfg.dataset.empty()) run_cfg.dataset = cfg.dataset;
    const TestData data = load_test_data(run_cfg);
    const std::size_t size = data.truth.front().width;
    const auto op = nominal_operator(size, data.noisy.front());
    std::vector<EvalEntry> evals;
    for (std::size_t i = 0; i < data.truth.size(); ++i) {
      const Image x = io::load_image(fs::path(dir) / "recon" / (index_name(i) + ".f64"));
      evals.push_back(evaluate_image(index_name(i), x, data.truth[i], op.get(), &data.clean[i]));
    }
    const EvalReport report = summarize(std::move(evals));
    const std::string method = rep.at("method").get<std::string>();
    const std::string label = rep.at("snr_label").get<std::string>();
    if (std::find(methods.begin(), methods.end(), method) == methods.end()) methods.push_back(method);
    table[label][method] = {report.regressed_snr_db, report.sinogram_snr_db};
    entries.push_back({{"recon", dir}, {"method", method}, {"snr_label", label},
                       {"metrics", report.to_json()}});
  }

  auto write_table = [&](const std::string& file, bool sinogram) {
    std::ostringstream os;
    os.precision(6);
    os << "snr_db";
    for (const auto& m : methods) os << ',' << m;
    os << '\n';
    for (const auto& [label, row] : table) {
      os << label;
      for (const auto& m : methods) {
        os << ',';
        if (auto it = row.find(m); it != row.end()) {
          os << (sinogram ? it->second.second : it->second.first);
        }
      }
      os << '\n';
    }
    io::write_text(fs::path(cfg.out) / file, os.str());
  };
  write_table("table.csv", false);
  write_table("table_sinogram.csv", true);
  io::write_json(fs::path(cfg.out) / "evaluation.json",
                 {{"config", cfg.to_json()}, {"entries", entries}});
}

void cmd_trace_export(const ExperimentConfig& cfg) {
  require(cfg.out, "--out");
  if (cfg.recon.empty()) throw ConfigError("--recon is required");
  for (const auto& dir : cfg.recon) {
    const fs::path tdir = fs::path(dir) / "traces";
    if (!fs::is_directory(tdir)) throw ConfigError("no traces in " + dir);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(tdir)) {
      if (e.path().extension() == ".csv") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ConfigError("no traces in " + dir);

    std::vector<std::string> header;
    std::vector<std::vector<Vector>> traces;  // file -> row -> columns
    for (const auto& f : files) {
      std::ifstream in(f);
      std::string line;
      std::getline(in, line);
      std::vector<std::string> h;
      std::stringstream hs(line);
      for (std::string col; std::getline(hs, col, ',');) h.push_back(col);
      if (header.empty()) header = h;
      if (h != header) throw ConfigError("trace columns differ in " + f.string());
      std::vector<Vector> rows;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        Vector row;
        std::stringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');) row.push_back(std::stod(cell));
        rows.push_back(std::move(row));
      }
      if (rows.empty()) throw ConfigError("empty trace " + f.string());
      traces.push_back(std::move(rows));
    }

    // Traces that stopped early hold their final row.
    std::size_t len = 0;
    for (const auto& t : traces) len = std::max(len, t.size());
    std::ostringstream os;
    os.precision(12);
    for (std::size_t c = 0; c < header.size(); ++c) os << (c ? "," : "") << header[c];
    os << ",n_running\n";
    for (std::size_t k = 0; k < len; ++k) {
      std::size_t running = 0;
      for (std::size_t c = 0; c < header.size(); ++c) {
        double s = 0.0;
        for (const auto& t : traces) s += t[std::min(k, t.size() - 1)][c];
        os << (c ? "," : "") << (c == 0 ? double(k) : s / double(traces.size()));
      }
      for (const auto& t : traces) running += k < t.size() ? 1 : 0;
      os << ',' << running << '\n';
    }
    std::string tag = fs::path(dir).filename().string();
    const fs::path rp = fs::path(dir) / "report.json";
    if (fs::exists(rp)) {
      const json rep = io::read_json(rp);
      tag = rep.value("method", tag) + "_" + rep.value("snr_label", std::string("inf"));
    }
    io::write_text(fs::path(cfg.out) / ("mean_trace_" + tag + ".csv"), os.str());
  }
}

namespace {

enum class Kind { String, Int, Double, OptDouble, Bool, DoubleList, StringList };

struct Flag {
  const char* name;
  const char* pointer;
  Kind kind;
  const char* help;
};

// Flags and where they land in the config JSON.
const std::vector<Flag>& flag_table() {
  static const std::vector<Flag> flags = {
      {"--dataset", "/dataset", Kind::String, "dataset root (contains phantoms/)"},
      {"--sinograms", "/sinograms", Kind::String, "directory written by simulate"},
      {"--model", "/model", Kind::String, "trained model file"},
      {"--method", "/method", Kind::String, "fbp, bp, tv, regressor, pgd or rpgd"},
      {"--split", "/split", Kind::String, "train, test or all"},
      {"--recon", "/recon", Kind::StringList, "reconstruction directories"},
      {"--seed", "/seed", Kind::Int, "random seed"},
      {"--kind", "/data/kind", Kind::String, "random-ellipses or shepp-logan"},
      {"--size", "/data/size", Kind::Int, "image size in pixels"},
      {"--n-train", "/data/n_train", Kind::Int, "training phantoms"},
      {"--n-test", "/data/n_test", Kind::Int, "test phantoms"},
      {"--n-ellipses", "/data/n_ellipses", Kind::Int, "ellipses per phantom"},
      {"--intensity-max", "/data/intensity_hi", Kind::Double, "upper end of the dynamic range"},
      {"--views", "/geometry/n_views", Kind::Int, "number of views"},
      {"--offsets", "/geometry/n_offsets", Kind::Int, "detector offsets (0 = 1.5 x size)"},
      {"--jitter", "/geometry/jitter_std_deg", Kind::Double, "view angle jitter std (degrees)"},
      {"--snr", "/geometry/snr_db", Kind::OptDouble, "measurement SNR in dB, or inf"},
      {"--gamma-factors", "/solver/gamma_factors", Kind::DoubleList,
       "step sizes as multiples of 1/lambda_max, comma separated (default: the solver's rule)"},
      {"--alpha0", "/solver/alpha0", Kind::Double, "initial relaxation"},
      {"--c", "/solver/c", Kind::Double, "constant c_k"},
      {"--max-iter", "/solver/max_iter", Kind::Int, "solver iteration cap"},
      {"--stop-tol", "/solver/stop_tol", Kind::Double, "relative step stopping tolerance"},
      {"--skip-first-gradient", "/solver/skip_first_gradient", Kind::Bool,
       "apply F to A y directly at the first iteration"},
      {"--tv-grid", "/tv/n_grid", Kind::Int, "lambda grid size"},
      {"--tv-iter", "/tv/n_iter", Kind::Int, "ADMM iterations"},
      {"--tv-lambda", "/tv/lambda", Kind::OptDouble, "fixed lambda (skips the grid search)"},
      {"--tv-cg-iter", "/tv/cg_max_iter", Kind::Int, "CG iterations per x-update"},
      {"--t1", "/training/schedule/t1", Kind::Int, "stage 1 epochs"},
      {"--t2", "/training/schedule/t2", Kind::Int, "stage 2 epochs"},
      {"--t3", "/training/schedule/t3", Kind::Int, "stage 3 epochs"},
      {"--lr-start", "/training/schedule/lr_start", Kind::Double, "initial learning rate"},
      {"--lr-end", "/training/schedule/lr_end", Kind::Double, "final learning rate"},
      {"--momentum", "/training/schedule/momentum", Kind::Double, "SGD momentum"},
      {"--grad-clip", "/training/schedule/grad_clip", Kind::Double, "per-element gradient clip"},
      {"--batch-size", "/training/schedule/batch_size", Kind::Int, "minibatch size"},
      {"--train-seed", "/training/schedule/seed", Kind::Int, "training seed"},
      {"--data-scale", "/training/data_scale", Kind::Double, "network input scale"},
      {"--noise-snr", "/training/noise_snr_db", Kind::OptDouble, "training measurement SNR"},
      {"--view-perturb-prob", "/training/view_perturb_prob", Kind::Double,
       "probability of jittered views in noisy training"},
      {"--resume", "/training/resume", Kind::String, "stage-1 model: train stages 2 and 3 only"},
      {"--train-limit", "/training/n_train_use", Kind::Int, "use only the first N training images"},
  };
  return flags;
}

const std::map<std::string, std::vector<std::string>>& command_flags() {
  static const std::map<std::string, std::vector<std::string>> m = {
      {"phantom-gen",
       {"--seed", "--kind", "--size", "--n-train", "--n-test", "--n-ellipses", "--intensity-max"}},
      {"simulate", {"--dataset", "--split", "--seed", "--views", "--offsets", "--jitter", "--snr"}},
      {"train-projector",
       {"--dataset", "--seed", "--views", "--offsets", "--jitter", "--t1", "--t2", "--t3",
        "--lr-start", "--lr-end", "--momentum", "--grad-clip", "--batch-size", "--train-seed",
        "--data-scale", "--noise-snr", "--view-perturb-prob", "--resume", "--train-limit"}},
      {"reconstruct",
       {"--dataset", "--sinograms", "--model", "--method", "--seed", "--views", "--offsets",
        "--jitter", "--snr", "--intensity-max", "--gamma-factors", "--alpha0", "--c", "--max-iter",
        "--stop-tol", "--skip-first-gradient", "--tv-grid", "--tv-iter", "--tv-lambda",
        "--tv-cg-iter"}},
      {"evaluate", {"--recon", "--dataset"}},
      {"trace-export", {"--recon"}},
  };
  return m;
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("expected true or false, got '" + s + "'");
}

json flag_value(const Flag& f, const std::string& raw, const std::vector<std::string>& list) {
  try {
    switch (f.kind) {
      case Kind::String: return raw;
      case Kind::Int: {
        std::size_t pos = 0;
        const long long v = std::stoll(raw, &pos);
        if (pos != raw.size() || v < 0) throw std::invalid_argument(raw);
        return std::uint64_t(v);
      }
      case Kind::Double: {
        std::size_t pos = 0;
        const double v = std::stod(raw, &pos);
        if (pos != raw.size()) throw std::invalid_argument(raw);
        return v;
      }
      case Kind::OptDouble:
        if (raw == "inf" || raw == "none") return nullptr;
        return std::stod(raw);
      case Kind::Bool: return parse_bool(raw);
      case Kind::DoubleList: {
        json arr = json::array();
        std::stringstream ss(raw);
        for (std::string item; std::getline(ss, item, ',');) arr.push_back(std::stod(item));
        return arr;
      }
      case Kind::StringList: return list;
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError(std::string(f.name) + ": invalid value '" + raw + "'");
  }
  return nullptr;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Learned-projector CT reconstruction toolkit"};
  app.require_subcommand(1);

  struct Bound {
    CLI::App* sub = nullptr;
    std::string config;
    std::string out;
    std::map<std::string, std::string> values;
    std::map<std::string, std::vector<std::string>> lists;
    std::map<std::string, CLI::Option*> options;
  };
  std::map<std::string, Bound> bound;
  const std::map<std::string, std::string> descriptions = {
      {"phantom-gen", "generate the phantom dataset"},
      {"simulate", "simulate sinograms for a dataset split"},
      {"train-projector", "train the network (regressor and projector checkpoints)"},
      {"reconstruct", "reconstruct the test split and write a report"},
      {"evaluate", "re-score reconstructions and assemble a method x SNR table"},
      {"trace-export", "average per-image solver traces"},
  };
  for (const auto& [cmd, flags] : command_flags()) {
    Bound& b = bound[cmd];
    b.sub = app.add_subcommand(cmd, descriptions.at(cmd));
    b.sub->add_option("--config", b.config, "JSON config file; flags override it");
    b.sub->add_option("--out", b.out, "output directory");
    for (const auto& name : flags) {
      const auto it = std::find_if(flag_table().begin(), flag_table().end(),
                                   [&](const Flag& f) { return name == f.name; });
      if (it->kind == Kind::StringList) {
        b.options[name] = b.sub->add_option(name, b.lists[name], it->help)->expected(1, -1);
      } else {
        b.options[name] = b.sub->add_option(name, b.values[name], it->help);
      }
    }
  }

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e);
      return code == 0 ? 0 : 2;
    }
    for (auto& [cmd, b] : bound) {
      if (!b.sub->parsed()) continue;
      json j = b.config.empty() ? json::object() : io::read_json(b.config);
      if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
      if (!b.out.empty()) j["out"] = b.out;
      for (const auto& [name, opt] : b.options) {
        if (opt->count() == 0) continue;
        const auto f = std::find_if(flag_table().begin(), flag_table().end(),
                                    [&](const Flag& fl) { return name == fl.name; });
        j[json::json_pointer(f->pointer)] = flag_value(*f, b.values[name], b.lists[name]);
      }
      // Explicit nulls mean "absent"; spell them as "inf" so the merge keeps them.
      for (const char* p : {"/geometry/snr_db", "/tv/lambda", "/training/noise_snr_db"}) {
        const json::json_pointer ptr(p);
        if (j.contains(ptr) && j[ptr].is_null()) j[ptr] = "inf";
      }
      const ExperimentConfig cfg = ExperimentConfig::from_json(j);
      if (cmd == "phantom-gen") cmd_phantom_gen(cfg);
      else if (cmd == "simulate") cmd_simulate(cfg);
      else if (cmd == "train-projector") cmd_train(cfg);
      else if (cmd == "reconstruct") cmd_reconstruct(cfg);
      else if (cmd == "evaluate") cmd_evaluate(cfg);
      else if (cmd == "trace-export") cmd_trace_export(cfg);
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace pgdrecon::cli
