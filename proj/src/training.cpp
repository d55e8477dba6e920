#include "pgdrecon/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

#include "pgdrecon/phantoms.hpp"

namespace pgdrecon {

void TrainingSchedule::validate() const {
  if (!(lr_end > 0.0 && lr_end <= lr_start)) {
    throw ConfigError("schedule: need 0 < lr_end <= lr_start");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("schedule: momentum must be in [0, 1)");
  if (!(grad_clip > 0.0)) throw ConfigError("schedule: grad_clip must be positive");
  if (batch_size == 0) throw ConfigError("schedule: batch_size must be positive");
}

double TrainingSchedule::stage1_lr(std::size_t epoch) const {
  if (t1 <= 1) return lr_start;
  const double frac = double(std::min(epoch, t1 - 1)) / double(t1 - 1);
  return lr_start * std::pow(lr_end / lr_start, frac);
}

nlohmann::json TrainingSchedule::to_json() const {
  return {{"t1", t1},
          {"t2", t2},
          {"t3", t3},
          {"lr_start", lr_start},
          {"lr_end", lr_end},
          {"momentum", momentum},
          {"grad_clip", grad_clip},
          {"batch_size", batch_size},
          {"seed", seed}};
}

TrainingSchedule TrainingSchedule::from_json(const nlohmann::json& j) {
  TrainingSchedule s;
  s.t1 = j.value("t1", s.t1);
  s.t2 = j.value("t2", s.t2);
  s.t3 = j.value("t3", s.t3);
  s.lr_start = j.value("lr_start", s.lr_start);
  s.lr_end = j.value("lr_end", s.lr_end);
  s.momentum = j.value("momentum", s.momentum);
  s.grad_clip = j.value("grad_clip", s.grad_clip);
  s.batch_size = j.value("batch_size", s.batch_size);
  s.seed = j.value("seed", s.seed);
  return s;
}

nlohmann::json NoiseConfig::to_json() const {
  nlohmann::json j = {{"view_perturb_prob", view_perturb_prob}, {"jitter_std_deg", jitter_std_deg}};
  j["snr_db"] = snr_db ? nlohmann::json(*snr_db) : nlohmann::json(nullptr);
  return j;
}

std::string to_string(PerturbationEnsemble::Kind k) {
  switch (k) {
    case PerturbationEnsemble::Kind::Identity: return "identity";
    case PerturbationEnsemble::Kind::LinearRecon: return "linear_recon";
    case PerturbationEnsemble::Kind::Dynamic: return "dynamic";
  }
  return "unknown";
}

std::vector<Image> linear_recon_inputs(const std::vector<Image>& images, const RadonOperator& op,
                                       const ReconstructorA& A, const NoiseConfig& noise,
                                       std::uint64_t seed) {
  std::vector<Image> out;
  out.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Image& x = images[i];
    if (x.size() != op.domain_size()) throw ConfigError("training: image does not match operator");
    if (!noise.snr_db) {
      out.push_back(A(op.forward(x.pixels)));
      continue;
    }
    std::mt19937_64 rng(mix_seed(seed, i));
    std::bernoulli_distribution perturb(noise.view_perturb_prob);
    Vector y;
    if (perturb(rng) && noise.jitter_std_deg > 0.0) {
      SinogramGeometry g = op.geometry();
      std::normal_distribution<double> jitter(0.0, noise.jitter_std_deg);
      for (auto& a : g.angles_deg) a += jitter(rng);
      y = RadonOperator(op.width(), op.height(), op.pixel_size(), g).forward(x.pixels);
    } else {
      y = op.forward(x.pixels);
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector n(y.size());
    for (auto& v : n) v = normal(rng);
    scale_noise_to_snr(y, n, *noise.snr_db);
    for (std::size_t k = 0; k < y.size(); ++k) y[k] += n[k];
    out.push_back(A(y));
  }
  return out;
}

namespace {

std::vector<TrainingPair> pair_up(const std::vector<Image>& inputs, const std::vector<Image>& targets) {
  std::vector<TrainingPair> out;
  out.reserve(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) out.push_back({inputs[i], targets[i]});
  return out;
}

std::vector<Image> apply_net(const ConvNetParams& p, const std::vector<Image>& inputs) {
  std::vector<Image> out;
  out.reserve(inputs.size());
  for (const auto& v : inputs) out.push_back(forward(p, v));
  return out;
}

}  // namespace

std::vector<PerturbationEnsemble> build_ensembles(const std::vector<Image>& train_images,
                                                  const RadonOperator& op, const ReconstructorA& A,
                                                  const ConvNetParams& params_current,
                                                  const NoiseConfig& noise, std::uint64_t seed) {
  if (train_images.empty()) throw ConfigError("ensembles: empty training set");
  const auto linear = linear_recon_inputs(train_images, op, A, noise, seed);
  std::vector<PerturbationEnsemble> out(3);
  out[0] = {PerturbationEnsemble::Kind::Identity, pair_up(train_images, train_images)};
  out[1] = {PerturbationEnsemble::Kind::LinearRecon, pair_up(linear, train_images)};
  out[2] = {PerturbationEnsemble::Kind::Dynamic,
            pair_up(apply_net(params_current, linear), train_images)};
  return out;
}

std::string TrainingResult::curve_csv() const {
  std::ostringstream os;
  os.precision(12);
  os << "stage,epoch,lr,train_loss,linear_loss,n_samples,seconds\n";
  for (const auto& r : curve) {
    os << r.stage << ',' << r.epoch << ',' << r.lr << ',' << r.train_loss << ',' << r.linear_loss
       << ',' << r.n_samples << ',' << r.seconds << '\n';
  }
  return os.str();
}

namespace {

class Trainer {
 public:
  Trainer(const TrainingSchedule& s, const std::vector<Image>& images, const RadonOperator& op,
          const ReconstructorA& A, const TrainingOptions& opt, ConvNetParams start)
      : s_(s), images_(images), op_(op), A_(A), opt_(opt), params_(std::move(start)),
        velocity_(ConvNetParams::kCount, 0.0), rng_(mix_seed(s.seed, 0x7a11)) {
    if (!opt_.noise.snr_db) linear_ = linear_recon_inputs(images_, op_, A_, opt_.noise, 0);
  }

  void run_stage(int stage, std::size_t n_epochs, std::vector<EpochRecord>& curve) {
    for (std::size_t e = 0; e < n_epochs; ++e) {
      const auto t0 = std::chrono::steady_clock::now();
      const double lr = stage == 1 ? s_.stage1_lr(e) : s_.lr_end;
      if (opt_.noise.snr_db) {
        linear_ = linear_recon_inputs(images_, op_, A_, opt_.noise, mix_seed(s_.seed, 1000 + epoch_));
      }
      // Ensemble members active in this stage; Dynamic uses the parameters as they stand
      // at the start of the epoch.
      std::vector<TrainingPair> samples = pair_up(linear_, images_);
      if (stage >= 2) {
        auto dyn = pair_up(apply_net(params_, linear_), images_);
        samples.insert(samples.end(), std::make_move_iterator(dyn.begin()),
                       std::make_move_iterator(dyn.end()));
      }
      if (stage >= 3) {
        auto id = pair_up(images_, images_);
        samples.insert(samples.end(), std::make_move_iterator(id.begin()),
                       std::make_move_iterator(id.end()));
      }

      EpochRecord rec;
      rec.stage = stage;
      rec.epoch = epoch_;
      rec.lr = lr;
      rec.n_samples = samples.size();
      rec.train_loss = sgd_epoch(samples, lr, stage) / double(samples.size());
      const auto lin = pair_up(linear_, images_);
      rec.linear_loss = loss_only(params_, lin) / double(lin.size());
      rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      curve.push_back(rec);
      if (opt_.on_epoch) opt_.on_epoch(rec);
      ++epoch_;
    }
  }

  const ConvNetParams& params() const { return params_; }

 private:
  double sgd_epoch(const std::vector<TrainingPair>& samples, double lr, int stage) {
    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng_);
    double total = 0.0;
    std::vector<TrainingPair> batch;
    for (std::size_t start = 0; start < order.size(); start += s_.batch_size) {
      batch.clear();
      const std::size_t stop = std::min(order.size(), start + s_.batch_size);
      for (std::size_t i = start; i < stop; ++i) batch.push_back(samples[order[i]]);
      const auto lg = loss_and_grad(params_, batch);
      if (!std::isfinite(lg.loss) || !all_finite(lg.grad)) {
        throw NumericalError("training: non-finite loss in stage " + std::to_string(stage) +
                             ", epoch " + std::to_string(epoch_) + ", batch starting at sample " +
                             std::to_string(start) + " (lr " + std::to_string(lr) + ")");
      }
      total += lg.loss;
      for (std::size_t k = 0; k < ConvNetParams::kCount; ++k) {
        const double g = std::clamp(lg.grad[k], -s_.grad_clip, s_.grad_clip);
        velocity_[k] = s_.momentum * velocity_[k] - lr * g;
        params_.theta[k] += velocity_[k];
      }
    }
    return total;
  }

  const TrainingSchedule& s_;
  const std::vector<Image>& images_;
  const RadonOperator& op_;
  const ReconstructorA& A_;
  const TrainingOptions& opt_;
  ConvNetParams params_;
  Vector velocity_;
  std::mt19937_64 rng_;
  std::vector<Image> linear_;
  std::size_t epoch_ = 0;
};

}  // namespace

TrainingResult train(const TrainingSchedule& schedule, const std::vector<Image>& train_images,
                     const RadonOperator& op, const ReconstructorA& A,
                     const TrainingOptions& options) {
  schedule.validate();
  if (train_images.empty()) throw ConfigError("training: empty training set");
  const std::size_t w = train_images.front().width;
  const std::size_t h = train_images.front().height;
  for (const auto& img : train_images) {
    if (img.width != w || img.height != h) throw ConfigError("training: mixed image sizes");
  }

  TrainingResult res;
  ConvNetParams start = options.resume_from_stage1
                            ? *options.resume_from_stage1
                            : ConvNetParams::initialize(w, h, options.data_scale, schedule.seed);
  start.validate();
  if (start.width != w || start.height != h) {
    throw ConfigError("training: resumed model resolution differs from the training images");
  }

  Trainer trainer(schedule, train_images, op, A, options, std::move(start));
  if (!options.resume_from_stage1) trainer.run_stage(1, schedule.t1, res.curve);
  res.stage1 = trainer.params();
  trainer.run_stage(2, schedule.t2, res.curve);
  trainer.run_stage(3, schedule.t3, res.curve);
  res.final = trainer.params();

  if (!options.held_out_inputs.empty()) {
    double sum = 0.0;
    for (const auto& v : options.held_out_inputs) {
      const Image p = forward(res.final, v);
      const Image pp = forward(res.final, p);
      const double denom = norm2(p.pixels);
      sum += denom > 0.0 ? distance(pp.pixels, p.pixels) / denom : 0.0;
    }
    res.idempotence_defect = sum / double(options.held_out_inputs.size());
  }
  return res;
}

}  // namespace pgdrecon
