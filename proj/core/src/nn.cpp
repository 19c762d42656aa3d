#include "rsspos/nn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <thread>
#include <tuple>

#include "rsspos/error.hpp"
#include "rsspos/random.hpp"

namespace rsspos {
namespace {

double to_unit(double v, double lo, double hi) { return 2.0 * (v - lo) / (hi - lo) - 1.0; }
double from_unit(double u, double lo, double hi) { return (u + 1.0) * 0.5 * (hi - lo) + lo; }

Eigen::VectorXd normalized_input(const MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& raw) {
  Eigen::VectorXd x(raw.size());
  for (Eigen::Index j = 0; j < raw.size(); ++j) x(j) = to_unit(raw(j), model.in_min(j), model.in_max(j));
  return x;
}

void check_rows(const NnDataset& data, std::span<const std::size_t> rows) {
  for (auto r : rows) {
    if (r >= data.size()) throw Error(ErrorCode::InvalidArgument, "row index out of range");
  }
}

void check_shape(const MlpModel& model, const NnDataset& data) {
  if (data.inputs.cols() != model.n_inputs) {
    throw Error(ErrorCode::DimensionMismatch, "dataset has " + std::to_string(data.inputs.cols()) +
                                                  " features, model expects " + std::to_string(model.n_inputs));
  }
  if (data.inputs.rows() != data.targets.size()) {
    throw Error(ErrorCode::LengthMismatch, "inputs and targets differ in length");
  }
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

void apply_step(MlpModel& model, const MlpGradients& g, double lr) {
  model.w_hidden -= lr * g.w_hidden;
  model.b_hidden -= lr * g.b_hidden;
  model.w_out -= lr * g.w_out;
  model.b_out -= lr * g.b_out;
}

}  // namespace

bool MlpModel::operator==(const MlpModel& o) const {
  return n_inputs == o.n_inputs && n_hidden == o.n_hidden && w_hidden == o.w_hidden &&
         b_hidden == o.b_hidden && w_out == o.w_out && b_out == o.b_out && in_min == o.in_min &&
         in_max == o.in_max && out_min == o.out_min && out_max == o.out_max;
}

NnDataset dataset_from_survey(std::span<const RssSample> samples) {
  std::map<double, std::map<std::string, double>> grid;
  std::map<std::string, int> ids;
  for (const auto& s : samples) {
    if (!grid[s.x_m].emplace(s.rsu_id, s.rss_dbm).second) {
      throw Error(ErrorCode::InvalidArgument, "duplicate sample for " + s.rsu_id + " at x=" + std::to_string(s.x_m));
    }
    ids[s.rsu_id] = 0;
  }
  if (grid.empty()) throw Error(ErrorCode::EmptyInput, "survey has no samples");

  NnDataset data;
  for (const auto& [id, unused] : ids) data.feature_names.push_back(id);
  const auto n = static_cast<Eigen::Index>(grid.size());
  const auto f = static_cast<Eigen::Index>(ids.size());
  data.inputs.resize(n, f);
  data.targets.resize(n);
  Eigen::Index row = 0;
  for (const auto& [x, readings] : grid) {
    if (static_cast<Eigen::Index>(readings.size()) != f) {
      throw Error(ErrorCode::InvalidArgument, "incomplete survey row at x=" + std::to_string(x));
    }
    Eigen::Index col = 0;
    for (const auto& [id, rss] : readings) data.inputs(row, col++) = rss;
    data.targets(row++) = x;
  }
  return data;
}

SplitIndices split_dataset(std::size_t n, std::uint64_t seed) {
  if (n < 7) throw Error(ErrorCode::TooFewSamples, "split needs at least 7 samples");
  std::vector<std::size_t> order = all_rows(n);
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());
  const auto holdout = static_cast<std::size_t>(std::floor(0.15 * static_cast<double>(n)));
  SplitIndices s;
  s.validation.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(holdout));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(holdout),
                order.begin() + static_cast<std::ptrdiff_t>(2 * holdout));
  s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(2 * holdout), order.end());
  return s;
}

MlpModel init_mlp(int n_inputs, int n_hidden, std::uint64_t seed) {
  if (n_inputs < 1 || n_hidden < 1) throw Error(ErrorCode::InvalidArgument, "layer sizes must be >= 1");
  MlpModel m;
  m.n_inputs = n_inputs;
  m.n_hidden = n_hidden;
  Rng rng(seed);
  const double hidden_bound = 1.0 / std::sqrt(static_cast<double>(n_inputs));
  const double out_bound = 1.0 / std::sqrt(static_cast<double>(n_hidden));
  m.w_hidden.resize(n_hidden, n_inputs);
  for (Eigen::Index i = 0; i < m.w_hidden.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.w_hidden.cols(); ++j) m.w_hidden(i, j) = rng.uniform(-hidden_bound, hidden_bound);
  }
  m.w_out.resize(n_hidden);
  for (Eigen::Index i = 0; i < m.w_out.size(); ++i) m.w_out(i) = rng.uniform(-out_bound, out_bound);
  m.b_hidden = Eigen::VectorXd::Zero(n_hidden);
  m.b_out = 0.0;
  m.in_min = Eigen::VectorXd::Constant(n_inputs, -1.0);
  m.in_max = Eigen::VectorXd::Constant(n_inputs, 1.0);
  return m;
}

void fit_normalization(MlpModel& model, const NnDataset& data, std::span<const std::size_t> rows) {
  check_shape(model, data);
  check_rows(data, rows);
  if (rows.empty()) throw Error(ErrorCode::EmptyInput, "no rows to fit normalization on");
  for (Eigen::Index j = 0; j < data.inputs.cols(); ++j) {
    double lo = data.inputs(static_cast<Eigen::Index>(rows[0]), j);
    double hi = lo;
    for (auto r : rows) {
      lo = std::min(lo, data.inputs(static_cast<Eigen::Index>(r), j));
      hi = std::max(hi, data.inputs(static_cast<Eigen::Index>(r), j));
    }
    if (hi == lo) {
      lo -= 1.0;
      hi += 1.0;
    }
    model.in_min(j) = lo;
    model.in_max(j) = hi;
  }
  double lo = data.targets(static_cast<Eigen::Index>(rows[0]));
  double hi = lo;
  for (auto r : rows) {
    lo = std::min(lo, data.targets(static_cast<Eigen::Index>(r)));
    hi = std::max(hi, data.targets(static_cast<Eigen::Index>(r)));
  }
  if (hi == lo) {
    lo -= 1.0;
    hi += 1.0;
  }
  model.out_min = lo;
  model.out_max = hi;
}

double forward(const MlpModel& model, std::span<const double> rss_dbm) {
  if (static_cast<int>(rss_dbm.size()) != model.n_inputs) {
    throw Error(ErrorCode::DimensionMismatch, "expected " + std::to_string(model.n_inputs) + " inputs, got " +
                                                  std::to_string(rss_dbm.size()));
  }
  const Eigen::Map<const Eigen::VectorXd> raw(rss_dbm.data(), static_cast<Eigen::Index>(rss_dbm.size()));
  const Eigen::VectorXd x = normalized_input(model, raw);
  const Eigen::VectorXd h = (model.w_hidden * x + model.b_hidden).array().tanh().matrix();
  const double y = model.w_out.dot(h) + model.b_out;
  return from_unit(y, model.out_min, model.out_max);
}

MlpGradients gradients(const MlpModel& model, const NnDataset& data, std::span<const std::size_t> rows) {
  check_shape(model, data);
  check_rows(data, rows);
  if (rows.empty()) throw Error(ErrorCode::EmptyBatch, "gradient of an empty batch");

  MlpGradients g;
  g.w_hidden = Eigen::MatrixXd::Zero(model.n_hidden, model.n_inputs);
  g.b_hidden = Eigen::VectorXd::Zero(model.n_hidden);
  g.w_out = Eigen::VectorXd::Zero(model.n_hidden);
  const double scale = 2.0 / static_cast<double>(rows.size());
  for (auto r : rows) {
    const auto row = static_cast<Eigen::Index>(r);
    const Eigen::VectorXd x = normalized_input(model, data.inputs.row(row).transpose());
    const Eigen::VectorXd h = (model.w_hidden * x + model.b_hidden).array().tanh().matrix();
    const double y = model.w_out.dot(h) + model.b_out;
    const double t = to_unit(data.targets(row), model.out_min, model.out_max);
    const double dy = scale * (y - t);
    g.w_out += dy * h;
    g.b_out += dy;
    const Eigen::VectorXd delta =
        (dy * model.w_out.array() * (1.0 - h.array().square())).matrix();
    g.w_hidden += delta * x.transpose();
    g.b_hidden += delta;
  }
  return g;
}

MlpGradients gradients(const MlpModel& model, const NnDataset& batch) {
  const auto rows = all_rows(batch.size());
  return gradients(model, batch, rows);
}

double normalized_loss(const MlpModel& model, const NnDataset& data, std::span<const std::size_t> rows) {
  check_shape(model, data);
  check_rows(data, rows);
  if (rows.empty()) throw Error(ErrorCode::EmptyBatch, "loss of an empty batch");
  double sum = 0.0;
  for (auto r : rows) {
    const auto row = static_cast<Eigen::Index>(r);
    const Eigen::VectorXd x = normalized_input(model, data.inputs.row(row).transpose());
    const Eigen::VectorXd h = (model.w_hidden * x + model.b_hidden).array().tanh().matrix();
    const double e = model.w_out.dot(h) + model.b_out - to_unit(data.targets(row), model.out_min, model.out_max);
    sum += e * e;
  }
  return sum / static_cast<double>(rows.size());
}

double mse_on(const MlpModel& model, const NnDataset& data, std::span<const std::size_t> rows) {
  check_shape(model, data);
  check_rows(data, rows);
  if (rows.empty()) throw Error(ErrorCode::EmptyInput, "MSE of an empty set");
  double sum = 0.0;
  std::vector<double> in(static_cast<std::size_t>(model.n_inputs));
  for (auto r : rows) {
    const auto row = static_cast<Eigen::Index>(r);
    for (Eigen::Index j = 0; j < data.inputs.cols(); ++j) in[static_cast<std::size_t>(j)] = data.inputs(row, j);
    const double e = forward(model, in) - data.targets(row);
    sum += e * e;
  }
  return sum / static_cast<double>(rows.size());
}

TrainResult train(MlpModel model, const NnDataset& data, const SplitIndices& splits, const TrainConfig& config) {
  if (config.max_epochs < 1 || config.patience < 1 || !(config.learning_rate > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "max_epochs, patience and learning_rate must be positive");
  }
  if (splits.train.empty()) throw Error(ErrorCode::EmptyInput, "training split is empty");
  check_shape(model, data);
  fit_normalization(model, data, splits.train);

  TrainResult result;
  result.model = model;
  const bool early_stop = !splits.validation.empty();
  double best = std::numeric_limits<double>::infinity();
  int fails = 0;
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    apply_step(model, gradients(model, data, splits.train), config.learning_rate);
    EpochRecord rec;
    rec.train_mse = mse_on(model, data, splits.train);
    rec.validation_mse = early_stop ? mse_on(model, data, splits.validation) : rec.train_mse;
    result.history.push_back(rec);
    if (rec.validation_mse < best) {
      best = rec.validation_mse;
      result.model = model;
      result.best_epoch = result.history.size() - 1;
      fails = 0;
    } else if (early_stop && ++fails >= config.patience) {
      break;
    }
  }
  if (!early_stop) {
    result.model = model;
    result.best_epoch = result.history.size() - 1;
  }
  return result;
}

std::vector<std::uint64_t> SweepConfig::default_seeds(std::size_t count) {
  std::vector<std::uint64_t> seeds(count);
  std::iota(seeds.begin(), seeds.end(), std::uint64_t{1});
  return seeds;
}

namespace {

SweepRow run_sweep_job(const NnDataset& data, int hidden, std::uint64_t seed, const TrainConfig& tmpl) {
  TrainConfig cfg = tmpl;
  cfg.seed = seed;
  const SplitIndices splits = split_dataset(data.size(), seed);
  const TrainResult trained = train(init_mlp(static_cast<int>(data.inputs.cols()), hidden, seed), data, splits, cfg);

  std::vector<double> actual_all(data.size()), predicted_all(data.size());
  std::vector<double> in(static_cast<std::size_t>(data.inputs.cols()));
  for (std::size_t r = 0; r < data.size(); ++r) {
    for (Eigen::Index j = 0; j < data.inputs.cols(); ++j) {
      in[static_cast<std::size_t>(j)] = data.inputs(static_cast<Eigen::Index>(r), j);
    }
    actual_all[r] = data.targets(static_cast<Eigen::Index>(r));
    predicted_all[r] = forward(trained.model, in);
  }
  std::vector<double> actual_test, predicted_test;
  for (auto r : splits.test) {
    actual_test.push_back(actual_all[r]);
    predicted_test.push_back(predicted_all[r]);
  }
  SweepRow row;
  row.hidden = hidden;
  row.seed = seed;
  row.test = regression_metrics(actual_test, predicted_test, ConstantSeries::NanCorrelation);
  row.all = regression_metrics(actual_all, predicted_all, ConstantSeries::NanCorrelation);
  return row;
}

}  // namespace

std::vector<SweepRow> sweep(const NnDataset& data, const SweepConfig& config) {
  if (config.hidden_sizes.empty() || config.seeds.empty()) {
    throw Error(ErrorCode::InvalidArgument, "sweep needs at least one hidden size and one seed");
  }
  struct Job {
    int hidden;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (int h : config.hidden_sizes) {
    for (auto s : config.seeds) jobs.push_back({h, s});
  }
  std::vector<SweepRow> rows(jobs.size());
  std::vector<std::exception_ptr> failures(jobs.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        rows[i] = run_sweep_job(data, jobs[i].hidden, jobs[i].seed, config.train);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  unsigned threads = config.threads != 0 ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(jobs.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    return std::tie(a.all.mse, a.all.max_abs_error, a.hidden, a.seed) <
           std::tie(b.all.mse, b.all.max_abs_error, b.hidden, b.seed);
  });
  return rows;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << "rank,hidden,seed,mse_test,mse_all,maxerr_test,maxerr_all,std_test,std_all,var_test,var_all,"
         "corr_test,corr_all\n";
  auto num = [](double v) { return std::isnan(v) ? std::string("nan") : format_fixed(v); };
  std::size_t rank = 1;
  for (const auto& r : rows) {
    out << rank++ << ',' << r.hidden << ',' << r.seed << ',' << num(r.test.mse) << ',' << num(r.all.mse) << ','
        << num(r.test.max_abs_error) << ',' << num(r.all.max_abs_error) << ',' << num(r.test.std_dev) << ','
        << num(r.all.std_dev) << ',' << num(r.test.variance) << ',' << num(r.all.variance) << ','
        << num(r.test.correlation) << ',' << num(r.all.correlation) << '\n';
  }
}

}  // namespace rsspos
