#include "dnet/training.h"

#include "dnet/rng.h"

#include <Eigen/Geometry>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

namespace dnet {

OptimizerState OptimizerState::for_params(const DiffusionNetParams& params) {
  OptimizerState s;
  for (const auto& p : params.store.items) {
    s.m.push_back(Eigen::MatrixXd::Zero(p.value.rows(), p.value.cols()));
    s.v.push_back(Eigen::MatrixXd::Zero(p.value.rows(), p.value.cols()));
  }
  return s;
}

void adam_step(DiffusionNetParams& params, OptimizerState& state, double lr) {
  if (state.m.size() != params.store.items.size())
    throw Error("adam_step: optimizer state does not match the parameter store");
  state.step++;
  const double b1 = state.beta1, b2 = state.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));

  for (size_t i = 0; i < params.store.items.size(); i++) {
    ad::Param& p = params.store.items[i];
    if (!p.trainable) continue;
    if (!p.grad.allFinite()) throw Error("adam_step: non-finite gradient for parameter " + p.name);
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * p.grad;
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * p.grad.cwiseProduct(p.grad);
    Eigen::MatrixXd mhat = state.m[i] / bc1;
    Eigen::MatrixXd vhat = state.v[i] / bc2;
    p.value -= lr * mhat.cwiseQuotient(((vhat.cwiseSqrt().array()) + state.epsilon).matrix());
  }
}

void TrainConfig::validate() const {
  if (lr <= 0) throw Error("train config: lr must be positive");
  if (epochs < 1) throw Error("train config: epochs must be >= 1");
  if (decay_every < 1) throw Error("train config: decay_every must be >= 1");
  if (decay_factor <= 0) throw Error("train config: decay_factor must be positive");
  if (batch != 1) throw Error("train config: only batch size 1 is supported");
  if (label_smoothing < 0 || label_smoothing >= 1)
    throw Error("train config: label_smoothing must be in [0, 1)");
  if (augmentation != "none" && augmentation != "rot_z" && augmentation != "rot_full")
    throw Error("train config: unknown augmentation '" + augmentation + "'");
}

TrainConfig TrainConfig::defaults_for(const std::string& task) {
  TrainConfig c;
  if (task == "classification") c.label_smoothing = 0.2;
  return c;
}

double learning_rate_at(const TrainConfig& config, int epoch) {
  int steps = (epoch - 1) / config.decay_every;
  return config.lr * std::pow(config.decay_factor, steps);
}

Eigen::Matrix3d random_rotation_matrix(const std::string& mode, uint64_t seed) {
  Rng rng(seed);
  if (mode == "rot_z") {
    double a = rng.uniform(0.0, 2.0 * M_PI);
    Eigen::Matrix3d R;
    R << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
    return R;
  }
  if (mode == "rot_full") {
    // uniform rotation from a normalized Gaussian quaternion
    Eigen::Vector4d q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    while (q.norm() < 1e-12) q = Eigen::Vector4d(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    q.normalize();
    return Eigen::Quaterniond(q[0], q[1], q[2], q[3]).toRotationMatrix();
  }
  throw Error("random_rotation: unknown mode '" + mode + "'");
}

Eigen::MatrixXd random_rotation(const Eigen::MatrixXd& positions, const std::string& mode,
                                uint64_t seed) {
  Eigen::Matrix3d R = random_rotation_matrix(mode, seed);
  return positions * R.transpose();
}

namespace {

std::vector<int> targets_of(const TaskSample& sample, const std::string& task) {
  if (task == "classification") {
    if (!sample.shape.class_label) throw Error("classification sample lacks a class label");
    return {*sample.shape.class_label};
  }
  if (!sample.shape.labels) throw Error("segmentation sample lacks vertex labels");
  const Eigen::VectorXi& l = *sample.shape.labels;
  std::vector<int> t(static_cast<size_t>(l.size()));
  for (int i = 0; i < l.size(); i++) t[static_cast<size_t>(i)] = l[i];
  return t;
}

int count_correct(const Eigen::MatrixXd& logits, const std::vector<int>& targets) {
  int correct = 0;
  for (int i = 0; i < logits.rows(); i++) {
    int arg = 0;
    logits.row(i).maxCoeff(&arg);
    if (arg == targets[static_cast<size_t>(i)]) correct++;
  }
  return correct;
}

} // namespace

double evaluate(const std::vector<TaskSample>& samples, DiffusionNetParams& params,
                const std::string& task) {
  long correct = 0, total = 0;
  for (const TaskSample& s : samples) {
    Eigen::MatrixXd features = featurize(s.shape, s.ops, params.config);
    ad::Tape tape;
    ForwardOptions opt;
    opt.train = false;
    ad::Tensor logits = network_logits(tape, features, s.ops, params, opt);
    std::vector<int> targets = targets_of(s, task);
    correct += count_correct(logits.value(), targets);
    total += static_cast<long>(targets.size());
    tape.clear();
  }
  return total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

FitResult fit(const Dataset& dataset, const NetworkConfig& net_config,
              const TrainConfig& train_config, const std::string& out_dir) {
  net_config.validate();
  train_config.validate();
  if (dataset.train.empty()) throw Error("fit: empty training set");
  if (dataset.n_classes < 1) throw Error("fit: dataset must declare n_classes");
  if (net_config.n_out != dataset.n_classes)
    throw Error("fit: network n_out (" + std::to_string(net_config.n_out) +
                ") does not match dataset n_classes (" + std::to_string(dataset.n_classes) + ")");

  FitResult result;
  result.params = init_params(net_config, train_config.seed);
  OptimizerState opt_state = OptimizerState::for_params(result.params);
  Rng order_rng(train_config.seed ^ 0x7261696eull);
  Rng aug_rng(train_config.seed ^ 0x726f7461ull);
  Rng drop_rng(train_config.seed ^ 0x64726f70ull);

  const bool rotate = train_config.augmentation != "none" && net_config.input_mode == "xyz";
  const int n_train = static_cast<int>(dataset.train.size());
  std::vector<int> order(static_cast<size_t>(n_train));
  std::iota(order.begin(), order.end(), 0);

  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

  for (int epoch = 1; epoch <= train_config.epochs; epoch++) {
    auto t0 = std::chrono::steady_clock::now();
    double lr = learning_rate_at(train_config, epoch);

    // seeded Fisher-Yates shuffle
    for (int i = n_train - 1; i > 0; i--)
      std::swap(order[static_cast<size_t>(i)],
                order[static_cast<size_t>(order_rng.index(static_cast<uint64_t>(i + 1)))]);

    double loss_sum = 0.0;
    long correct = 0, total = 0;
    for (int idx : order) {
      const TaskSample& s = dataset.train[static_cast<size_t>(idx)];
      Eigen::MatrixXd features = featurize(s.shape, s.ops, result.params.config);
      if (rotate) features = random_rotation(features, train_config.augmentation, aug_rng.fork());

      ad::Tape tape;
      ForwardOptions fopt;
      fopt.train = true;
      fopt.dropout_seed = drop_rng.fork();
      ad::Tensor logits = network_logits(tape, features, s.ops, result.params, fopt);
      std::vector<int> targets = targets_of(s, dataset.task);
      ad::Tensor loss =
          ad::cross_entropy_label_smoothed(logits, targets, train_config.label_smoothing);

      loss_sum += loss.value()(0, 0);
      correct += count_correct(logits.value(), targets);
      total += static_cast<long>(targets.size());

      result.params.store.zero_grads();
      tape.backward(loss);
      adam_step(result.params, opt_state, lr);
    }

    EpochStats st;
    st.epoch = epoch;
    st.lr = lr;
    st.train_loss = loss_sum / n_train;
    st.train_acc = total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
    bool eval_now = (epoch % std::max(1, train_config.eval_every) == 0) ||
                    epoch == train_config.epochs;
    st.test_acc = eval_now && !dataset.test.empty()
                      ? evaluate(dataset.test, result.params, dataset.task)
                      : (result.log.empty() ? 0.0 : result.log.back().test_acc);
    st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(st);

    if (!out_dir.empty() && train_config.checkpoint_every > 0 &&
        epoch % train_config.checkpoint_every == 0)
      save_checkpoint(result.params,
                      out_dir + "/checkpoint_epoch" + std::to_string(epoch) + ".dnet");
  }

  result.final_test_acc = result.log.empty() ? 0.0 : result.log.back().test_acc;
  if (!out_dir.empty()) {
    write_metrics_csv(result.log, out_dir + "/metrics.csv");
    save_checkpoint(result.params, out_dir + "/checkpoint_final.dnet");
  }
  return result;
}

void write_metrics_csv(const std::vector<EpochStats>& log, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path);
  os << "epoch,lr,train_loss,train_acc,test_acc,seconds\n";
  char buf[256];
  for (const auto& st : log) {
    std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g,%.10g,%.10g,%.3f\n", st.epoch, st.lr,
                  st.train_loss, st.train_acc, st.test_acc, st.seconds);
    os << buf;
  }
}

} // namespace dnet
