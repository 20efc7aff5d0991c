#pragma once

#include "dnet/network.h"
#include "dnet/operators.h"
#include "dnet/shape.h"

#include <cstdint>
#include <string>
#include <vector>

namespace dnet {

// Adam moments per parameter, in parameter-store order.
struct OptimizerState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  std::vector<Eigen::MatrixXd> m, v;

  static OptimizerState for_params(const DiffusionNetParams& params);
};

// One Adam update over every trainable parameter. Throws (naming the
// parameter) on non-finite gradients.
void adam_step(DiffusionNetParams& params, OptimizerState& state, double lr);

struct TrainConfig {
  double lr = 0.001;
  int epochs = 200;
  int decay_every = 50;     // epochs
  double decay_factor = 0.5;
  int batch = 1;
  double label_smoothing = 0.0; // 0.2 for classification tasks
  std::string augmentation = "none"; // none | rot_z | rot_full
  uint64_t seed = 0;
  int checkpoint_every = 0; // epochs; 0 = final checkpoint only
  int eval_every = 1;       // epochs between test evaluations

  void validate() const;
  // Paper defaults per task family: classification turns on 0.2 smoothing.
  static TrainConfig defaults_for(const std::string& task);
};

// Stepped schedule: lr * decay_factor^floor((epoch - 1) / decay_every),
// epochs counted from 1.
double learning_rate_at(const TrainConfig& config, int epoch);

// Random rotation matrix: about z (angle uniform in [0, 2 pi)) or a uniform
// random 3D rotation. Orthogonal with determinant +1.
Eigen::Matrix3d random_rotation_matrix(const std::string& mode, uint64_t seed);
Eigen::MatrixXd random_rotation(const Eigen::MatrixXd& positions, const std::string& mode,
                                uint64_t seed);

// One shape with its precomputed operator bundle.
struct TaskSample {
  Shape shape;
  GeometryOperators ops;
};

struct Dataset {
  std::string task; // segmentation | classification
  int n_classes = 0;
  std::vector<TaskSample> train;
  std::vector<TaskSample> test;
};

struct EpochStats {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  double seconds = 0.0;
};

struct FitResult {
  DiffusionNetParams params;
  std::vector<EpochStats> log;
  double final_test_acc = 0.0;
};

// Training loop: shuffled per-epoch order, batch size 1, Adam with the
// stepped schedule; per-epoch metrics appended to <out_dir>/metrics.csv and
// checkpoints written when out_dir is non-empty.
FitResult fit(const Dataset& dataset, const NetworkConfig& net_config,
              const TrainConfig& train_config, const std::string& out_dir = "");

// Fraction of correctly labeled vertices (pooled over all shapes) for vertex
// tasks, or of correctly classified shapes. Runs in eval mode.
double evaluate(const std::vector<TaskSample>& samples, DiffusionNetParams& params,
                const std::string& task);

void write_metrics_csv(const std::vector<EpochStats>& log, const std::string& path);

} // namespace dnet
