#include "dnet/config_json.h"

namespace dnet {

using nlohmann::json;

json train_config_to_json(const TrainConfig& c) {
  return json{{"lr", c.lr},
              {"epochs", c.epochs},
              {"decay_every", c.decay_every},
              {"decay_factor", c.decay_factor},
              {"batch", c.batch},
              {"label_smoothing", c.label_smoothing},
              {"augmentation", c.augmentation},
              {"seed", c.seed},
              {"checkpoint_every", c.checkpoint_every},
              {"eval_every", c.eval_every}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.lr = j.value("lr", c.lr);
  c.epochs = j.value("epochs", c.epochs);
  c.decay_every = j.value("decay_every", c.decay_every);
  c.decay_factor = j.value("decay_factor", c.decay_factor);
  c.batch = j.value("batch", c.batch);
  c.label_smoothing = j.value("label_smoothing", c.label_smoothing);
  c.augmentation = j.value("augmentation", c.augmentation);
  c.seed = j.value("seed", c.seed);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.eval_every = j.value("eval_every", c.eval_every);
  c.validate();
  return c;
}

} // namespace dnet
