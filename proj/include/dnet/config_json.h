#pragma once

#include "dnet/network.h"
#include "dnet/training.h"

#include <json.hpp>

namespace dnet {

nlohmann::json network_config_to_json(const NetworkConfig& c);
NetworkConfig network_config_from_json(const nlohmann::json& j);

nlohmann::json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

} // namespace dnet
