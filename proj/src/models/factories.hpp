#pragma once

#include <memory>
#include <random>

#include "gaitwave/models.hpp"

namespace gaitwave::detail {

std::unique_ptr<Model> make_recurrent(const ModelConfig& cfg, std::mt19937_64& rng);
std::unique_ptr<Model> make_resnet(const ModelConfig& cfg, std::mt19937_64& rng);
std::unique_ptr<Model> make_tcn(const ModelConfig& cfg, std::mt19937_64& rng);

}  // namespace gaitwave::detail
