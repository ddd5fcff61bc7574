#include "lgt/layers.hpp"

namespace lgt {

const char* to_string(LayerMode mode) {
    switch (mode) {
        case LayerMode::trainable: return "trainable";
        case LayerMode::frozen: return "frozen";
        case LayerMode::frozen_with_lora: return "frozen_with_lora";
    }
    return "?";
}

}  // namespace lgt
