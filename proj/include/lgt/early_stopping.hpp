#pragma once

#include <cstddef>
#include <span>

#include "lgt/error.hpp"

namespace lgt {

struct StopDecision {
    bool stop = false;
    /// 1-based epoch of the best value so far; 0 is the seeded baseline.
    std::size_t best_epoch = 0;
};

/// Stops after `patience` consecutive epochs without a strictly better
/// validation accuracy. Ties do not refresh patience.
class EarlyStopper {
public:
    explicit EarlyStopper(std::size_t patience) : patience_(patience) {
        if (patience == 0) throw ShapeError("early stopper: patience must be >= 1");
    }

    /// Treats `value` as the score of epoch 0 (the state before any update).
    void seed(double value) {
        best_ = value;
        best_epoch_ = 0;
        has_best_ = true;
    }

    StopDecision observe(double value) {
        ++epoch_;
        if (!has_best_ || value > best_) {
            best_ = value;
            best_epoch_ = epoch_;
            has_best_ = true;
            since_best_ = 0;
        } else {
            ++since_best_;
        }
        return {since_best_ >= patience_, best_epoch_};
    }

    std::size_t epoch() const noexcept { return epoch_; }
    std::size_t best_epoch() const noexcept { return best_epoch_; }
    double best_value() const noexcept { return best_; }

private:
    std::size_t patience_;
    std::size_t epoch_ = 0;
    std::size_t since_best_ = 0;
    std::size_t best_epoch_ = 0;
    double best_ = 0.0;
    bool has_best_ = false;
};

/// Replays a whole history; returns the decision at the first stop, or after
/// the last entry if the rule never fires.
inline StopDecision early_stopper(std::span<const double> history, std::size_t patience, std::size_t* stop_epoch = nullptr) {
    EarlyStopper s(patience);
    StopDecision d;
    for (double v : history) {
        d = s.observe(v);
        if (d.stop) break;
    }
    if (stop_epoch) *stop_epoch = s.epoch();
    return d;
}

}  // namespace lgt
