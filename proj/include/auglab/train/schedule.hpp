#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace auglab {

// ---------------------------------------------------------------------------
// Learning-rate schedules: constant, step decay at milestones, and cosine
// annealing without restart.
// ---------------------------------------------------------------------------
struct LrSchedule {
    enum class Kind { constant, step, cosine };

    Kind kind = Kind::constant;
    double lr0 = 0.1;
    double lr_min = 0.0;               // cosine floor
    double factor = 0.1;               // step multiplier per milestone
    std::vector<int> milestones;       // step; strictly increasing
    int total_epochs = 0;              // cosine T

    void validate() const {
        if (!(lr0 > 0.0)) throw std::invalid_argument("schedule: lr0 must be > 0");
        if (kind == Kind::step) {
            if (!(factor > 0.0 && factor < 1.0)) {
                throw std::invalid_argument("schedule: step factor must be in (0,1)");
            }
            for (std::size_t i = 1; i < milestones.size(); ++i) {
                if (milestones[i] <= milestones[i - 1]) {
                    throw std::invalid_argument("schedule: milestones must be strictly increasing");
                }
            }
        }
        if (kind == Kind::cosine) {
            if (total_epochs < 1) throw std::invalid_argument("schedule: cosine needs total_epochs >= 1");
            if (lr_min < 0.0 || lr_min > lr0) {
                throw std::invalid_argument("schedule: lr_min must be in [0, lr0]");
            }
        }
    }

    static LrSchedule constant(double lr) {
        LrSchedule s;
        s.kind = Kind::constant;
        s.lr0 = lr;
        return s;
    }
    static LrSchedule step(double lr0, std::vector<int> milestones, double factor) {
        LrSchedule s;
        s.kind = Kind::step;
        s.lr0 = lr0;
        s.milestones = std::move(milestones);
        s.factor = factor;
        return s;
    }
    static LrSchedule cosine(double lr0, double lr_min, int total_epochs) {
        LrSchedule s;
        s.kind = Kind::cosine;
        s.lr0 = lr0;
        s.lr_min = lr_min;
        s.total_epochs = total_epochs;
        return s;
    }

    std::string describe() const {
        switch (kind) {
            case Kind::constant: return "constant(" + std::to_string(lr0) + ")";
            case Kind::step: {
                std::string m;
                for (int e : milestones) m += (m.empty() ? "" : ",") + std::to_string(e);
                return "step(" + std::to_string(lr0) + ",[" + m + "]," + std::to_string(factor) + ")";
            }
            case Kind::cosine:
                return "cosine(" + std::to_string(lr0) + "," + std::to_string(lr_min) + "," +
                       std::to_string(total_epochs) + ")";
        }
        return "?";
    }
};

inline double lr_at(const LrSchedule& schedule, int epoch) {
    if (epoch < 0) throw std::invalid_argument("lr_at: negative epoch");
    switch (schedule.kind) {
        case LrSchedule::Kind::constant: return schedule.lr0;
        case LrSchedule::Kind::step: {
            double lr = schedule.lr0;
            for (int m : schedule.milestones) {
                if (m <= epoch) lr *= schedule.factor;
            }
            return lr;
        }
        case LrSchedule::Kind::cosine: {
            if (epoch > schedule.total_epochs) return schedule.lr_min;
            const double phase = 3.14159265358979323846 * epoch / schedule.total_epochs;
            return schedule.lr_min + 0.5 * (schedule.lr0 - schedule.lr_min) * (1.0 + std::cos(phase));
        }
    }
    return schedule.lr0;
}

}  // namespace auglab
