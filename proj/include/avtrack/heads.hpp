#pragma once

#include <array>
#include <string>
#include <vector>

#include "avtrack/params.hpp"
#include "avtrack/vision.hpp"

namespace avtrack::heads {

struct Prediction {
    nn::Var position;      // 1x3 meters
    nn::Var class_logits;  // 1xK
    nn::Var class_probs;   // 1xK, rows sum to 1
};

// Separate perceptrons on the fused token row: trajectory (two hidden layers)
// and classification (one hidden layer).
struct PredictionHeads {
    int num_classes = 4;
    nn::Var w_t1, b_t1, w_t2, b_t2, w_t3, b_t3;
    nn::Var w_c1, b_c1, w_c2, b_c2;

    PredictionHeads() = default;
    PredictionHeads(nn::ParamRegistry& reg, const std::string& prefix, int dim, int num_classes,
                    int hidden = 128);

    Prediction forward(const nn::Var& token_row) const;
};

struct Target {
    std::array<double, 3> position{};  // meters (pseudo-label or truth)
    int class_id = 0;
    double center_u = 0.0, center_v = 0.0;  // normalized image coords
    int visual_present = 0;                 // {0,1}
};

// Mean absolute trajectory error over all coordinates and batch items
// (normalizes by 3N).
nn::Var loss_pos(const std::vector<nn::Var>& predicted_positions,
                 const std::vector<Target>& targets);

// Cross-entropy -1/N sum log p[target]; the log is floored at `floor`.
nn::Var loss_cls(const std::vector<nn::Var>& class_probs, const std::vector<Target>& targets,
                 double floor = 1e-12);

// Binary cross-entropy on existence plus, only for frames where a drone is
// visually present, the mean absolute center error.
nn::Var loss_teacher_student(const std::vector<vision::StudentOutput>& students,
                             const std::vector<Target>& targets, double floor = 1e-12);

struct LossReport {
    double pos = 0.0;
    double cls = 0.0;
    double ts = 0.0;
    double total = 0.0;
    double gamma1 = 2.0;
    double gamma2 = 0.5;
};

// total = cls + gamma1*pos + gamma2*ts, computed from the parts so the logged
// decomposition holds identically.
LossReport make_loss_report(double cls, double pos, double ts, double gamma1, double gamma2);
nn::Var loss_total(const nn::Var& cls, const nn::Var& pos, const nn::Var& ts, double gamma1,
                   double gamma2);

}  // namespace avtrack::heads
