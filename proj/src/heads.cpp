#include "avtrack/heads.hpp"

#include <cmath>

#include "avtrack/errors.hpp"

namespace avtrack::heads {

using nn::Var;

PredictionHeads::PredictionHeads(nn::ParamRegistry& reg, const std::string& prefix, int dim,
                                 int num_classes_, int hidden)
    : num_classes(num_classes_) {
    const double sd_in = 1.0 / std::sqrt(static_cast<double>(dim));
    const double sd_h = 1.0 / std::sqrt(static_cast<double>(hidden));
    w_t1 = reg.add_randn(prefix + ".traj.w1", dim, hidden, sd_in);
    b_t1 = reg.add_zeros(prefix + ".traj.b1", 1, hidden);
    w_t2 = reg.add_randn(prefix + ".traj.w2", hidden, hidden, sd_h);
    b_t2 = reg.add_zeros(prefix + ".traj.b2", 1, hidden);
    w_t3 = reg.add_randn(prefix + ".traj.w3", hidden, 3, sd_h);
    b_t3 = reg.add_zeros(prefix + ".traj.b3", 1, 3);
    w_c1 = reg.add_randn(prefix + ".cls.w1", dim, hidden, sd_in);
    b_c1 = reg.add_zeros(prefix + ".cls.b1", 1, hidden);
    w_c2 = reg.add_randn(prefix + ".cls.w2", hidden, num_classes, sd_h);
    b_c2 = reg.add_zeros(prefix + ".cls.b2", 1, num_classes);
}

Prediction PredictionHeads::forward(const Var& token_row) const {
    if (token_row->val.rows != 1) throw ShapeError("prediction heads: expected a single token row");
    auto h1 = nn::silu(nn::add_rowvec(nn::matmul(token_row, w_t1), b_t1));
    auto h2 = nn::silu(nn::add_rowvec(nn::matmul(h1, w_t2), b_t2));
    Prediction p;
    p.position = nn::add_rowvec(nn::matmul(h2, w_t3), b_t3);
    auto hc = nn::silu(nn::add_rowvec(nn::matmul(token_row, w_c1), b_c1));
    p.class_logits = nn::add_rowvec(nn::matmul(hc, w_c2), b_c2);
    p.class_probs = nn::softmax_rows(p.class_logits);
    return p;
}

Var loss_pos(const std::vector<Var>& predicted_positions, const std::vector<Target>& targets) {
    if (predicted_positions.empty() || predicted_positions.size() != targets.size())
        throw ShapeError("loss_pos: batch size mismatch");
    Var acc;
    for (size_t i = 0; i < predicted_positions.size(); ++i) {
        nn::Tensor t(1, 3);
        for (int k = 0; k < 3; ++k) t.v[k] = targets[i].position[k];
        auto term = nn::mean_all(nn::abs_op(nn::sub(predicted_positions[i], nn::constant(t))));
        acc = acc ? nn::add(acc, term) : term;
    }
    return nn::scale(acc, 1.0 / static_cast<double>(targets.size()));
}

Var loss_cls(const std::vector<Var>& class_probs, const std::vector<Target>& targets,
             double floor) {
    if (class_probs.empty() || class_probs.size() != targets.size())
        throw ShapeError("loss_cls: batch size mismatch");
    Var acc;
    for (size_t i = 0; i < class_probs.size(); ++i) {
        const int k = targets[i].class_id;
        if (k < 0 || k >= class_probs[i]->val.cols)
            throw ShapeError("loss_cls: target class out of range");
        auto picked = nn::slice_cols(nn::log_clamped(class_probs[i], floor), k, 1);
        acc = acc ? nn::add(acc, picked) : picked;
    }
    return nn::scale(acc, -1.0 / static_cast<double>(targets.size()));
}

Var loss_teacher_student(const std::vector<vision::StudentOutput>& students,
                         const std::vector<Target>& targets, double floor) {
    if (students.empty() || students.size() != targets.size())
        throw ShapeError("loss_teacher_student: batch size mismatch");
    Var acc;
    for (size_t i = 0; i < students.size(); ++i) {
        const double y = targets[i].visual_present ? 1.0 : 0.0;
        const auto& e = students[i].existence;
        // -[y log e + (1-y) log(1-e)]
        auto log_e = nn::log_clamped(e, floor);
        auto log_ne = nn::log_clamped(nn::add_scalar(nn::neg(e), 1.0), floor);
        auto bce = nn::neg(nn::add(nn::scale(log_e, y), nn::scale(log_ne, 1.0 - y)));
        Var term = bce;
        if (targets[i].visual_present) {
            nn::Tensor c(1, 2);
            c.v[0] = targets[i].center_u;
            c.v[1] = targets[i].center_v;
            auto center_err =
                nn::mean_all(nn::abs_op(nn::sub(students[i].center, nn::constant(c))));
            term = nn::add(term, center_err);
        }
        acc = acc ? nn::add(acc, term) : term;
    }
    return nn::scale(acc, 1.0 / static_cast<double>(targets.size()));
}

LossReport make_loss_report(double cls, double pos, double ts, double gamma1, double gamma2) {
    LossReport r;
    r.cls = cls;
    r.pos = pos;
    r.ts = ts;
    r.gamma1 = gamma1;
    r.gamma2 = gamma2;
    r.total = cls + gamma1 * pos + gamma2 * ts;
    return r;
}

Var loss_total(const Var& cls, const Var& pos, const Var& ts, double gamma1, double gamma2) {
    return nn::add(cls, nn::add(nn::scale(pos, gamma1), nn::scale(ts, gamma2)));
}

}  // namespace avtrack::heads
