#include "contrack/optim.hpp"

#include <cmath>

namespace contrack {

void AdamW::step(std::vector<NamedParam>& params) {
    ++t_;
    double bc1 = 1.0 - std::pow(opts_.beta1, t_);
    double bc2 = 1.0 - std::pow(opts_.beta2, t_);
    for (auto& p : params) {
        auto& data = p.tensor.data();
        const auto& grad = p.tensor.grad();
        Slot& slot = slots_[p.name];
        if (slot.m.size() != data.size()) {
            slot.m.assign(data.size(), 0.0);
            slot.v.assign(data.size(), 0.0);
        }
        for (std::size_t i = 0; i < data.size(); ++i) {
            data[i] -= opts_.lr * opts_.weight_decay * data[i];
            slot.m[i] = opts_.beta1 * slot.m[i] + (1.0 - opts_.beta1) * grad[i];
            slot.v[i] = opts_.beta2 * slot.v[i] + (1.0 - opts_.beta2) * grad[i] * grad[i];
            double mhat = slot.m[i] / bc1;
            double vhat = slot.v[i] / bc2;
            data[i] -= opts_.lr * mhat / (std::sqrt(vhat) + opts_.eps);
        }
    }
}

void zero_grads(std::vector<NamedParam>& params) {
    for (auto& p : params) p.tensor.zero_grad();
}

}  // namespace contrack
