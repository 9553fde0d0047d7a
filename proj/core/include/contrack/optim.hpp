#pragma once

#include <map>
#include <string>
#include <vector>

#include "contrack/tensor.hpp"

namespace contrack {

struct NamedParam {
    std::string name;
    Tensor tensor;
};

/// Adam with decoupled weight decay. State is keyed by parameter name so a
/// parameter list can be rebuilt between steps without losing moments.
class AdamW {
public:
    struct Options {
        double lr = 1e-4;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
        double weight_decay = 1e-4;
    };

    explicit AdamW(Options opts) : opts_(opts) {}

    void step(std::vector<NamedParam>& params);
    int steps_taken() const { return t_; }

private:
    struct Slot {
        std::vector<double> m, v;
    };
    Options opts_;
    std::map<std::string, Slot> slots_;
    int t_ = 0;
};

void zero_grads(std::vector<NamedParam>& params);

}  // namespace contrack
