#pragma once

#include <map>
#include <string>
#include <vector>

#include "groupseg/config.hpp"
#include "groupseg/dataset.hpp"
#include "groupseg/encoder.hpp"

namespace groupseg {

// Adam with decoupled weight decay. Decay touches only rank >= 2 parameters
// (projection matrices, embeddings, group tokens); biases, norm gains, and
// the temperature stay undecayed.
class AdamW {
public:
    explicit AdamW(ParamStore& params, double beta1 = 0.9, double beta2 = 0.999,
                   double eps = 1e-8);
    void step(double lr, double weight_decay);
    std::uint64_t steps_taken() const { return t_; }

    void fill_checkpoint(Checkpoint& ckpt) const;
    void load_from_checkpoint(const Checkpoint& ckpt, std::uint64_t step);

private:
    ParamStore* params_;
    double beta1_, beta2_, eps_;
    std::uint64_t t_ = 0;
    std::map<std::string, std::vector<double>> m_, v_;
};

// Scales all gradients so their global norm is at most max_norm; returns
// the pre-clip norm.
double clip_gradients(ParamStore& params, double max_norm);

// Linear warm-up to the base rate, then cosine decay toward zero over the
// remaining steps.
double lr_at(const OptimizerConfig& opt, std::int64_t step, std::int64_t steps_per_epoch);

struct TrainResult {
    std::uint64_t steps = 0;
    double final_loss = 0.0;
    std::string final_checkpoint;
    std::string metrics_path;
};

// Runs the full contrastive training loop over a generated split. Every
// random draw (init, shuffles, prompt sampling, Gumbel noise) is a pure
// function of the config seed, so reruns and checkpoint resumes match the
// metrics log bit for bit. Partial trailing batches are dropped.
TrainResult train_model(const RunConfig& cfg, const Dataset& data, const std::string& out_dir,
                        const std::string& resume_path = "");

}  // namespace groupseg
