#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "wisppn/autograd.hpp"
#include "wisppn/csi.hpp"
#include "wisppn/model.hpp"
#include "wisppn/pam.hpp"

namespace wisppn::train {

struct TrainConfig {
    int epochs = 20;
    double initial_lr = 0.001;
    int batch_size = 32;
    std::vector<int> decay_epochs = {5, 10, 15};  // 1-based epoch numbers
    double decay_factor = 0.5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;

    void validate() const;
};

struct AdamState {
    std::vector<Tensor> m, v;  // aligned with model::collect_params order
    long step = 0;
};

AdamState init_adam(const std::vector<Param*>& params);

// Confidence-weighted squared PAM error for one sample:
//   sum_ij c[i][j] * ((px - tx)^2 + (py - ty)^2)
ag::Var pam_loss(ag::Graph& g, const ag::Var& pred, const Pam& target);

// Learning rate for the given 1-based epoch number: the initial rate halved
// once per decay epoch already reached.
double lr_schedule(int epoch, const TrainConfig& cfg);

// One bias-corrected Adam update over every parameter. Throws
// DivergenceError naming the parameter if a gradient is non-finite.
// Gradients are consumed (zeroed) by the update.
void adam_step(const std::vector<Param*>& params, AdamState& state, double lr,
               const TrainConfig& cfg);

struct EpochLog {
    int epoch = 0;  // 1-based
    double lr = 0.0;
    double mean_loss = 0.0;
    long wall_ms = 0;
};

// One JSON object per line: {"epoch":e,"lr":l,"mean_loss":m,"wall_ms":w}
std::string format_loss_log(const std::vector<EpochLog>& log);

struct TrainResult {
    model::ModelParams params;
    std::vector<EpochLog> log;
    long steps = 0;
};

// Called after every optimizer step; return false to stop training early.
using StepCallback = std::function<bool(long step, int epoch, double batch_loss)>;

// Full training loop: seeded shuffling, batching (a trailing batch of one
// merges into the previous batch), PAM targets, backprop, Adam with the
// decay schedule. Writes the checkpoint and loss log when paths are given;
// on divergence writes the last epoch-boundary checkpoint and throws.
TrainResult train(const std::vector<PairedSample>& dataset, const TrainConfig& cfg,
                  const std::string& checkpoint_path = "", const std::string& log_path = "",
                  const StepCallback& callback = {});

// Seeded synthetic poses with a fixed linear keypoints->amplitudes map, so
// the CSI->pose relation is learnable by construction. Amplitudes are f32
// values, making container round trips exact.
std::vector<PairedSample> synth_dataset(std::uint64_t seed, int n);

// Expand paired windows into a raw 100 Hz CSI stream plus 20 Hz annotations
// whose pair_frames output reproduces the dataset exactly.
struct SynthCapture {
    std::vector<CsiSample> csi;
    std::vector<FrameAnnotation> frames;
};
SynthCapture synth_capture(const std::vector<PairedSample>& dataset);

}  // namespace wisppn::train
