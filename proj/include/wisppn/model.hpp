#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "wisppn/autograd.hpp"
#include "wisppn/csi.hpp"
#include "wisppn/pam.hpp"
#include "wisppn/tensor.hpp"

namespace wisppn::model {

inline constexpr int kEncoderSize = 144;
inline constexpr int kFeatureChannels = 300;
inline constexpr int kFeatureSize = 18;
inline constexpr int kDecoderMidChannels = 36;

// Convolution + batch norm pair; geometry is fixed at construction.
struct ConvBn {
    Param w, b, gamma, beta;
    Tensor running_mean, running_var;
    int stride = 1;
    int pad = 0;
};

// Two 3x3 convolutions with a shortcut; the shortcut is a 1x1 projection
// when the unit changes shape, identity otherwise. The closing ReLU runs
// after the shortcut addition.
struct ResidualUnit {
    ConvBn c1, c2;
    std::optional<ConvBn> proj;
};

struct Stage {
    ResidualUnit u1, u2;
};

struct ModelParams {
    Stage s1, s2, s3, s4;
    ConvBn dec1;       // 3x3, 300 -> 36, batch norm + ReLU
    Param dec2_w, dec2_b;  // 1x1, 36 -> 2, linear output
    Tensor input_mean, input_std;  // per-channel standardization, [150]
    double bn_momentum = 0.1;
    double bn_eps = 1e-5;
};

ModelParams init_params(std::uint64_t seed);

// Trainable parameters in a fixed visitation order (Adam state and the
// checkpoint manifest both rely on it).
std::vector<Param*> collect_params(ModelParams& p);

std::size_t parameter_count(ModelParams& p);

// Every named tensor persisted in a checkpoint: parameter values, batch
// norm running stats, input standardization vectors and scalar metadata.
void visit_state(ModelParams& p,
                 const std::function<void(const std::string&, Tensor&)>& fn);

// Bilinear upsample of a window to 150 x 144 x 144. No learned parameters,
// no standardization.
Tensor encoder_forward(const CsiWindow& w);

// Standardize per channel with the stored train-set stats, then upsample.
Tensor encode_input(const CsiWindow& w, const ModelParams& p);

// Batched variant: [N, 150, 144, 144].
Tensor encode_batch(const std::vector<const CsiWindow*>& windows, const ModelParams& p);

struct ShapeTrace {
    std::array<std::vector<int>, 4> stage_out;
    std::vector<int> feature_out;
    std::vector<int> decoder_out;
};

// Four-stage residual stack: [*,150,H,W] -> [*,300,H/8,W/8].
ag::Var extractor(ag::Graph& g, const ag::Var& x, ModelParams& p, bool train,
                  ShapeTrace* trace = nullptr);

// Two convolutions: 3x3 300->36 with BN+ReLU, then linear 1x1 36->2.
ag::Var decoder(ag::Graph& g, const ag::Var& f, ModelParams& p, bool train);

ag::Var network(ag::Graph& g, const ag::Var& encoded, ModelParams& p, bool train,
                ShapeTrace* trace = nullptr);

// Full pipeline on one window. Eval mode is a pure function of
// (window, params).
PPam forward(const CsiWindow& w, ModelParams& p, bool train = false,
             ShapeTrace* trace = nullptr);

// Checkpoint container: magic "WSPN", version 0x01, manifest of
// (name, shape, byte offset), then raw f64-LE tensor data.
void save_checkpoint(ModelParams& p, const std::string& path);
std::string checkpoint_bytes(ModelParams& p);
ModelParams load_checkpoint(const std::string& path);
ModelParams load_checkpoint_bytes(const std::string& bytes);

}  // namespace wisppn::model
