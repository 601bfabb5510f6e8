#include "wisppn/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "wisppn/common.hpp"
#include "wisppn/kernels.hpp"

namespace wisppn::train {

void TrainConfig::validate() const {
    if (epochs < 0) throw Error("epochs must be >= 0");
    if (initial_lr <= 0.0 || decay_factor <= 0.0 || batch_size < 1)
        throw Error("learning rate, decay factor and batch size must be positive");
    if (beta1 <= 0.0 || beta1 >= 1.0 || beta2 <= 0.0 || beta2 >= 1.0 || adam_eps <= 0.0)
        throw Error("Adam constants out of range");
    // Decay epochs beyond the trained horizon are inert, not invalid; a
    // short run (or the 0-epoch case) keeps the canonical {5, 10, 15}.
    for (int d : decay_epochs)
        if (d < 1) throw Error("decay epoch " + std::to_string(d) + " must be >= 1");
}

AdamState init_adam(const std::vector<Param*>& params) {
    AdamState s;
    for (Param* p : params) {
        s.m.push_back(Tensor::zeros(p->value.shape()));
        s.v.push_back(Tensor::zeros(p->value.shape()));
    }
    return s;
}

ag::Var pam_loss(ag::Graph& g, const ag::Var& pred, const Pam& target) {
    Tensor t = pam_target_tensor(target);
    Tensor w = pam_weight_tensor(target);
    if (pred.value().rank() == 4) {
        if (pred.value().dim(0) != 1)
            throw DimensionError("pam_loss takes a single prediction, got " +
                                 pred.value().shape_str());
        t = t.reshaped({1, 2, kNumKeypoints, kNumKeypoints});
        w = w.reshaped({1, 2, kNumKeypoints, kNumKeypoints});
    }
    return ag::weighted_sse(g, pred, t, w, 1.0);
}

double lr_schedule(int epoch, const TrainConfig& cfg) {
    if (epoch < 1) throw Error("epoch numbers are 1-based");
    double lr = cfg.initial_lr;
    for (int d : cfg.decay_epochs)
        if (d <= epoch) lr *= cfg.decay_factor;
    return lr;
}

void adam_step(const std::vector<Param*>& params, AdamState& state, double lr,
               const TrainConfig& cfg) {
    if (params.size() != state.m.size())
        throw DimensionError("Adam state does not match the parameter list");
    ++state.step;
    for (std::size_t i = 0; i < params.size(); ++i) {
        Param& p = *params[i];
        p.ensure_grad();
        const double* g = p.grad.data();
        for (std::size_t k = 0; k < p.grad.numel(); ++k)
            if (!std::isfinite(g[k]))
                throw DivergenceError("non-finite gradient in parameter " + p.name +
                                      " at element " + std::to_string(k));
        kernels::adam_update(p.value.data(), g, state.m[i].data(), state.v[i].data(),
                             p.value.numel(), lr, cfg.beta1, cfg.beta2, cfg.adam_eps,
                             state.step);
        p.zero_grad();
    }
}

std::string format_loss_log(const std::vector<EpochLog>& log) {
    std::string out;
    for (const EpochLog& e : log) {
        std::ostringstream line;
        line.precision(17);
        line << "{\"epoch\":" << e.epoch << ",\"lr\":" << e.lr << ",\"mean_loss\":"
             << e.mean_loss << ",\"wall_ms\":" << e.wall_ms << "}";
        out += line.str();
        out += '\n';
    }
    return out;
}

namespace {

void fit_standardization(const std::vector<PairedSample>& dataset, model::ModelParams& p) {
    const std::size_t plane = static_cast<std::size_t>(kTxAntennas) * kRxAntennas;
    const double count = static_cast<double>(dataset.size() * plane);
    for (int c = 0; c < kWindowChannels; ++c) {
        double sum = 0.0;
        for (const PairedSample& s : dataset) {
            const double* d = s.window.data.data() + static_cast<std::size_t>(c) * plane;
            for (std::size_t i = 0; i < plane; ++i) sum += d[i];
        }
        const double mu = sum / count;
        double sq = 0.0;
        for (const PairedSample& s : dataset) {
            const double* d = s.window.data.data() + static_cast<std::size_t>(c) * plane;
            for (std::size_t i = 0; i < plane; ++i) sq += (d[i] - mu) * (d[i] - mu);
        }
        double sd = std::sqrt(sq / count);
        if (sd < 1e-12) sd = 1.0;
        p.input_mean[static_cast<std::size_t>(c)] = mu;
        p.input_std[static_cast<std::size_t>(c)] = sd;
    }
}

// Batch index ranges; a trailing batch of one merges into its predecessor.
std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t n,
                                                              std::size_t batch) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t at = 0; at < n; at += batch)
        out.emplace_back(at, std::min(at + batch, n));
    if (out.size() > 1 && out.back().second - out.back().first == 1) {
        out[out.size() - 2].second = out.back().second;
        out.pop_back();
    }
    return out;
}

}  // namespace

TrainResult train(const std::vector<PairedSample>& dataset, const TrainConfig& cfg,
                  const std::string& checkpoint_path, const std::string& log_path,
                  const StepCallback& callback) {
    cfg.validate();
    if (dataset.empty()) throw Error("training dataset is empty");

    TrainResult result;
    result.params = model::init_params(cfg.seed);
    fit_standardization(dataset, result.params);

    std::vector<Pam> targets;
    targets.reserve(dataset.size());
    for (const PairedSample& s : dataset) targets.push_back(encode_pam(s.keypoints));

    std::vector<Param*> params = model::collect_params(result.params);
    AdamState adam = init_adam(params);
    Rng shuffle_rng(cfg.seed ^ 0x5AFF1E0ULL);

    const auto write_outputs = [&](const std::string& ckpt_bytes) {
        if (!checkpoint_path.empty()) write_file(checkpoint_path, ckpt_bytes);
        if (!log_path.empty()) write_file(log_path, format_loss_log(result.log));
    };

    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);

    // Last state that produced only finite losses; written out on divergence.
    std::string last_good = model::checkpoint_bytes(result.params);

    bool stopped = false;
    for (int epoch = 1; epoch <= cfg.epochs && !stopped; ++epoch) {
        const auto epoch_start = std::chrono::steady_clock::now();
        const double lr = lr_schedule(epoch, cfg);
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        for (const auto& [lo, hi] : batch_ranges(dataset.size(),
                                                 static_cast<std::size_t>(cfg.batch_size))) {
            const std::size_t bn = hi - lo;
            std::vector<const CsiWindow*> windows;
            Tensor target({static_cast<int>(bn), 2, kNumKeypoints, kNumKeypoints});
            Tensor weight({static_cast<int>(bn), 2, kNumKeypoints, kNumKeypoints});
            const std::size_t per = 2 * kNumKeypoints * kNumKeypoints;
            for (std::size_t i = 0; i < bn; ++i) {
                const std::size_t idx = order[lo + i];
                windows.push_back(&dataset[idx].window);
                const Tensor t = pam_target_tensor(targets[idx]);
                const Tensor w = pam_weight_tensor(targets[idx]);
                for (std::size_t k = 0; k < per; ++k) {
                    target[i * per + k] = t[k];
                    weight[i * per + k] = w[k];
                }
            }

            double batch_loss;
            {
                ag::Graph g;
                ag::Var x = g.leaf(model::encode_batch(windows, result.params));
                ag::Var out = model::network(g, x, result.params, /*train=*/true);
                ag::Var loss = ag::weighted_sse(g, out, target, weight,
                                                1.0 / static_cast<double>(bn));
                batch_loss = loss.scalar();
                if (!std::isfinite(batch_loss)) {
                    write_outputs(last_good);
                    throw DivergenceError("training diverged at epoch " + std::to_string(epoch) +
                                          ": loss is not finite; last-good checkpoint written");
                }
                g.backward(loss);
            }
            try {
                adam_step(params, adam, lr, cfg);
            } catch (const DivergenceError&) {
                write_outputs(last_good);
                throw;
            }
            ++result.steps;
            loss_sum += batch_loss * static_cast<double>(bn);
            if (callback && !callback(result.steps, epoch, batch_loss)) {
                stopped = true;
                break;
            }
        }

        const auto epoch_end = std::chrono::steady_clock::now();
        EpochLog el;
        el.epoch = epoch;
        el.lr = lr;
        el.mean_loss = loss_sum / static_cast<double>(dataset.size());
        el.wall_ms = static_cast<long>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                           epoch_end - epoch_start)
                                           .count());
        result.log.push_back(el);
        log_line(1, "epoch " + std::to_string(epoch) + " lr " + std::to_string(lr) +
                        " mean_loss " + std::to_string(el.mean_loss));
        last_good = model::checkpoint_bytes(result.params);
    }

    if (!checkpoint_path.empty() || !log_path.empty())
        write_outputs(model::checkpoint_bytes(result.params));
    return result;
}

namespace {

// Canonical standing skeleton, pixel offsets from the body center.
constexpr std::array<std::array<double, 2>, kNumKeypoints> kSkeletonOffsets = {{
    {0, -90},    // nose
    {0, -60},    // neck
    {-25, -55},  // r shoulder
    {-35, -20},  // r elbow
    {-40, 10},   // r wrist
    {25, -55},   // l shoulder
    {35, -20},   // l elbow
    {40, 10},    // l wrist
    {-15, 10},   // r hip
    {-18, 55},   // r knee
    {-20, 95},   // r ankle
    {15, 10},    // l hip
    {18, 55},    // l knee
    {20, 95},    // l ankle
    {-8, -97},   // r eye
    {8, -97},    // l eye
    {-15, -92},  // r ear
    {15, -92},   // l ear
}};

constexpr double kFrameW = 640.0;
constexpr double kFrameH = 480.0;

}  // namespace

std::vector<PairedSample> synth_dataset(std::uint64_t seed, int n) {
    if (n < 1) throw Error("synth_dataset needs n >= 1");
    Rng rng(seed);

    // Fixed linear map from normalized keypoint coordinates (36 values) to
    // the 1350 window amplitudes, drawn once from the same seed.
    const int coord_dim = 2 * kNumKeypoints;
    const std::size_t amp_dim = static_cast<std::size_t>(kWindowChannels) * kTxAntennas * kRxAntennas;
    std::vector<double> map(amp_dim * static_cast<std::size_t>(coord_dim));
    for (auto& v : map) v = rng.normal(0.0, 0.5 / std::sqrt(static_cast<double>(coord_dim)));
    const double offset = 3.0;

    std::vector<PairedSample> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double cx = rng.uniform(200.0, 440.0);
        const double cy = rng.uniform(150.0, 330.0);
        const double scale = rng.uniform(0.7, 1.3);

        PairedSample ps;
        for (int k = 0; k < kNumKeypoints; ++k) {
            double x = cx + scale * kSkeletonOffsets[static_cast<std::size_t>(k)][0] +
                       rng.normal(0.0, 4.0);
            double y = cy + scale * kSkeletonOffsets[static_cast<std::size_t>(k)][1] +
                       rng.normal(0.0, 4.0);
            x = std::clamp(x, 0.0, kFrameW - 1.0);
            y = std::clamp(y, 0.0, kFrameH - 1.0);
            ps.keypoints[k] = {x, y, rng.uniform(0.5, 1.0)};
        }

        std::vector<double> z(static_cast<std::size_t>(coord_dim));
        for (int k = 0; k < kNumKeypoints; ++k) {
            z[static_cast<std::size_t>(2 * k)] = (ps.keypoints[k].x - kFrameW / 2) / (kFrameW / 2);
            z[static_cast<std::size_t>(2 * k + 1)] =
                (ps.keypoints[k].y - kFrameH / 2) / (kFrameH / 2);
        }

        ps.window.frame_timestamp_us = 1000000 + static_cast<std::uint64_t>(i) * 50000;
        ps.window.data = Tensor({kWindowChannels, kTxAntennas, kRxAntennas});
        for (std::size_t a = 0; a < amp_dim; ++a) {
            double v = offset;
            for (int cdx = 0; cdx < coord_dim; ++cdx)
                v += map[a * static_cast<std::size_t>(coord_dim) + cdx] *
                     z[static_cast<std::size_t>(cdx)];
            v += rng.normal(0.0, 0.01);
            if (v < 0.0) v = 0.0;  // amplitudes are non-negative by contract
            ps.window.data[a] = static_cast<double>(static_cast<float>(v));
        }
        out.push_back(std::move(ps));
    }
    return out;
}

SynthCapture synth_capture(const std::vector<PairedSample>& dataset) {
    SynthCapture cap;
    const std::size_t plane = static_cast<std::size_t>(kTxAntennas) * kRxAntennas;
    for (const PairedSample& ps : dataset) {
        const std::uint64_t frame_ts = ps.window.frame_timestamp_us;
        for (int t = 0; t < kSamplesPerWindow; ++t) {
            CsiSample s;
            s.timestamp_us = frame_ts - static_cast<std::uint64_t>(10000 * (kSamplesPerWindow - 1 - t));
            for (int k = 0; k < kSubcarriers; ++k)
                for (int i = 0; i < kTxAntennas; ++i)
                    for (int j = 0; j < kRxAntennas; ++j) {
                        const double amp =
                            ps.window.data[((static_cast<std::size_t>(kSubcarriers) * t + k) *
                                                kTxAntennas +
                                            i) *
                                               kRxAntennas +
                                           j];
                        s.at(k, i, j) = {amp, 0.0};
                    }
            cap.csi.push_back(std::move(s));
        }
        FrameAnnotation fa;
        fa.timestamp_us = frame_ts;
        fa.persons.push_back({ps.keypoints, 1.0});
        cap.frames.push_back(std::move(fa));
    }
    return cap;
}

}  // namespace wisppn::train
