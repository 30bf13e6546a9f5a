#pragma once

// Score-model contract plus two backends:
//  - AnalyticGaussianScore: closed-form score of N(mu, tau^2 I) data under
//    VE noising, used as a verification oracle throughout the tests.
//  - NeuralScore: a small 4-layer convolutional network with its own
//    reverse-mode derivative pass (needed because DPS differentiates the
//    data-fidelity term through the Tweedie estimate, hence through the
//    network).
// Plus the DSM training loop and the TPDMCKPT1 checkpoint format.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tpdm/sde.hpp"
#include "tpdm/volume.hpp"

namespace tpdm {

class ScoreModel {
  public:
    virtual ~ScoreModel() = default;

    virtual const NoiseSchedule& schedule() const = 0;

    // Score estimate at noise time t; output shape equals input shape.
    virtual Slice2D eval(const Slice2D& x, double t) const = 0;

    // (d eval / d x)^T v — reverse-mode product with the input Jacobian.
    virtual Slice2D vjp(const Slice2D& x, double t,
                        const Slice2D& v) const = 0;
};

// Exact score of x_t = x_0 + sigma(t) z with x_0 ~ N(mu, tau^2 I):
//   score(x, t) = -(x - mu) / (tau^2 + sigma(t)^2).
class AnalyticGaussianScore final : public ScoreModel {
  public:
    AnalyticGaussianScore(double mu, double tau, NoiseSchedule sched);
    AnalyticGaussianScore(Slice2D mu, double tau, NoiseSchedule sched);

    const NoiseSchedule& schedule() const override { return sched_; }
    Slice2D eval(const Slice2D& x, double t) const override;
    Slice2D vjp(const Slice2D& x, double t, const Slice2D& v) const override;

    double tau() const { return tau_; }
    double mu_scalar() const { return mu_; }

  private:
    double mu_at(int r, int c) const;
    double mu_ = 0.0;
    std::optional<Slice2D> mu_slice_;
    double tau_;
    NoiseSchedule sched_;
};

// Free-function form of the analytic score (scalar mean).
Slice2D analytic_score(const Slice2D& x, double t, double mu, double tau,
                       const NoiseSchedule& sched);

// 4 convolution layers (channels 2 -> C -> C -> C -> 1, 3x3 kernels,
// zero padding, SiLU between layers).  Input channel 0 is the slice
// scaled by 1/sqrt(1 + sigma^2) (keeps activations O(1) across the whole
// variance-exploding range); channel 1 is a constant time embedding
// log(sigma)/log(sigma_max).  The raw output is scaled by 1/sigma so the
// model predicts scores whose magnitude ~ 1/sigma, matching the DSM
// target -z/sigma.  The final layer is zero-initialized: an untrained
// model evaluates to exactly zero.
class NeuralScore final : public ScoreModel {
  public:
    static constexpr int kKernel = 3;

    NeuralScore(NoiseSchedule sched, std::uint64_t init_seed,
                int hidden_channels = 32);

    const NoiseSchedule& schedule() const override { return sched_; }
    Slice2D eval(const Slice2D& x, double t) const override;
    Slice2D vjp(const Slice2D& x, double t, const Slice2D& v) const override;

    int hidden_channels() const { return channels_; }
    std::size_t param_count() const { return params_.size(); }

    // Flat parameter vector in checkpoint order:
    // W1,b1,W2,b2,W3,b3,W4,b4 with W indexed [out_c][in_c][ky][kx].
    const std::vector<double>& params() const { return params_; }
    void set_params(std::vector<double> p);

    // Scratch activations for one forward pass; reusable across calls.
    struct Tape {
        int h = 0, w = 0;
        double sigma = 0.0;
        std::vector<double> h0, a1, h1, a2, h2, a3, h3, raw;
    };

    // Forward pass capturing activations; tape.raw holds the unscaled
    // network output (eval = raw / sigma).
    void forward(const Slice2D& x, double t, Tape& tape) const;

    // Reverse pass from a cotangent on the raw output.  When param_grad
    // is non-null, gradients are accumulated into it (same layout as
    // params()).  When input_grad is non-null, it receives the cotangent
    // pulled back to the (unscaled) input slice x.
    void backward(const Tape& tape, const std::vector<double>& cot_raw,
                  std::vector<double>* param_grad,
                  Slice2D* input_grad) const;

  private:
    NoiseSchedule sched_;
    int channels_;
    std::vector<double> params_;
    // Offsets of each layer's weights / biases inside params_.
    struct LayerSpec {
        int in_c, out_c;
        std::size_t w_off, b_off;
    };
    LayerSpec layers_[4];
    double time_embed(double sigma) const;
};

// Batched DSM objective (the public contract; training uses an
// algebraically identical internal form):
//   mean_b sigma(t_b)^2 * || eval(x0_b + sigma z_b, t_b) + z_b/sigma ||^2.
double dsm_loss(const ScoreModel& model, const std::vector<Slice2D>& x0_batch,
                const std::vector<double>& t_batch,
                const std::vector<Slice2D>& z_batch,
                const NoiseSchedule& sched);

// All Axis3 slices of all volumes (primary family) and all Axis1 slices
// (auxiliary family), in volume order then slice order.
std::pair<std::vector<Slice2D>, std::vector<Slice2D>>
build_slice_datasets(const std::vector<Volume3D>& volumes);

// Free-function form of the reverse-mode product (spec operation).
Slice2D score_vjp(const ScoreModel& model, const Slice2D& x, double t,
                  const Slice2D& v);

struct TrainConfig {
    int batch_size = 8;
    int iterations = 0;
    double lr = 2e-4;
    std::uint64_t seed = 0;
    int start_iteration = 0; // nonzero when resuming from a checkpoint
    // Observer called after every step with (global iteration, loss);
    // has no effect on the training trajectory.
    std::function<void(int, double)> on_iteration;
};

struct TrainResult {
    std::vector<double> loss_trace; // one entry per iteration
    int end_iteration = 0;
};

// Adam (beta1=0.9, beta2=0.999, eps=1e-8) on the DSM objective with
// t ~ U[1e-5, 1].  Deterministic given cfg.seed, for any thread count.
// Optimizer moments are not checkpointed; resuming restarts them.
TrainResult train(NeuralScore& model, const std::vector<Slice2D>& dataset,
                  const TrainConfig& cfg);

// Training metadata carried in the TPDMCKPT1 header.
struct CheckpointMeta {
    int iterations = 0;
    int batch_size = 0;
    double lr = 0.0;
    std::uint64_t seed = 0;
    double final_loss = 0.0;
    std::int64_t dataset_slices = 0;
};

void save_checkpoint(const NeuralScore& model, const CheckpointMeta& meta,
                     const std::filesystem::path& path);
std::pair<NeuralScore, CheckpointMeta>
load_checkpoint(const std::filesystem::path& path);

// CSV export, header "iteration,loss", iteration numbering continuing
// from start_iteration.
void save_loss_csv(const std::vector<double>& trace, int start_iteration,
                   const std::filesystem::path& path);

} // namespace tpdm
