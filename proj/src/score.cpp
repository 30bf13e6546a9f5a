#include "tpdm/score.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <stdexcept>

#include "json.hpp"

#include "tpdm/errors.hpp"
#include "tpdm/rng.hpp"
#include "tpdm/thread_pool.hpp"

namespace tpdm {

namespace {

// ---- 3x3 convolution kernels on channel-major buffers ----------------

// out(y, x) += wv * in(y + dy, x + dx) over the intersection of valid
// coordinates (zero padding everywhere else).
inline void shifted_axpy(double* out, const double* in, double wv, int h,
                         int w, int dy, int dx) {
    const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
    const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
    for (int y = y0; y < y1; ++y) {
        double* orow = out + static_cast<std::size_t>(y) * w;
        const double* irow = in + static_cast<std::size_t>(y + dy) * w;
        for (int x = x0; x < x1; ++x)
            orow[x] += wv * irow[x + dx];
    }
}

// sum over valid (y, x) of a(y, x) * b(y + dy, x + dx).
inline double shifted_dot(const double* a, const double* b, int h, int w,
                          int dy, int dx) {
    const int y0 = std::max(0, -dy), y1 = std::min(h, h - dy);
    const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
    double acc = 0.0;
    for (int y = y0; y < y1; ++y) {
        const double* arow = a + static_cast<std::size_t>(y) * w;
        const double* brow = b + static_cast<std::size_t>(y + dy) * w;
        for (int x = x0; x < x1; ++x)
            acc += arow[x] * brow[x + dx];
    }
    return acc;
}

inline double silu(double v) { return v / (1.0 + std::exp(-v)); }

inline double silu_grad(double v) {
    const double s = 1.0 / (1.0 + std::exp(-v));
    return s * (1.0 + v * (1.0 - s));
}

} // namespace

// ---- AnalyticGaussianScore -------------------------------------------

AnalyticGaussianScore::AnalyticGaussianScore(double mu, double tau,
                                             NoiseSchedule sched)
    : mu_(mu), tau_(tau), sched_(sched) {
    if (!(tau > 0.0))
        throw config_error("analytic score requires tau > 0");
}

AnalyticGaussianScore::AnalyticGaussianScore(Slice2D mu, double tau,
                                             NoiseSchedule sched)
    : mu_slice_(std::move(mu)), tau_(tau), sched_(sched) {
    if (!(tau > 0.0))
        throw config_error("analytic score requires tau > 0");
}

double AnalyticGaussianScore::mu_at(int r, int c) const {
    return mu_slice_ ? mu_slice_->at(r, c) : mu_;
}

Slice2D AnalyticGaussianScore::eval(const Slice2D& x, double t) const {
    if (mu_slice_ && (mu_slice_->h != x.h || mu_slice_->w != x.w))
        throw dim_error("analytic score: mu slice shape mismatch");
    const double s = sched_.sigma(t);
    const double inv = 1.0 / (tau_ * tau_ + s * s);
    Slice2D out(x.h, x.w);
    for (int r = 0; r < x.h; ++r)
        for (int c = 0; c < x.w; ++c)
            out.at(r, c) = -(x.at(r, c) - mu_at(r, c)) * inv;
    return out;
}

Slice2D AnalyticGaussianScore::vjp(const Slice2D& x, double t,
                                   const Slice2D& v) const {
    if (v.h != x.h || v.w != x.w)
        throw dim_error("analytic score vjp: cotangent shape mismatch");
    const double s = sched_.sigma(t);
    const double inv = 1.0 / (tau_ * tau_ + s * s);
    Slice2D out(x.h, x.w);
    for (std::size_t i = 0; i < v.size(); ++i)
        out.data[i] = -v.data[i] * inv;
    return out;
}

Slice2D analytic_score(const Slice2D& x, double t, double mu, double tau,
                       const NoiseSchedule& sched) {
    return AnalyticGaussianScore(mu, tau, sched).eval(x, t);
}

// ---- NeuralScore ------------------------------------------------------

NeuralScore::NeuralScore(NoiseSchedule sched, std::uint64_t init_seed,
                         int hidden_channels)
    : sched_(sched), channels_(hidden_channels) {
    if (hidden_channels < 1)
        throw config_error("hidden_channels must be >= 1");
    if (std::log(sched_.sigma_max) == 0.0)
        throw config_error("time embedding requires sigma_max != 1");

    const int C = channels_;
    const int in_cs[4] = {2, C, C, C};
    const int out_cs[4] = {C, C, C, 1};
    std::size_t off = 0;
    for (int l = 0; l < 4; ++l) {
        layers_[l].in_c = in_cs[l];
        layers_[l].out_c = out_cs[l];
        layers_[l].w_off = off;
        off += static_cast<std::size_t>(out_cs[l]) * in_cs[l] * kKernel *
               kKernel;
        layers_[l].b_off = off;
        off += static_cast<std::size_t>(out_cs[l]);
    }
    params_.assign(off, 0.0);

    // He-style init for the hidden layers; the final layer stays zero so
    // an untrained model is exactly the zero score.
    for (int l = 0; l < 3; ++l) {
        const LayerSpec& L = layers_[l];
        const std::size_t n_w =
            static_cast<std::size_t>(L.out_c) * L.in_c * kKernel * kKernel;
        const double std_dev = std::sqrt(2.0 / (L.in_c * kKernel * kKernel));
        for (std::size_t i = 0; i < n_w; ++i)
            params_[L.w_off + i] =
                std_dev * rng_gaussian(init_seed, RngDomain::ParamInit,
                                       static_cast<std::uint64_t>(l), 0, i);
    }
}

void NeuralScore::set_params(std::vector<double> p) {
    if (p.size() != params_.size())
        throw dim_error("parameter vector length mismatch: got " +
                        std::to_string(p.size()) + ", expected " +
                        std::to_string(params_.size()));
    params_ = std::move(p);
}

double NeuralScore::time_embed(double sigma) const {
    return std::log(sigma) / std::log(sched_.sigma_max);
}

void NeuralScore::forward(const Slice2D& x, double t, Tape& tape) const {
    const int h = x.h, w = x.w;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const int C = channels_;
    const double sigma = sched_.sigma(t);
    tape.h = h;
    tape.w = w;
    tape.sigma = sigma;
    tape.h0.assign(2 * plane, 0.0);
    tape.a1.assign(static_cast<std::size_t>(C) * plane, 0.0);
    tape.h1.assign(static_cast<std::size_t>(C) * plane, 0.0);
    tape.a2.assign(static_cast<std::size_t>(C) * plane, 0.0);
    tape.h2.assign(static_cast<std::size_t>(C) * plane, 0.0);
    tape.a3.assign(static_cast<std::size_t>(C) * plane, 0.0);
    tape.h3.assign(static_cast<std::size_t>(C) * plane, 0.0);
    tape.raw.assign(plane, 0.0);

    const double in_scale = 1.0 / std::sqrt(1.0 + sigma * sigma);
    const double embed = time_embed(sigma);
    for (std::size_t i = 0; i < plane; ++i) {
        tape.h0[i] = x.data[i] * in_scale;
        tape.h0[plane + i] = embed;
    }

    auto conv = [&](const LayerSpec& L, const std::vector<double>& in,
                    std::vector<double>& out) {
        for (int oc = 0; oc < L.out_c; ++oc) {
            double* out_ch = out.data() + static_cast<std::size_t>(oc) * plane;
            std::fill(out_ch, out_ch + plane, params_[L.b_off + oc]);
            for (int ic = 0; ic < L.in_c; ++ic) {
                const double* in_ch =
                    in.data() + static_cast<std::size_t>(ic) * plane;
                const double* wk =
                    params_.data() + L.w_off +
                    (static_cast<std::size_t>(oc) * L.in_c + ic) * kKernel *
                        kKernel;
                for (int ky = 0; ky < kKernel; ++ky)
                    for (int kx = 0; kx < kKernel; ++kx)
                        shifted_axpy(out_ch, in_ch, wk[ky * kKernel + kx], h,
                                     w, ky - 1, kx - 1);
            }
        }
    };
    auto activate = [&](const std::vector<double>& a, std::vector<double>& o) {
        for (std::size_t i = 0; i < a.size(); ++i)
            o[i] = silu(a[i]);
    };

    conv(layers_[0], tape.h0, tape.a1);
    activate(tape.a1, tape.h1);
    conv(layers_[1], tape.h1, tape.a2);
    activate(tape.a2, tape.h2);
    conv(layers_[2], tape.h2, tape.a3);
    activate(tape.a3, tape.h3);
    conv(layers_[3], tape.h3, tape.raw);
}

void NeuralScore::backward(const Tape& tape,
                           const std::vector<double>& cot_raw,
                           std::vector<double>* param_grad,
                           Slice2D* input_grad) const {
    const int h = tape.h, w = tape.w;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const int C = channels_;
    if (cot_raw.size() != plane)
        throw dim_error("backward: cotangent size mismatch");
    if (param_grad && param_grad->size() != params_.size())
        throw dim_error("backward: param_grad size mismatch");

    // Pull a cotangent through one convolution: accumulates the input
    // cotangent (transposed convolution) and, if requested, the weight
    // and bias gradients.
    auto conv_backward = [&](const LayerSpec& L, const std::vector<double>& in,
                             const std::vector<double>& cot,
                             std::vector<double>& cot_in) {
        cot_in.assign(static_cast<std::size_t>(L.in_c) * plane, 0.0);
        for (int oc = 0; oc < L.out_c; ++oc) {
            const double* cot_ch =
                cot.data() + static_cast<std::size_t>(oc) * plane;
            for (int ic = 0; ic < L.in_c; ++ic) {
                double* ci = cot_in.data() + static_cast<std::size_t>(ic) * plane;
                const double* in_ch =
                    in.data() + static_cast<std::size_t>(ic) * plane;
                const std::size_t wbase =
                    L.w_off +
                    (static_cast<std::size_t>(oc) * L.in_c + ic) * kKernel *
                        kKernel;
                for (int ky = 0; ky < kKernel; ++ky)
                    for (int kx = 0; kx < kKernel; ++kx) {
                        shifted_axpy(ci, cot_ch, params_[wbase + ky * kKernel + kx],
                                     h, w, -(ky - 1), -(kx - 1));
                        if (param_grad)
                            (*param_grad)[wbase + ky * kKernel + kx] +=
                                shifted_dot(cot_ch, in_ch, h, w, ky - 1,
                                            kx - 1);
                    }
            }
            if (param_grad) {
                double bsum = 0.0;
                for (std::size_t i = 0; i < plane; ++i)
                    bsum += cot_ch[i];
                (*param_grad)[L.b_off + oc] += bsum;
            }
        }
    };
    auto through_silu = [&](const std::vector<double>& a,
                            std::vector<double>& cot) {
        for (std::size_t i = 0; i < cot.size(); ++i)
            cot[i] *= silu_grad(a[i]);
    };

    std::vector<double> g3, g2, g1, g0;
    conv_backward(layers_[3], tape.h3, cot_raw, g3);
    through_silu(tape.a3, g3);
    conv_backward(layers_[2], tape.h2, g3, g2);
    through_silu(tape.a2, g2);
    conv_backward(layers_[1], tape.h1, g2, g1);
    through_silu(tape.a1, g1);
    conv_backward(layers_[0], tape.h0, g1, g0);

    if (input_grad) {
        // Channel 1 of h0 is the constant time embedding; only channel 0
        // depends on x, via the 1/sqrt(1+sigma^2) input scaling.
        const double in_scale = 1.0 / std::sqrt(1.0 + tape.sigma * tape.sigma);
        *input_grad = Slice2D(h, w);
        for (std::size_t i = 0; i < plane; ++i)
            input_grad->data[i] = g0[i] * in_scale;
    }
    (void)C;
}

Slice2D NeuralScore::eval(const Slice2D& x, double t) const {
    Tape tape;
    forward(x, t, tape);
    Slice2D out(x.h, x.w);
    const double inv_sigma = 1.0 / tape.sigma;
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data[i] = tape.raw[i] * inv_sigma;
    return out;
}

Slice2D NeuralScore::vjp(const Slice2D& x, double t, const Slice2D& v) const {
    if (v.h != x.h || v.w != x.w)
        throw dim_error("neural vjp: cotangent shape mismatch");
    Tape tape;
    forward(x, t, tape);
    // eval = raw / sigma, so the cotangent on raw is v / sigma.
    std::vector<double> cot_raw(v.size());
    const double inv_sigma = 1.0 / tape.sigma;
    for (std::size_t i = 0; i < v.size(); ++i)
        cot_raw[i] = v.data[i] * inv_sigma;
    Slice2D grad;
    backward(tape, cot_raw, nullptr, &grad);
    return grad;
}

// ---- DSM loss, datasets, training ------------------------------------

double dsm_loss(const ScoreModel& model, const std::vector<Slice2D>& x0_batch,
                const std::vector<double>& t_batch,
                const std::vector<Slice2D>& z_batch,
                const NoiseSchedule& sched) {
    if (x0_batch.size() != t_batch.size() ||
        x0_batch.size() != z_batch.size())
        throw dim_error("dsm_loss: batch arrays must be congruent");
    if (x0_batch.empty())
        throw dim_error("dsm_loss: empty batch");
    double total = 0.0;
    for (std::size_t b = 0; b < x0_batch.size(); ++b) {
        const double sigma = sched.sigma(t_batch[b]);
        const Slice2D x_t = perturb(x0_batch[b], t_batch[b], z_batch[b], sched);
        const Slice2D s = model.eval(x_t, t_batch[b]);
        double sq = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            const double d = s.data[i] + z_batch[b].data[i] / sigma;
            sq += d * d;
        }
        total += sigma * sigma * sq;
    }
    return total / static_cast<double>(x0_batch.size());
}

std::pair<std::vector<Slice2D>, std::vector<Slice2D>>
build_slice_datasets(const std::vector<Volume3D>& volumes) {
    if (volumes.empty())
        throw dim_error("build_slice_datasets: no volumes");
    const auto shape = volumes.front().shape();
    for (const auto& v : volumes)
        if (v.shape() != shape)
            throw dim_error("build_slice_datasets: volumes must share shape");
    std::vector<Slice2D> primary, auxiliary;
    primary.reserve(volumes.size() * shape[2]);
    auxiliary.reserve(volumes.size() * shape[0]);
    for (const auto& v : volumes) {
        for (int j = 0; j < v.d3; ++j)
            primary.push_back(slice_extract(v, SliceAxis::Axis3, j));
        for (int j = 0; j < v.d1; ++j)
            auxiliary.push_back(slice_extract(v, SliceAxis::Axis1, j));
    }
    return {std::move(primary), std::move(auxiliary)};
}

Slice2D score_vjp(const ScoreModel& model, const Slice2D& x, double t,
                  const Slice2D& v) {
    return model.vjp(x, t, v);
}

TrainResult train(NeuralScore& model, const std::vector<Slice2D>& dataset,
                  const TrainConfig& cfg) {
    if (dataset.empty())
        throw dim_error("train: empty dataset");
    const int h = dataset.front().h, w = dataset.front().w;
    for (const auto& s : dataset)
        if (s.h != h || s.w != w)
            throw dim_error("train: dataset slices must share one shape");
    if (cfg.batch_size < 1 || cfg.iterations < 0 || !(cfg.lr > 0.0))
        throw config_error("train: batch_size >= 1, iterations >= 0, lr > 0");

    const NoiseSchedule& sched = model.schedule();
    const int B = cfg.batch_size;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const std::size_t P = model.param_count();
    constexpr double kTMin = 1e-5;
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;

    std::vector<NeuralScore::Tape> tapes(B);
    std::vector<std::vector<double>> grads(B,
                                           std::vector<double>(P, 0.0));
    std::vector<double> losses(B, 0.0);
    std::vector<double> m(P, 0.0), v(P, 0.0), grad(P, 0.0);
    TrainResult result;
    result.loss_trace.reserve(cfg.iterations);

    for (int step = 0; step < cfg.iterations; ++step) {
        const std::uint64_t it =
            static_cast<std::uint64_t>(cfg.start_iteration + step);

        ThreadPool::global().parallel_for(B, [&](std::int64_t k0,
                                                 std::int64_t k1) {
            Slice2D x_t(h, w), z(h, w);
            std::vector<double> cot(plane);
            for (std::int64_t k = k0; k < k1; ++k) {
                const std::uint64_t uk = static_cast<std::uint64_t>(k);
                const double u =
                    rng_uniform(cfg.seed, RngDomain::TrainBatch, it, uk, 0);
                const std::size_t idx = std::min(
                    dataset.size() - 1,
                    static_cast<std::size_t>(u * static_cast<double>(
                                                     dataset.size())));
                const double t =
                    kTMin +
                    (1.0 - kTMin) *
                        rng_uniform(cfg.seed, RngDomain::TrainTime, it, uk, 0);
                const double sigma = sched.sigma(t);
                rng_gaussian_fill(z.data, cfg.seed, RngDomain::TrainNoise, it,
                                  uk);
                const Slice2D& x0 = dataset[idx];
                for (std::size_t i = 0; i < plane; ++i)
                    x_t.data[i] = x0.data[i] + sigma * z.data[i];

                model.forward(x_t, t, tapes[k]);
                // loss_k = |raw + z|^2  ==  sigma^2 |eval + z/sigma|^2.
                double loss_k = 0.0;
                for (std::size_t i = 0; i < plane; ++i) {
                    const double d = tapes[k].raw[i] + z.data[i];
                    loss_k += d * d;
                    cot[i] = 2.0 * d / static_cast<double>(B);
                }
                losses[k] = loss_k;
                std::fill(grads[k].begin(), grads[k].end(), 0.0);
                model.backward(tapes[k], cot, &grads[k], nullptr);
            }
        });

        // Fixed-order reduction keeps the trajectory thread-count
        // independent.
        std::fill(grad.begin(), grad.end(), 0.0);
        double loss = 0.0;
        for (int k = 0; k < B; ++k) {
            loss += losses[k];
            for (std::size_t i = 0; i < P; ++i)
                grad[i] += grads[k][i];
        }
        loss /= static_cast<double>(B);

        const double t_adam = static_cast<double>(step + 1);
        const double bc1 = 1.0 - std::pow(kBeta1, t_adam);
        const double bc2 = 1.0 - std::pow(kBeta2, t_adam);
        std::vector<double> p = model.params();
        for (std::size_t i = 0; i < P; ++i) {
            m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * grad[i];
            v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * grad[i] * grad[i];
            p[i] -= cfg.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + kEps);
        }
        model.set_params(std::move(p));
        result.loss_trace.push_back(loss);
        if (cfg.on_iteration)
            cfg.on_iteration(cfg.start_iteration + step + 1, loss);
    }
    result.end_iteration = cfg.start_iteration + cfg.iterations;
    return result;
}

// ---- Checkpoint and loss-trace I/O -----------------------------------

namespace {
constexpr char kCkptMagic[] = "TPDMCKPT1"; // 9 bytes on disk
constexpr std::size_t kCkptMagicLen = 9;
} // namespace

void save_checkpoint(const NeuralScore& model, const CheckpointMeta& meta,
                     const std::filesystem::path& path) {
    const nlohmann::json header = {
        {"arch",
         {{"in_channels", 2},
          {"hidden_channels", model.hidden_channels()},
          {"layers", 4},
          {"kernel", NeuralScore::kKernel},
          {"activation", "silu"},
          {"time_channel", "log_sigma_over_log_sigma_max"},
          {"input_scale", "inv_sqrt_1_plus_sigma_sq"},
          {"output_scale", "inv_sigma"}}},
        {"schedule",
         {{"sigma_min", model.schedule().sigma_min},
          {"sigma_max", model.schedule().sigma_max},
          {"N", model.schedule().N}}},
        {"train",
         {{"iterations", meta.iterations},
          {"batch_size", meta.batch_size},
          {"lr", meta.lr},
          {"seed", meta.seed},
          {"final_loss", meta.final_loss},
          {"dataset_slices", meta.dataset_slices}}},
        {"param_count", model.param_count()},
        {"param_order", "W1,b1,W2,b2,W3,b3,W4,b4; W[out_c][in_c][ky][kx]"},
        {"dtype", "f32"}};

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw io_error("cannot open for writing: " + path.string());
    const std::string text = header.dump();
    const std::uint32_t len = static_cast<std::uint32_t>(text.size());
    out.write(kCkptMagic, kCkptMagicLen);
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    std::vector<float> buf(model.param_count());
    for (std::size_t i = 0; i < buf.size(); ++i)
        buf[i] = static_cast<float>(model.params()[i]);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!out)
        throw io_error("short write: " + path.string());
}

std::pair<NeuralScore, CheckpointMeta>
load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw io_error("cannot open for reading: " + path.string());
    char magic[kCkptMagicLen];
    in.read(magic, kCkptMagicLen);
    if (!in || std::memcmp(magic, kCkptMagic, kCkptMagicLen) != 0)
        throw corrupt_file_error(path.string() + ": not a TPDMCKPT1 file");
    std::uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (!in || len == 0 || len > (1u << 20))
        throw corrupt_file_error(path.string() + ": implausible header length");
    std::string text(len, '\0');
    in.read(text.data(), len);
    if (!in)
        throw corrupt_file_error(path.string() + ": truncated header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw corrupt_file_error(path.string() + ": bad header JSON (" +
                                 e.what() + ")");
    }
    try {
        const auto& arch = header.at("arch");
        if (arch.at("layers").get<int>() != 4 ||
            arch.at("kernel").get<int>() != NeuralScore::kKernel ||
            arch.at("activation").get<std::string>() != "silu")
            throw corrupt_file_error(path.string() +
                                     ": unsupported architecture");
        const auto& js = header.at("schedule");
        NoiseSchedule sched(js.at("sigma_min").get<double>(),
                            js.at("sigma_max").get<double>(),
                            js.at("N").get<int>());
        NeuralScore model(sched, 0, arch.at("hidden_channels").get<int>());
        const std::size_t count = header.at("param_count").get<std::size_t>();
        if (count != model.param_count())
            throw corrupt_file_error(path.string() +
                                     ": param_count does not match arch");
        std::vector<float> buf(count);
        in.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(count * sizeof(float)));
        if (static_cast<std::size_t>(in.gcount()) != count * sizeof(float))
            throw corrupt_file_error(path.string() + ": truncated payload");
        in.peek();
        if (!in.eof())
            throw corrupt_file_error(path.string() +
                                     ": trailing bytes after payload");
        std::vector<double> p(count);
        for (std::size_t i = 0; i < count; ++i)
            p[i] = static_cast<double>(buf[i]);
        model.set_params(std::move(p));

        CheckpointMeta meta;
        const auto& jt = header.at("train");
        meta.iterations = jt.at("iterations").get<int>();
        meta.batch_size = jt.at("batch_size").get<int>();
        meta.lr = jt.at("lr").get<double>();
        meta.seed = jt.at("seed").get<std::uint64_t>();
        meta.final_loss = jt.at("final_loss").get<double>();
        meta.dataset_slices = jt.at("dataset_slices").get<std::int64_t>();
        return {std::move(model), meta};
    } catch (const nlohmann::json::exception& e) {
        throw corrupt_file_error(path.string() + ": malformed header (" +
                                 e.what() + ")");
    }
}

void save_loss_csv(const std::vector<double>& trace, int start_iteration,
                   const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw io_error("cannot open for writing: " + path.string());
    out << "iteration,loss\n" << std::setprecision(17);
    for (std::size_t i = 0; i < trace.size(); ++i)
        out << start_iteration + static_cast<int>(i) << "," << trace[i]
            << "\n";
    if (!out)
        throw io_error("short write: " + path.string());
}

} // namespace tpdm
