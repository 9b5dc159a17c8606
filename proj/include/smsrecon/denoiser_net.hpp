#ifndef SMSRECON_DENOISER_NET_HPP
#define SMSRECON_DENOISER_NET_HPP

// Trainable denoiser for the k-space diffusion process.
//
// The denoiser acts on the coil-combined image of a perturbed multicoil
// k-space: u = combine(ifft2c(z_t)). A small convolutional residual network
// over (Re u, Im u, t) channels predicts the clean image, which is re-expanded
// through the coil maps to k-space. Keeping the network in the combined-image
// domain makes its output coil-consistent by construction.
//
// Training minimizes, over items and noise levels,
//
//   L = || combine(ifft2c(A_t (.) (h(z_t, t) - z0))) ||^2
//
// i.e. the attenuation-weighted residual between the predicted and true clean
// k-space, measured after coil combination. The linear map
// B = combine o ifft2c o (A_t (.)) o fft2c o expand is self-adjoint (combine
// and expand are mutual adjoints, the FFTs are unitary, A_t is real
// diagonal), so the parameter gradient needs only one extra pass through B.

#include <cmath>
#include <cstddef>
#include <memory>
#include <utility>
#include <vector>

#include "smsrecon/coils.hpp"
#include "smsrecon/errors.hpp"
#include "smsrecon/fft.hpp"
#include "smsrecon/rng.hpp"
#include "smsrecon/schedule.hpp"
#include "smsrecon/score_model.hpp"
#include "smsrecon/tensor.hpp"

namespace smsrecon {

/// A differentiable parameterized image denoiser: forward caches whatever the
/// following backward needs; backward accumulates parameter gradients for the
/// most recent forward.
class ParamDenoiser {
  public:
    virtual ~ParamDenoiser() = default;
    virtual ComplexArray forward(const ComplexArray& u, double t) = 0;
    virtual void backward(const ComplexArray& cotangent) = 0;

    std::size_t n_params() const { return params_.size(); }
    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }
    std::vector<double>& grads() { return grads_; }
    void zero_grads() { std::fill(grads_.begin(), grads_.end(), 0.0); }

  protected:
    std::vector<double> params_;
    std::vector<double> grads_;
};

namespace detail {

/// Circular same-size convolution of multichannel planes: out[o] = b[o] +
/// sum_i W[o][i] * in[i], kernel k x k, weights laid out [oc][ic][k][k].
inline void conv_forward(const std::vector<RealArray>& in, std::vector<RealArray>& out,
                         const double* w, const double* b, std::size_t k) {
    const std::size_t ic = in.size(), oc = out.size();
    const std::size_t ny = in[0].dim(0), nx = in[0].dim(1);
    const long h = static_cast<long>(k / 2);
    for (std::size_t o = 0; o < oc; ++o) {
        for (std::size_t p = 0; p < out[o].size(); ++p) out[o][p] = b[o];
        for (std::size_t i = 0; i < ic; ++i)
            for (std::size_t dy = 0; dy < k; ++dy)
                for (std::size_t dx = 0; dx < k; ++dx) {
                    const double wv = w[((o * ic + i) * k + dy) * k + dx];
                    if (wv == 0.0) continue;
                    const long oy = static_cast<long>(dy) - h, ox = static_cast<long>(dx) - h;
                    for (std::size_t r = 0; r < ny; ++r) {
                        const std::size_t rr = wrap_index(static_cast<long>(r) + oy, ny);
                        double* drow = out[o].data() + r * nx;
                        const double* srow = in[i].data() + rr * nx;
                        for (std::size_t c = 0; c < nx; ++c)
                            drow[c] += wv * srow[wrap_index(static_cast<long>(c) + ox, nx)];
                    }
                }
    }
}

/// Backward pass of conv_forward: accumulates weight/bias gradients and
/// (optionally) the gradient with respect to the input planes.
inline void conv_backward(const std::vector<RealArray>& in, const std::vector<RealArray>& gout,
                          const double* w, double* gw, double* gb, std::vector<RealArray>* gin,
                          std::size_t k) {
    const std::size_t ic = in.size(), oc = gout.size();
    const std::size_t ny = in[0].dim(0), nx = in[0].dim(1);
    const long h = static_cast<long>(k / 2);
    for (std::size_t o = 0; o < oc; ++o) {
        double acc = 0.0;
        for (std::size_t p = 0; p < gout[o].size(); ++p) acc += gout[o][p];
        gb[o] += acc;
        for (std::size_t i = 0; i < ic; ++i)
            for (std::size_t dy = 0; dy < k; ++dy)
                for (std::size_t dx = 0; dx < k; ++dx) {
                    const long oy = static_cast<long>(dy) - h, ox = static_cast<long>(dx) - h;
                    double wacc = 0.0;
                    for (std::size_t r = 0; r < ny; ++r) {
                        const std::size_t rr = wrap_index(static_cast<long>(r) + oy, ny);
                        const double* grow = gout[o].data() + r * nx;
                        const double* srow = in[i].data() + rr * nx;
                        for (std::size_t c = 0; c < nx; ++c)
                            wacc += grow[c] * srow[wrap_index(static_cast<long>(c) + ox, nx)];
                    }
                    gw[((o * ic + i) * k + dy) * k + dx] += wacc;
                    if (gin) {
                        const double wv = w[((o * ic + i) * k + dy) * k + dx];
                        if (wv != 0.0)
                            for (std::size_t r = 0; r < ny; ++r) {
                                const std::size_t rr =
                                    wrap_index(static_cast<long>(r) + oy, ny);
                                const double* grow = gout[o].data() + r * nx;
                                double* irow = (*gin)[i].data() + rr * nx;
                                for (std::size_t c = 0; c < nx; ++c)
                                    irow[wrap_index(static_cast<long>(c) + ox, nx)] +=
                                        wv * grow[c];
                            }
                    }
                }
    }
}

} // namespace detail

/// Three-layer convolutional residual denoiser over (Re, Im, t) channels.
class DenoiserNet final : public ParamDenoiser {
  public:
    static constexpr std::size_t kKernel = 3;
    static constexpr std::size_t kHidden = 8;

    explicit DenoiserNet(std::uint64_t init_seed = 0) {
        layer_sizes_ = {{3, kHidden}, {kHidden, kHidden}, {kHidden, 2}};
        std::size_t n = 0;
        for (auto [ic, oc] : layer_sizes_) {
            offsets_.push_back(n);
            n += oc * ic * kKernel * kKernel + oc;
        }
        params_.assign(n, 0.0);
        grads_.assign(n, 0.0);
        Rng rng(mix64(init_seed, 0xD0E5));
        for (std::size_t l = 0; l < layer_sizes_.size(); ++l) {
            auto [ic, oc] = layer_sizes_[l];
            const double bound = std::sqrt(6.0 / static_cast<double>(ic * kKernel * kKernel));
            double* w = params_.data() + offsets_[l];
            for (std::size_t i = 0; i < oc * ic * kKernel * kKernel; ++i)
                w[i] = rng.uniform(-bound, bound);
            // biases (trailing oc entries) start at zero
        }
    }

    ComplexArray forward(const ComplexArray& u, double t) override {
        if (u.ndim() != 2) throw ShapeError("DenoiserNet::forward: expected a 2-D image");
        const std::size_t ny = u.dim(0), nx = u.dim(1);
        input_ = make_planes(3, ny, nx);
        for (std::size_t p = 0; p < u.size(); ++p) {
            input_[0][p] = u[p].real();
            input_[1][p] = u[p].imag();
            input_[2][p] = t;
        }
        pre1_ = make_planes(kHidden, ny, nx);
        detail::conv_forward(input_, pre1_, weights(0), biases(0), kKernel);
        act1_ = relu(pre1_);
        pre2_ = make_planes(kHidden, ny, nx);
        detail::conv_forward(act1_, pre2_, weights(1), biases(1), kKernel);
        act2_ = relu(pre2_);
        out_ = make_planes(2, ny, nx);
        detail::conv_forward(act2_, out_, weights(2), biases(2), kKernel);

        ComplexArray xhat(u.shape());
        for (std::size_t p = 0; p < u.size(); ++p)
            xhat[p] = u[p] + cxd(out_[0][p], out_[1][p]);
        return xhat;
    }

    void backward(const ComplexArray& cotangent) override {
        const std::size_t ny = input_[0].dim(0), nx = input_[0].dim(1);
        std::vector<RealArray> g3 = make_planes(2, ny, nx);
        for (std::size_t p = 0; p < cotangent.size(); ++p) {
            g3[0][p] = cotangent[p].real();
            g3[1][p] = cotangent[p].imag();
        }
        std::vector<RealArray> g2 = make_planes(kHidden, ny, nx);
        detail::conv_backward(act2_, g3, weights(2), grad_weights(2), grad_biases(2), &g2, kKernel);
        relu_backward(pre2_, g2);
        std::vector<RealArray> g1 = make_planes(kHidden, ny, nx);
        detail::conv_backward(act1_, g2, weights(1), grad_weights(1), grad_biases(1), &g1, kKernel);
        relu_backward(pre1_, g1);
        detail::conv_backward(input_, g1, weights(0), grad_weights(0), grad_biases(0), nullptr,
                              kKernel);
    }

    /// Round every parameter to the nearest float32 value so that serialized
    /// (single-precision) weights reload bit-exactly.
    void quantize_to_f32() {
        for (auto& p : params_) p = static_cast<double>(static_cast<float>(p));
    }

    const std::vector<std::pair<std::size_t, std::size_t>>& layer_sizes() const {
        return layer_sizes_;
    }

  private:
    static std::vector<RealArray> make_planes(std::size_t n, std::size_t ny, std::size_t nx) {
        return std::vector<RealArray>(n, RealArray::zeros({ny, nx}));
    }
    static std::vector<RealArray> relu(const std::vector<RealArray>& in) {
        std::vector<RealArray> out = in;
        for (auto& plane : out)
            for (std::size_t p = 0; p < plane.size(); ++p) plane[p] = std::max(0.0, plane[p]);
        return out;
    }
    static void relu_backward(const std::vector<RealArray>& pre, std::vector<RealArray>& g) {
        for (std::size_t i = 0; i < g.size(); ++i)
            for (std::size_t p = 0; p < g[i].size(); ++p)
                if (pre[i][p] <= 0.0) g[i][p] = 0.0;
    }

    std::size_t weight_count(std::size_t l) const {
        auto [ic, oc] = layer_sizes_[l];
        return oc * ic * kKernel * kKernel;
    }
    double* weights(std::size_t l) { return params_.data() + offsets_[l]; }
    const double* weights(std::size_t l) const { return params_.data() + offsets_[l]; }
    double* biases(std::size_t l) { return params_.data() + offsets_[l] + weight_count(l); }
    double* grad_weights(std::size_t l) { return grads_.data() + offsets_[l]; }
    double* grad_biases(std::size_t l) { return grads_.data() + offsets_[l] + weight_count(l); }

    std::vector<std::pair<std::size_t, std::size_t>> layer_sizes_;
    std::vector<std::size_t> offsets_;
    std::vector<RealArray> input_, pre1_, act1_, pre2_, act2_, out_;
};

/// Loss and parameter gradient of the attenuation-weighted residual objective
/// for one item at one noise level, with the perturbation z_t supplied.
inline double score_matching_loss(ParamDenoiser& net, const ComplexArray& z0,
                                  const ComplexArray& z_t, double t,
                                  const DiffusionSchedule& sched, const CoilSensitivities& maps,
                                  bool with_grad = true) {
    const RealArray g = sched.atten_at(t);
    auto B = [&](const ComplexArray& img) {
        return maps.combine(ifft2c(hadamard_last2(fft2c(maps.expand(img)), g)));
    };
    const ComplexArray u = maps.combine(ifft2c(z_t));
    const ComplexArray xhat = net.forward(u, t);
    const ComplexArray v = maps.combine(ifft2c(hadamard_last2(z0, g)));
    const ComplexArray w = sub(B(xhat), v);
    double loss = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) loss += std::norm(w[i]);
    if (with_grad) net.backward(scale(B(w), 2.0));
    return loss;
}

struct TrainConfig {
    std::size_t epochs = 40;
    std::size_t steps_per_epoch = 0; // 0: one pass over the training items
    double lr = 2e-4;
    double momentum = 0.9;
    std::uint64_t seed = 0;
    std::size_t holdout_probes = 8; // fixed (t, noise) pairs for the held-out loss
};

struct TrainReport {
    double initial_holdout_loss = 0.0;
    double final_holdout_loss = 0.0;
    std::vector<double> holdout_history; // per epoch, after updates
    std::size_t steps_run = 0;
};

/// Score model backed by a trained denoiser; score is derived from the
/// denoiser by the Tweedie relation.
class TrainedScoreModel final : public ScoreModel {
  public:
    TrainedScoreModel(std::shared_ptr<DenoiserNet> net, DiffusionSchedule sched)
        : net_(std::move(net)), sched_(std::move(sched)) {}

    ComplexArray denoise(const ComplexArray& z, double t,
                         const CoilSensitivities& maps) const override {
        const ComplexArray u = maps.combine(ifft2c(z));
        const ComplexArray xhat = net_->forward(u, t);
        return fft2c(maps.expand(xhat));
    }

    ComplexArray score(const ComplexArray& z, double t,
                       const CoilSensitivities& maps) const override {
        return score_from_denoise(z, denoise(z, t, maps), t, sched_, maps);
    }

    DenoiserNet& net() { return *net_; }
    const DenoiserNet& net() const { return *net_; }
    const DiffusionSchedule& schedule() const { return sched_; }

  private:
    // The net caches forward activations; reconstruction drives score/denoise
    // sequentially per chain, matching the module's concurrency contract.
    std::shared_ptr<DenoiserNet> net_;
    DiffusionSchedule sched_;
};

namespace detail {

/// Held-out loss averaged over a fixed set of (t, noise) probes.
inline double holdout_loss(ParamDenoiser& net, const ComplexArray& z0,
                           const CoilSensitivities& maps, const DiffusionSchedule& sched,
                           std::size_t probes, std::uint64_t seed) {
    double total = 0.0;
    for (std::size_t j = 0; j < probes; ++j) {
        const double t = (static_cast<double>(j) + 0.5) / static_cast<double>(probes);
        Rng rng(mix64(seed, 0xB00F + j));
        const ComplexArray z_t = forward_perturb(z0, t, sched, maps, &rng);
        total += score_matching_loss(net, z0, z_t, t, sched, maps, /*with_grad=*/false);
    }
    return total / static_cast<double>(probes);
}

} // namespace detail

struct TrainOutcome {
    std::shared_ptr<TrainedScoreModel> model;
    TrainReport report;
};

/// SGD-with-momentum training of the convolutional denoiser on single-slice
/// multicoil k-space items. The last item is held out for loss monitoring when
/// more than one item is given.
inline TrainOutcome train_score(const std::vector<ComplexArray>& dataset,
                                const std::vector<CoilSensitivities>& maps_per_item,
                                const DiffusionSchedule& sched, const TrainConfig& cfg) {
    if (dataset.empty()) throw ArgumentError("train_score: empty dataset");
    if (dataset.size() != maps_per_item.size())
        throw ArgumentError("train_score: dataset and maps counts differ");
    for (const auto& item : dataset) {
        if (item.ndim() != 3) throw ShapeError("train_score: items must be [nc, ny, nx]");
        check_same_shape(item, dataset[0], "train_score");
    }

    auto net = std::make_shared<DenoiserNet>(cfg.seed);
    const std::size_t n_train = dataset.size() > 1 ? dataset.size() - 1 : 1;
    const std::size_t holdout = dataset.size() > 1 ? dataset.size() - 1 : 0;
    const std::size_t steps =
        cfg.steps_per_epoch > 0 ? cfg.steps_per_epoch : n_train;

    TrainOutcome out;
    out.report.initial_holdout_loss = detail::holdout_loss(
        *net, dataset[holdout], maps_per_item[holdout], sched, cfg.holdout_probes, cfg.seed);

    std::vector<double> velocity(net->n_params(), 0.0);
    Rng rng(mix64(cfg.seed, 0x7EA1));
    std::size_t global_step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t s = 0; s < steps; ++s, ++global_step) {
            const std::size_t item = n_train == 1 ? 0 : rng.bits() % n_train;
            const double t = rng.uniform(1e-3, 1.0);
            const ComplexArray z_t =
                forward_perturb(dataset[item], t, sched, maps_per_item[item], &rng);
            net->zero_grads();
            const double loss = score_matching_loss(*net, dataset[item], z_t, t, sched,
                                                    maps_per_item[item]);
            if (!std::isfinite(loss))
                throw TrainingDivergedError("train_score: non-finite loss",
                                            static_cast<long>(global_step));
            auto& g = net->grads();
            auto& p = net->params();
            for (std::size_t i = 0; i < p.size(); ++i) {
                velocity[i] = cfg.momentum * velocity[i] - cfg.lr * g[i];
                p[i] += velocity[i];
            }
        }
        out.report.holdout_history.push_back(detail::holdout_loss(*net, dataset[holdout],
                                                                  maps_per_item[holdout], sched,
                                                                  cfg.holdout_probes, cfg.seed));
    }
    out.report.steps_run = global_step;
    net->quantize_to_f32();
    out.report.final_holdout_loss = detail::holdout_loss(
        *net, dataset[holdout], maps_per_item[holdout], sched, cfg.holdout_probes, cfg.seed);
    out.model = std::make_shared<TrainedScoreModel>(net, sched);
    return out;
}

} // namespace smsrecon

#endif
