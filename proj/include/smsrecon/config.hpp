#ifndef SMSRECON_CONFIG_HPP
#define SMSRECON_CONFIG_HPP

// Run configuration: a strict-schema JSON document covering simulation,
// calibration, diffusion training, sampling, and metrics settings. Unknown
// keys are rejected so typos cannot silently fall back to defaults. The
// resolved document (all defaults filled in) has a canonical serialization
// whose FNV-1a digest identifies the run in every output directory.

#include <cstdint>
#include <set>
#include <string>
#include <type_traits>

#include <nlohmann/json.hpp>

#include "smsrecon/acquisition.hpp"
#include "smsrecon/denoiser_net.hpp"
#include "smsrecon/errors.hpp"
#include "smsrecon/sms_sampler.hpp"

namespace smsrecon {

struct SimSettings {
    std::size_t ny = 320, nx = 320;
    std::size_t mb = 3, nc = 8;
    double caipi_fraction = 2.0 / 3.0;
    std::size_t accel = 3;
    std::size_t acs_lines = 32;
    double noise_sigma = 0.0;
    std::size_t n_train_slices = 50;

    AcquisitionSpec to_spec(std::uint64_t seed) const {
        AcquisitionSpec s;
        s.mb = mb;
        s.caipi_fraction = caipi_fraction;
        s.accel = accel;
        s.acs_lines = acs_lines;
        s.noise_sigma = noise_sigma;
        s.seed = seed;
        return s;
    }
};

struct CalibSettings {
    std::size_t kh = 5, kw = 5;
    double tikhonov = -1.0; // < 0: scale-invariant default
};

struct TrainSettings {
    std::size_t epochs = 40;
    std::size_t steps_per_epoch = 0; // 0: one update per training item
    double lr = 1e-5;
    double momentum = 0.9;
    std::size_t holdout_probes = 8;

    TrainConfig to_train_config(std::uint64_t seed) const {
        TrainConfig c;
        c.epochs = epochs;
        c.steps_per_epoch = steps_per_epoch;
        c.lr = lr;
        c.momentum = momentum;
        c.seed = seed;
        c.holdout_probes = holdout_probes;
        return c;
    }
};

struct DiffusionSettings {
    std::size_t n_steps = 200;
    double sigma_min = 0.01, sigma_max = 1.0;
    double rho = 0.125;
    TrainSettings train;
};

struct MetricsSettings {
    std::size_t ssim_window = 11;
    double ssim_sigma = 1.5;
    double ssim_k1 = 0.01, ssim_k2 = 0.03;
};

struct RunConfig {
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    SimSettings sim;
    CalibSettings calib;
    DiffusionSettings diffusion;
    SamplerConfig sampler;
    MetricsSettings metrics;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["seed"] = seed;
        j["threads"] = threads;
        j["sim"] = {{"ny", sim.ny},
                    {"nx", sim.nx},
                    {"mb", sim.mb},
                    {"nc", sim.nc},
                    {"caipi_fraction", sim.caipi_fraction},
                    {"accel", sim.accel},
                    {"acs_lines", sim.acs_lines},
                    {"noise_sigma", sim.noise_sigma},
                    {"n_train_slices", sim.n_train_slices}};
        j["calib"] = {{"kh", calib.kh}, {"kw", calib.kw}, {"tikhonov", calib.tikhonov}};
        j["diffusion"] = {{"n_steps", diffusion.n_steps},
                          {"sigma_min", diffusion.sigma_min},
                          {"sigma_max", diffusion.sigma_max},
                          {"rho", diffusion.rho},
                          {"train",
                           {{"epochs", diffusion.train.epochs},
                            {"steps_per_epoch", diffusion.train.steps_per_epoch},
                            {"lr", diffusion.train.lr},
                            {"momentum", diffusion.train.momentum},
                            {"holdout_probes", diffusion.train.holdout_probes}}}};
        j["sampler"] = {{"n_corrector", sampler.n_corrector},
                        {"snr", sampler.snr},
                        {"soft_dc_weight", sampler.soft_dc_weight},
                        {"corrector_first", sampler.corrector_first},
                        {"dc_include_acs", sampler.dc_include_acs},
                        {"dc_enabled", sampler.dc_enabled},
                        {"entry_noise", sampler.entry_noise},
                        {"spirit_kh", sampler.spirit_kh},
                        {"spirit_kw", sampler.spirit_kw},
                        {"spirit_iters", sampler.spirit_iters},
                        {"spirit_tol", sampler.spirit_tol}};
        j["metrics"] = {{"ssim_window", metrics.ssim_window},
                        {"ssim_sigma", metrics.ssim_sigma},
                        {"ssim_k1", metrics.ssim_k1},
                        {"ssim_k2", metrics.ssim_k2}};
        return j;
    }

    std::string canonical() const { return to_json().dump(2) + "\n"; }

    /// FNV-1a 64-bit digest of the canonical serialization.
    std::uint64_t hash() const {
        std::uint64_t h = 1469598103934665603ULL;
        for (unsigned char ch : canonical()) {
            h ^= ch;
            h *= 1099511628211ULL;
        }
        return h;
    }

    std::string hash_hex() const {
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash()));
        return std::string(buf);
    }

    static RunConfig from_json(const nlohmann::json& j);
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                                const std::string& where) {
    if (!j.is_object()) throw ConfigError("config section '" + where + "' must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("unknown config key '" +
                              (where.empty() ? it.key() : where + "." + it.key()) + "'");
}

template <class T>
inline void assign(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    const std::string path = where.empty() ? std::string(key) : where + "." + key;
    if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
        // json would silently wrap a negative integer into an unsigned field.
        if (j.at(key).is_number_integer() && j.at(key).get<long long>() < 0)
            throw ConfigError("config key '" + path + "' must be non-negative");
    }
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("config key '" + path + "' has the wrong type");
    }
}

} // namespace detail

inline RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig c;
    detail::reject_unknown_keys(
        j, {"seed", "threads", "sim", "calib", "diffusion", "sampler", "metrics"}, "");
    detail::assign(j, "seed", c.seed, "");
    detail::assign(j, "threads", c.threads, "");
    if (j.contains("sim")) {
        const auto& js = j.at("sim");
        detail::reject_unknown_keys(js,
                                    {"ny", "nx", "mb", "nc", "caipi_fraction", "accel",
                                     "acs_lines", "noise_sigma", "n_train_slices"},
                                    "sim");
        detail::assign(js, "ny", c.sim.ny, "sim");
        detail::assign(js, "nx", c.sim.nx, "sim");
        detail::assign(js, "mb", c.sim.mb, "sim");
        detail::assign(js, "nc", c.sim.nc, "sim");
        detail::assign(js, "caipi_fraction", c.sim.caipi_fraction, "sim");
        detail::assign(js, "accel", c.sim.accel, "sim");
        detail::assign(js, "acs_lines", c.sim.acs_lines, "sim");
        detail::assign(js, "noise_sigma", c.sim.noise_sigma, "sim");
        detail::assign(js, "n_train_slices", c.sim.n_train_slices, "sim");
    }
    if (j.contains("calib")) {
        const auto& js = j.at("calib");
        detail::reject_unknown_keys(js, {"kh", "kw", "tikhonov"}, "calib");
        detail::assign(js, "kh", c.calib.kh, "calib");
        detail::assign(js, "kw", c.calib.kw, "calib");
        detail::assign(js, "tikhonov", c.calib.tikhonov, "calib");
    }
    if (j.contains("diffusion")) {
        const auto& js = j.at("diffusion");
        detail::reject_unknown_keys(js, {"n_steps", "sigma_min", "sigma_max", "rho", "train"},
                                    "diffusion");
        detail::assign(js, "n_steps", c.diffusion.n_steps, "diffusion");
        detail::assign(js, "sigma_min", c.diffusion.sigma_min, "diffusion");
        detail::assign(js, "sigma_max", c.diffusion.sigma_max, "diffusion");
        detail::assign(js, "rho", c.diffusion.rho, "diffusion");
        if (js.contains("train")) {
            const auto& jt = js.at("train");
            detail::reject_unknown_keys(
                jt, {"epochs", "steps_per_epoch", "lr", "momentum", "holdout_probes"},
                "diffusion.train");
            detail::assign(jt, "epochs", c.diffusion.train.epochs, "diffusion.train");
            detail::assign(jt, "steps_per_epoch", c.diffusion.train.steps_per_epoch,
                           "diffusion.train");
            detail::assign(jt, "lr", c.diffusion.train.lr, "diffusion.train");
            detail::assign(jt, "momentum", c.diffusion.train.momentum, "diffusion.train");
            detail::assign(jt, "holdout_probes", c.diffusion.train.holdout_probes,
                           "diffusion.train");
        }
    }
    if (j.contains("sampler")) {
        const auto& js = j.at("sampler");
        detail::reject_unknown_keys(js,
                                    {"n_corrector", "snr", "soft_dc_weight", "corrector_first",
                                     "dc_include_acs", "dc_enabled", "entry_noise", "spirit_kh",
                                     "spirit_kw", "spirit_iters", "spirit_tol"},
                                    "sampler");
        detail::assign(js, "n_corrector", c.sampler.n_corrector, "sampler");
        detail::assign(js, "snr", c.sampler.snr, "sampler");
        detail::assign(js, "soft_dc_weight", c.sampler.soft_dc_weight, "sampler");
        detail::assign(js, "corrector_first", c.sampler.corrector_first, "sampler");
        detail::assign(js, "dc_include_acs", c.sampler.dc_include_acs, "sampler");
        detail::assign(js, "dc_enabled", c.sampler.dc_enabled, "sampler");
        detail::assign(js, "entry_noise", c.sampler.entry_noise, "sampler");
        detail::assign(js, "spirit_kh", c.sampler.spirit_kh, "sampler");
        detail::assign(js, "spirit_kw", c.sampler.spirit_kw, "sampler");
        detail::assign(js, "spirit_iters", c.sampler.spirit_iters, "sampler");
        detail::assign(js, "spirit_tol", c.sampler.spirit_tol, "sampler");
    }
    if (j.contains("metrics")) {
        const auto& js = j.at("metrics");
        detail::reject_unknown_keys(js, {"ssim_window", "ssim_sigma", "ssim_k1", "ssim_k2"},
                                    "metrics");
        detail::assign(js, "ssim_window", c.metrics.ssim_window, "metrics");
        detail::assign(js, "ssim_sigma", c.metrics.ssim_sigma, "metrics");
        detail::assign(js, "ssim_k1", c.metrics.ssim_k1, "metrics");
        detail::assign(js, "ssim_k2", c.metrics.ssim_k2, "metrics");
    }
    return c;
}

} // namespace smsrecon

#endif
