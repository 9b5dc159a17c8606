#ifndef SMSRECON_MODEL_IO_HPP
#define SMSRECON_MODEL_IO_HPP

// Score-model serialization: a manifest (architecture + schedule parameters)
// plus the flat parameter vector in the array interchange format. Parameters
// are float32-quantized at the end of training, so save -> load round-trips
// bit-exactly.

#include <filesystem>
#include <memory>

#include <nlohmann/json.hpp>

#include "smsrecon/denoiser_net.hpp"
#include "smsrecon/errors.hpp"
#include "smsrecon/io.hpp"
#include "smsrecon/schedule.hpp"

namespace smsrecon {

inline void save_score_model(const std::filesystem::path& dir, const TrainedScoreModel& model) {
    std::filesystem::create_directories(dir);
    const auto& net = model.net();
    const auto& sched = model.schedule();

    RealArray w({net.n_params()});
    for (std::size_t i = 0; i < net.n_params(); ++i) w[i] = net.params()[i];
    write_array(dir / "weights", w);

    nlohmann::json m;
    m["type"] = "conv_residual_denoiser";
    m["kernel"] = DenoiserNet::kKernel;
    nlohmann::json layers = nlohmann::json::array();
    for (auto [ic, oc] : net.layer_sizes()) layers.push_back({ic, oc});
    m["layers"] = layers;
    m["n_params"] = net.n_params();
    m["schedule"] = {{"ny", sched.ny},           {"nx", sched.nx},
                     {"n_steps", sched.n_steps}, {"sigma_min", sched.sigma_min},
                     {"sigma_max", sched.sigma_max}, {"rho", sched.rho}};
    write_text_file(dir / "model.json", m.dump(2) + "\n");
}

inline std::shared_ptr<TrainedScoreModel> load_score_model(const std::filesystem::path& dir) {
    nlohmann::json m;
    try {
        m = nlohmann::json::parse(read_text_file(dir / "model.json"));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed model manifest " + (dir / "model.json").string() + ": " +
                      e.what());
    }
    try {
        if (m.at("type").get<std::string>() != "conv_residual_denoiser")
            throw IoError("unsupported model type in " + (dir / "model.json").string());
        const auto sj = m.at("schedule");
        const DiffusionSchedule sched = make_schedule(
            sj.at("ny").get<std::size_t>(), sj.at("nx").get<std::size_t>(),
            sj.at("n_steps").get<std::size_t>(), sj.at("sigma_min").get<double>(),
            sj.at("sigma_max").get<double>(), sj.at("rho").get<double>());

        auto net = std::make_shared<DenoiserNet>(0);
        if (m.at("kernel").get<std::size_t>() != DenoiserNet::kKernel ||
            m.at("n_params").get<std::size_t>() != net->n_params())
            throw IoError("model architecture in " + (dir / "model.json").string() +
                          " does not match this build");
        const auto layers = m.at("layers");
        if (layers.size() != net->layer_sizes().size())
            throw IoError("unexpected layer count in " + (dir / "model.json").string());
        for (std::size_t l = 0; l < layers.size(); ++l)
            if (layers[l][0].get<std::size_t>() != net->layer_sizes()[l].first ||
                layers[l][1].get<std::size_t>() != net->layer_sizes()[l].second)
                throw IoError("unexpected layer shape in " + (dir / "model.json").string());

        const RealArray w = read_real_array(dir / "weights");
        if (w.size() != net->n_params())
            throw IoError("weight count mismatch in " + (dir / "weights.bin").string());
        for (std::size_t i = 0; i < w.size(); ++i) net->params()[i] = w[i];
        return std::make_shared<TrainedScoreModel>(net, sched);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("invalid model manifest " + (dir / "model.json").string() + ": " + e.what());
    }
}

} // namespace smsrecon

#endif
