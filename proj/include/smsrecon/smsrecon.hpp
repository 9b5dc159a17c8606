#ifndef SMSRECON_SMSRECON_HPP
#define SMSRECON_SMSRECON_HPP

// Umbrella header: simultaneous multi-slice MRI reconstruction toolkit.

#include "smsrecon/acquisition.hpp"
#include "smsrecon/coils.hpp"
#include "smsrecon/config.hpp"
#include "smsrecon/denoiser_net.hpp"
#include "smsrecon/errors.hpp"
#include "smsrecon/fft.hpp"
#include "smsrecon/io.hpp"
#include "smsrecon/lstsq.hpp"
#include "smsrecon/mask.hpp"
#include "smsrecon/metrics.hpp"
#include "smsrecon/model_io.hpp"
#include "smsrecon/pc_sampler.hpp"
#include "smsrecon/phantom.hpp"
#include "smsrecon/rng.hpp"
#include "smsrecon/schedule.hpp"
#include "smsrecon/score_model.hpp"
#include "smsrecon/sense.hpp"
#include "smsrecon/slice_grappa.hpp"
#include "smsrecon/sms_sampler.hpp"
#include "smsrecon/spirit.hpp"
#include "smsrecon/tensor.hpp"

#endif
