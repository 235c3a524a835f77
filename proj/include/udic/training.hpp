#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "udic/das.hpp"
#include "udic/metrics.hpp"
#include "udic/model.hpp"
#include "udic/tensor.hpp"

namespace udic {

enum class LossVariant { data_to_image, data_to_data };

struct TrainingConfig {
    LossVariant variant = LossVariant::data_to_image;
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t batch_size = 8;
    std::size_t epochs = 1;
    double codebook_weight = 1.0;
    double commitment_weight = 1.0;
    std::uint64_t seed = 0;
    std::size_t checkpoint_every = 0;  // epochs; 0 = no intermediate checkpoints
    /// Diagnostic mode: feed the encoder output straight to the decoder,
    /// reducing training to a plain autoencoder.
    bool bypass_bottleneck = false;

    void validate() const;
};

struct Sample {
    Tensor data;   // (n_t, n_s, n_r), normalized
    Tensor image;  // (n_x, n_z) target
};

struct Dataset {
    std::vector<Sample> train;
    std::vector<Sample> test;
};

struct LossBreakdown {
    double total = 0.0;
    double misfit = 0.0;
    double codebook = 0.0;
    double commitment = 0.0;
    IndexGrid quantized;  // bottleneck assignment of this pass
    // Straight-through pair, kept for the gradient-routing contract: the
    // gradient stored at the encoder output must equal the one at the
    // decoder input, elementwise.
    Tensor grad_decoder_input;
    Tensor grad_encoder_output;
};

/// Misfit |u - B D(Q(E(f)))|^2 plus weighted VQ terms; gradients accumulate
/// into `grads`. Pass grads = nullptr for a forward-only evaluation.
LossBreakdown loss_data_to_image(const Tensor& f, const Tensor& u, const Model& model,
                                 const DelayTable& table, double codebook_weight,
                                 double commitment_weight, ModelGrads* grads,
                                 bool bypass_bottleneck = false);

/// Data-space misfit |f - D(Q(E(f)))|^2 plus weighted VQ terms; no DAS in
/// the graph.
LossBreakdown loss_data_to_data(const Tensor& f, const Model& model, double codebook_weight,
                                double commitment_weight, ModelGrads* grads,
                                bool bypass_bottleneck = false);

struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::size_t step = 0;
};

AdamState init_adam(const Model& model);
void adam_step(Model& model, const ModelGrads& grads, AdamState& state,
               const TrainingConfig& cfg);

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double test_loss = 0.0;
    double test_ssim_mean = 0.0;
    double codebook_used_fraction = 0.0;
};

std::string format_epoch_record(const EpochRecord& rec);

struct TrainResult {
    Model model;
    std::vector<EpochRecord> log;
};

using CheckpointFn = std::function<void(const Model&, std::size_t epoch)>;

/// Seeded Adam loop over minibatches; deterministic for a fixed seed.
/// Aborts with a diagnostic naming the offending term if any loss component
/// goes non-finite.
TrainResult train(const Dataset& dataset, const ModelConfig& model_config,
                  const TrainingConfig& training_config, const DelayTable& table,
                  const CheckpointFn& checkpoint = nullptr);

/// Mean test SSIM of decompressed images against targets for fixed params.
double evaluate_test_ssim(const Model& model, const std::vector<Sample>& items,
                          const DelayTable& table);

/// Largest |f| over the training split; 1.0 for an all-zero set.
double dataset_scale(const std::vector<Sample>& train_items);

}  // namespace udic
