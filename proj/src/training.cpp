#include "udic/training.hpp"

#include <algorithm>

#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "udic/rng.hpp"

namespace udic {

void TrainingConfig::validate() const {
    if (!(learning_rate > 0.0))
        throw std::invalid_argument("training: learning_rate must be positive");
    if (batch_size < 1)
        throw std::invalid_argument("training: batch_size must be >= 1");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
        throw std::invalid_argument("training: adam betas must lie in [0, 1)");
    if (!(adam_eps > 0.0))
        throw std::invalid_argument("training: adam_eps must be positive");
    if (codebook_weight < 0.0 || commitment_weight < 0.0)
        throw std::invalid_argument("training: vq term weights must be non-negative");
}

namespace {

void check_finite(double value, const char* term) {
    if (!std::isfinite(value)) {
        throw std::runtime_error(std::string("training: non-finite loss term: ") + term);
    }
}

/// Shared body of both loss variants. `image_target` selects the misfit
/// domain: the DAS image (with gradient entering through the adjoint) or the
/// raw data itself.
LossBreakdown run_loss(const Tensor& f, const Tensor* u, const Model& model,
                       const DelayTable* table, double codebook_weight,
                       double commitment_weight, ModelGrads* grads,
                       bool bypass_bottleneck) {
    PipelineTrace trace;
    trace.encoder_output = encode(model, f, &trace.encoder);
    trace.quantized = quantize(trace.encoder_output, model.codebook);
    trace.decoder_input =
        bypass_bottleneck ? trace.encoder_output : dequantize(trace.quantized, model.codebook);
    trace.reconstruction = decode(model, trace.decoder_input, &trace.decoder);

    VqLossTerms vq = vq_loss_terms(trace.encoder_output, model.codebook, trace.quantized);

    LossBreakdown out;
    out.quantized = trace.quantized;
    out.codebook = vq.codebook_loss;
    out.commitment = vq.commitment_loss;

    Tensor grad_reconstruction;  // dL/d f_tilde
    if (u != nullptr) {
        Tensor u_hat = das_forward(trace.reconstruction, *table);
        Tensor r = u_hat - *u;
        out.misfit = sum_squares(r);
        if (grads) grad_reconstruction = das_adjoint(r *= 2.0, *table);
    } else {
        Tensor r = trace.reconstruction - f;
        out.misfit = sum_squares(r);
        if (grads) grad_reconstruction = std::move(r *= 2.0);
    }
    out.total = out.misfit + codebook_weight * out.codebook + commitment_weight * out.commitment;

    check_finite(out.misfit, "misfit");
    check_finite(out.codebook, "codebook");
    check_finite(out.commitment, "commitment");

    if (!grads) return out;

    // Decoder backward through the final crop.
    const auto& ds = model.config.data_shape;
    const auto& pre_crop = model.plan.decoder_shapes.back();
    Tensor g = crop_backward(grad_reconstruction.reshaped({1, ds[0], ds[1], ds[2]}), pre_crop);
    Tensor g_decoder_input_cf = stack_backward(model.decoder, trace.decoder, g, grads->decoder);
    out.grad_decoder_input = channels_last(g_decoder_input_cf);

    // Straight-through across the bottleneck, then the commitment pull.
    out.grad_encoder_output = straight_through_backward(out.grad_decoder_input);
    Tensor g_e = out.grad_encoder_output;
    if (commitment_weight != 0.0) {
        Tensor commit = vq.grad_encoder_output;
        g_e += (commit *= commitment_weight);
    }
    stack_backward(model.encoder, trace.encoder, channels_first(g_e), grads->encoder);

    // Only the codebook term touches the codes.
    if (codebook_weight != 0.0) {
        Tensor cb = vq.grad_codebook;
        grads->codebook += (cb *= codebook_weight);
    }
    return out;
}

}  // namespace

LossBreakdown loss_data_to_image(const Tensor& f, const Tensor& u, const Model& model,
                                 const DelayTable& table, double codebook_weight,
                                 double commitment_weight, ModelGrads* grads,
                                 bool bypass_bottleneck) {
    return run_loss(f, &u, model, &table, codebook_weight, commitment_weight, grads,
                    bypass_bottleneck);
}

LossBreakdown loss_data_to_data(const Tensor& f, const Model& model, double codebook_weight,
                                double commitment_weight, ModelGrads* grads,
                                bool bypass_bottleneck) {
    return run_loss(f, nullptr, model, nullptr, codebook_weight, commitment_weight, grads,
                    bypass_bottleneck);
}

AdamState init_adam(const Model& model) {
    AdamState state;
    for (const Tensor* p : parameter_tensors(model)) {
        state.m.emplace_back(p->shape());
        state.v.emplace_back(p->shape());
    }
    return state;
}

void adam_step(Model& model, const ModelGrads& grads, AdamState& state,
               const TrainingConfig& cfg) {
    std::vector<Tensor*> params = parameter_tensors(model);
    std::vector<const Tensor*> gs = parameter_tensors(grads);
    if (params.size() != gs.size() || params.size() != state.m.size())
        throw std::invalid_argument("adam_step: parameter/gradient mismatch");

    state.step += 1;
    const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));

    for (std::size_t t = 0; t < params.size(); ++t) {
        Tensor& p = *params[t];
        const Tensor& g = *gs[t];
        Tensor& m = state.m[t];
        Tensor& v = state.v[t];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            p[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
        }
    }
}

std::string format_epoch_record(const EpochRecord& rec) {
    std::ostringstream os;
    os.precision(10);
    os << rec.epoch << '\t' << rec.train_loss << '\t' << rec.test_loss << '\t'
       << rec.test_ssim_mean << '\t' << rec.codebook_used_fraction;
    return os.str();
}

double evaluate_test_ssim(const Model& model, const std::vector<Sample>& items,
                          const DelayTable& table) {
    if (items.empty()) return 0.0;
    SsimConfig cfg;  // shrink the default window on tiny diagnostic images
    cfg.window_size = std::min({cfg.window_size, table.n_x, table.n_z});
    double total = 0.0;
    for (const Sample& item : items) {
        PipelineResult r = forward_data_to_image(model, item.data, table, nullptr);
        total += ssim(r.image, item.image, cfg);
    }
    return total / static_cast<double>(items.size());
}

double dataset_scale(const std::vector<Sample>& train_items) {
    double scale = 0.0;
    for (const Sample& item : train_items) scale = std::max(scale, max_abs(item.data));
    return scale > 0.0 ? scale : 1.0;
}

namespace {

void scale_grads(ModelGrads& grads, double s) {
    for (Tensor* g : parameter_tensors(grads)) (*g) *= s;
}

void accumulate(ModelGrads& into, ModelGrads& from) {
    std::vector<Tensor*> a = parameter_tensors(into);
    std::vector<Tensor*> b = parameter_tensors(from);
    for (std::size_t i = 0; i < a.size(); ++i) (*a[i]) += (*b[i]);
}

LossBreakdown item_loss(const Sample& item, const Model& model, const TrainingConfig& cfg,
                        const DelayTable& table, ModelGrads* grads) {
    if (cfg.variant == LossVariant::data_to_image) {
        return loss_data_to_image(item.data, item.image, model, table, cfg.codebook_weight,
                                  cfg.commitment_weight, grads, cfg.bypass_bottleneck);
    }
    return loss_data_to_data(item.data, model, cfg.codebook_weight, cfg.commitment_weight,
                             grads, cfg.bypass_bottleneck);
}

}  // namespace

TrainResult train(const Dataset& dataset, const ModelConfig& model_config,
                  const TrainingConfig& training_config, const DelayTable& table,
                  const CheckpointFn& checkpoint) {
    training_config.validate();
    if (dataset.train.empty())
        throw std::invalid_argument("train: empty training set");

    TrainResult result;
    result.model = init_model(model_config, training_config.seed);
    result.model.data_scale = dataset_scale(dataset.train);

    AdamState adam = init_adam(result.model);
    std::mt19937_64 order_rng(training_config.seed ^ 0x9e3779b97f4a7c15ull);

    std::vector<std::size_t> order(dataset.train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 1; epoch <= training_config.epochs; ++epoch) {
        shuffle(order, order_rng);

        double epoch_loss = 0.0;
        std::set<std::uint32_t> used_codes;
        for (std::size_t start = 0; start < order.size(); start += training_config.batch_size) {
            const std::size_t end =
                std::min(order.size(), start + training_config.batch_size);
            ModelGrads batch_grads = zero_model_grads(result.model);
            double batch_loss = 0.0;
            for (std::size_t b = start; b < end; ++b) {
                const Sample& item = dataset.train[order[b]];
                ModelGrads item_grads = zero_model_grads(result.model);
                LossBreakdown loss =
                    item_loss(item, result.model, training_config, table, &item_grads);
                batch_loss += loss.total;
                accumulate(batch_grads, item_grads);
                used_codes.insert(loss.quantized.indices.begin(),
                                  loss.quantized.indices.end());
            }
            const double inv_batch = 1.0 / static_cast<double>(end - start);
            scale_grads(batch_grads, inv_batch);
            epoch_loss += batch_loss;
            adam_step(result.model, batch_grads, adam, training_config);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = epoch_loss / static_cast<double>(order.size());
        double test_loss = 0.0;
        for (const Sample& item : dataset.test)
            test_loss += item_loss(item, result.model, training_config, table, nullptr).total;
        rec.test_loss =
            dataset.test.empty() ? 0.0 : test_loss / static_cast<double>(dataset.test.size());
        rec.test_ssim_mean = evaluate_test_ssim(result.model, dataset.test, table);
        rec.codebook_used_fraction = static_cast<double>(used_codes.size()) /
                                     static_cast<double>(model_config.codebook_size);
        result.log.push_back(rec);

        if (checkpoint && training_config.checkpoint_every > 0 &&
            epoch % training_config.checkpoint_every == 0)
            checkpoint(result.model, epoch);
    }
    return result;
}

}  // namespace udic
