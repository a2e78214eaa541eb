#include "forchestra/model/pretrain_bp.hpp"

#include "forchestra/error.hpp"
#include "forchestra/nn/init.hpp"

namespace forchestra::model {

std::optional<double> ValidationSet::score(const eval::BatchPredictor& predict) const {
    if (dataset == nullptr) throw ContractError("validation set has no dataset");
    const auto fc = eval::backtest_forecasts(*dataset, instances, region, predict);
    return eval::mean_mase(fc, *dataset, filters);
}

eval::BatchPredictor bp_predictor(BasePredictor& bp) {
    return [&bp](const data::Batch& batch) { return predict(bp, batch.context); };
}

TrainResult fit_bp(BasePredictor& bp, const data::Dataset& ds, const data::WindowSet& windows,
                   const OptimConfig& optim, std::uint64_t seed, const ValidationSet* validation) {
    const auto params = bp.parameters();
    ForwardFn forward = [&bp](nn::Tape& t, const data::Batch& b) { return bp.forward(t, t.constant(b.context)); };
    ValidateFn validate;
    if (validation != nullptr) validate = [&] { return validation->score(bp_predictor(bp)); };
    return train_on_windows(ds, windows, forward, params, params, optim, seed, validate);
}

BpTrainResult pretrain_bp(const BasePredictorConfig& config, const data::Dataset& ds, const data::WindowSet& windows,
                          const OptimConfig& optim, std::uint64_t seed, const ValidationSet* validation) {
    if (windows.empty()) throw ConfigError("pretrain_bp needs a nonempty window stream");
    BpTrainResult out{BasePredictor::create(config, nn::derive_seed(seed, 1)), {}};
    out.training = fit_bp(out.bp, ds, windows, optim, nn::derive_seed(seed, 2), validation);
    return out;
}

}  // namespace forchestra::model
