#include "forchestra/nn/layers.hpp"

#include "forchestra/error.hpp"

namespace forchestra::nn {

LinearLayer LinearLayer::create(const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
    return LinearLayer{make_weight(name + ".weight", Shape{in, out}, in, rng),
                       make_bias(name + ".bias", out)};
}

Var LinearLayer::forward(Tape& t, Var x) {
    return linear(t, x, t.parameter(weight), t.parameter(bias));
}

LstmLayer LstmLayer::create(const std::string& name, std::size_t in, std::size_t hidden, Rng& rng) {
    if (in == 0 || hidden == 0) throw ConfigError("lstm layer sizes must be positive");
    // fan-in follows the hidden size for both matrices, as in common LSTM implementations
    return LstmLayer{make_weight(name + ".w_ih", Shape{in, 4 * hidden}, hidden, rng),
                     make_weight(name + ".w_hh", Shape{hidden, 4 * hidden}, hidden, rng),
                     make_bias(name + ".bias", 4 * hidden)};
}

std::size_t LstmLayer::parameter_count(std::size_t in, std::size_t hidden) {
    return 4 * ((in + hidden) * hidden + hidden);
}

Var lstm_forward(Tape& t, Var x, std::vector<LstmLayer>& layers) {
    if (layers.empty()) throw ConfigError("lstm_forward: at least one layer is required");
    Var h = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        LstmLayer& layer = layers[i];
        const std::size_t expected_in = layer.w_ih.value.dim(0);
        if (t.shape(h).size() != 3 || t.shape(h)[2] != expected_in) {
            throw DimensionError("lstm_forward: layer " + std::to_string(i) + " expects input width " +
                                 std::to_string(expected_in) + ", got " + to_string(t.shape(h)));
        }
        h = lstm(t, h, t.parameter(layer.w_ih), t.parameter(layer.w_hh), t.parameter(layer.bias));
    }
    return h;
}

ConvBlock ConvBlock::create(const std::string& name, const ConvBlockConfig& config, Rng& rng) {
    if (config.kernel_size % 2 == 0) {
        throw ConfigError("conv block kernel size must be odd, got " + std::to_string(config.kernel_size));
    }
    if (config.dilation == 0) throw ConfigError("conv block dilation must be >= 1");
    const std::size_t fan_in = config.kernel_size * config.in_channels;
    return ConvBlock{
        config,
        make_weight(name + ".kernel", Shape{config.kernel_size, config.in_channels, config.out_channels},
                    fan_in, rng),
        make_bias(name + ".bias", config.out_channels)};
}

Var dilated_conv_block_forward(Tape& t, Var x, ConvBlock& block) {
    const ConvBlockConfig& c = block.config;
    if (c.kernel_size % 2 == 0) throw ConfigError("conv block kernel size must be odd");
    Var h = c.activation == Activation::gelu ? gelu(t, x) : x;
    Var y = conv1d(t, h, t.parameter(block.kernel), t.parameter(block.bias), c.dilation);
    if (c.residual && c.in_channels == c.out_channels) y = add(t, y, x);
    return y;
}

}  // namespace forchestra::nn
