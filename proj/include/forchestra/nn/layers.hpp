#pragma once

#include <string>
#include <vector>

#include "forchestra/nn/init.hpp"
#include "forchestra/nn/ops.hpp"

namespace forchestra::nn {

/// Fully connected layer: weight [in x out], bias [out].
struct LinearLayer {
    Parameter weight;
    Parameter bias;

    static LinearLayer create(const std::string& name, std::size_t in, std::size_t out, Rng& rng);

    std::size_t in_features() const { return weight.value.dim(0); }
    std::size_t out_features() const { return weight.value.dim(1); }
    Var forward(Tape& t, Var x);
    std::vector<Parameter*> parameters() { return {&weight, &bias}; }
    std::vector<const Parameter*> parameters() const { return {&weight, &bias}; }
};

/// One LSTM layer with a single bias vector per gate set.
/// Parameter count: 4 * ((in + hidden) * hidden + hidden).
struct LstmLayer {
    Parameter w_ih;  // [in x 4H]
    Parameter w_hh;  // [H x 4H]
    Parameter bias;  // [4H]

    static LstmLayer create(const std::string& name, std::size_t in, std::size_t hidden, Rng& rng);
    static std::size_t parameter_count(std::size_t in, std::size_t hidden);

    std::size_t hidden_size() const { return w_hh.value.dim(0); }
    std::vector<Parameter*> parameters() { return {&w_ih, &w_hh, &bias}; }
    std::vector<const Parameter*> parameters() const { return {&w_ih, &w_hh, &bias}; }
};

/// Runs a stack of LSTM layers over [B x T x in]; returns the last layer's
/// hidden sequence [B x T x H]. Throws ConfigError on an empty stack or
/// mismatched layer sizes.
Var lstm_forward(Tape& t, Var x, std::vector<LstmLayer>& layers);

enum class Activation { none, gelu };

struct ConvBlockConfig {
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel_size = 3;
    std::size_t dilation = 1;
    bool residual = true;  // only applied when in_channels == out_channels
    Activation activation = Activation::gelu;
};

/// y = conv_dilated(act(x)) + (residual ? x : 0)
struct ConvBlock {
    ConvBlockConfig config;
    Parameter kernel;  // [k x in x out]
    Parameter bias;    // [out]

    /// Throws ConfigError for an even kernel size or zero dilation.
    static ConvBlock create(const std::string& name, const ConvBlockConfig& config, Rng& rng);

    std::vector<Parameter*> parameters() { return {&kernel, &bias}; }
    std::vector<const Parameter*> parameters() const { return {&kernel, &bias}; }
};

Var dilated_conv_block_forward(Tape& t, Var x, ConvBlock& block);

}  // namespace forchestra::nn
