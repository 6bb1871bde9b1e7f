#pragma once

// Stacked bidirectional LSTM with hand-written backpropagation through time.

#include "ecpe/tensor.hpp"

#include <string>
#include <vector>

namespace ecpe {

// One direction of one layer. Gate layout in the 4H columns: input, forget,
// cell candidate, output.
class LstmDirection {
public:
    struct Cache {
        Matrix input;   // T x D
        Matrix gates;   // T x 4H, post-activation
        Matrix cell;    // T x H
        Matrix hidden;  // T x H
    };

    LstmDirection() = default;
    LstmDirection(const std::string& name, Index input_width, Index hidden_size, bool reverse);

    Index hidden_size() const { return w_recurrent.value.rows(); }
    Index input_width() const { return w_input.value.rows(); }
    bool reverse() const { return reverse_; }

    // Orthogonal recurrent blocks, uniform +-1/sqrt(fan_in) input weights,
    // forget-gate bias 1.
    void init(Rng& rng);

    Matrix forward(const Matrix& x, Cache* cache) const;
    Matrix backward(const Cache& cache, const Matrix& d_hidden);

    ParameterList parameters() { return {&w_input, &w_recurrent, &bias}; }

    Parameter w_input;      // D x 4H
    Parameter w_recurrent;  // H x 4H
    Parameter bias;         // 1 x 4H

private:
    bool reverse_ = false;
};

struct BiRnnConfig {
    Index input_width = 0;
    Index hidden_size = 256;
    int num_layers = 1;
    double inter_layer_dropout = 0.0;
};

class BiRnnStack {
public:
    struct LayerCache {
        Matrix input;  // after dropout, as seen by the layer
        Matrix dropout_mask;  // empty when no dropout was applied
        LstmDirection::Cache forward;
        LstmDirection::Cache backward;
    };
    using Cache = std::vector<LayerCache>;

    BiRnnStack() = default;
    BiRnnStack(const std::string& name, const BiRnnConfig& config);

    const BiRnnConfig& config() const { return config_; }
    Index output_width() const { return 2 * config_.hidden_size; }
    int num_layers() const { return static_cast<int>(forward_.size()); }

    void init(Rng& rng);

    // T x input_width -> T x 2H. Inter-layer dropout only when rng is non-null.
    Matrix forward(const Matrix& x, Rng* dropout_rng, Cache* cache) const;
    Matrix backward(const Cache& cache, const Matrix& d_output);

    ParameterList parameters();

    LstmDirection& direction(int layer, bool reverse)
    {
        return reverse ? backward_[layer] : forward_[layer];
    }

private:
    BiRnnConfig config_;
    std::vector<LstmDirection> forward_;
    std::vector<LstmDirection> backward_;
};

} // namespace ecpe
