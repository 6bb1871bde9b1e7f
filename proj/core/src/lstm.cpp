#include "ecpe/lstm.hpp"

#include "ecpe/dense.hpp"
#include "ecpe/error.hpp"

#include <cmath>

namespace ecpe {

LstmDirection::LstmDirection(const std::string& name, Index input_width, Index hidden_size, bool reverse)
    : w_input(name + ".w_input", input_width, 4 * hidden_size),
      w_recurrent(name + ".w_recurrent", hidden_size, 4 * hidden_size),
      bias(name + ".bias", 1, 4 * hidden_size),
      reverse_(reverse)
{
}

void LstmDirection::init(Rng& rng)
{
    const Index h = hidden_size();
    fill_uniform(w_input.value, 1.0 / std::sqrt(static_cast<double>(input_width())), rng);
    for (int g = 0; g < 4; ++g) {
        w_recurrent.value.middleCols(g * h, h) = orthogonal(h, h, rng);
    }
    bias.value.setZero();
    bias.value.middleCols(h, h).setOnes();
}

Matrix LstmDirection::forward(const Matrix& x, Cache* cache) const
{
    if (x.cols() != input_width()) {
        throw ShapeError(w_input.name + ": input width " + std::to_string(x.cols()) + ", expected " +
                         std::to_string(input_width()));
    }
    const Index steps = x.rows();
    const Index h = hidden_size();

    Matrix pre = x * w_input.value;
    pre.rowwise() += bias.value.row(0);

    Matrix gates(steps, 4 * h);
    Matrix cell(steps, h);
    Matrix hidden(steps, h);
    RowVector h_prev = RowVector::Zero(h);
    RowVector c_prev = RowVector::Zero(h);

    for (Index s = 0; s < steps; ++s) {
        const Index t = reverse_ ? steps - 1 - s : s;
        RowVector z = pre.row(t) + h_prev * w_recurrent.value;
        for (Index k = 0; k < h; ++k) {
            z(k) = sigmoid(z(k));                  // input
            z(h + k) = sigmoid(z(h + k));          // forget
            z(2 * h + k) = std::tanh(z(2 * h + k)); // candidate
            z(3 * h + k) = sigmoid(z(3 * h + k));  // output
        }
        const RowVector c = z.segment(h, h).cwiseProduct(c_prev) +
                            z.segment(0, h).cwiseProduct(z.segment(2 * h, h));
        const RowVector hh = z.segment(3 * h, h).cwiseProduct(c.array().tanh().matrix());
        gates.row(t) = z;
        cell.row(t) = c;
        hidden.row(t) = hh;
        h_prev = hh;
        c_prev = c;
    }

    if (cache) {
        cache->input = x;
        cache->gates = std::move(gates);
        cache->cell = std::move(cell);
        cache->hidden = hidden;
    }
    return hidden;
}

Matrix LstmDirection::backward(const Cache& cache, const Matrix& d_hidden)
{
    const Index steps = cache.input.rows();
    const Index h = hidden_size();
    if (d_hidden.rows() != steps || d_hidden.cols() != h) {
        throw ShapeError(w_input.name + ": gradient shape mismatch");
    }

    Matrix d_pre(steps, 4 * h);
    RowVector dh_next = RowVector::Zero(h);
    RowVector dc_next = RowVector::Zero(h);

    for (Index s = steps - 1; s >= 0; --s) {
        const Index t = reverse_ ? steps - 1 - s : s;
        const bool first = s == 0;
        const Index t_prev = reverse_ ? t + 1 : t - 1;

        const auto gi = cache.gates.row(t).segment(0, h).array();
        const auto gf = cache.gates.row(t).segment(h, h).array();
        const auto gg = cache.gates.row(t).segment(2 * h, h).array();
        const auto go = cache.gates.row(t).segment(3 * h, h).array();
        const Eigen::ArrayXXd tc = cache.cell.row(t).array().tanh();
        const Eigen::ArrayXXd c_prev = first ? Eigen::ArrayXXd::Zero(1, h)
                                             : Eigen::ArrayXXd(cache.cell.row(t_prev).array());

        const Eigen::ArrayXXd dh = (d_hidden.row(t) + dh_next).array();
        const Eigen::ArrayXXd dc = dh * go * (1.0 - tc * tc) + dc_next.array();

        d_pre.row(t).segment(0, h) = (dc * gg * gi * (1.0 - gi)).matrix();
        d_pre.row(t).segment(h, h) = (dc * c_prev * gf * (1.0 - gf)).matrix();
        d_pre.row(t).segment(2 * h, h) = (dc * gi * (1.0 - gg * gg)).matrix();
        d_pre.row(t).segment(3 * h, h) = (dh * tc * go * (1.0 - go)).matrix();

        dc_next = (dc * gf).matrix();
        dh_next = d_pre.row(t) * w_recurrent.value.transpose();
    }

    if (steps > 1) {
        // row t of h_prev pairs with d_pre row t; the first processed step has no predecessor
        if (reverse_) {
            w_recurrent.grad.noalias() +=
                cache.hidden.bottomRows(steps - 1).transpose() * d_pre.topRows(steps - 1);
        } else {
            w_recurrent.grad.noalias() +=
                cache.hidden.topRows(steps - 1).transpose() * d_pre.bottomRows(steps - 1);
        }
    }

    w_input.grad.noalias() += cache.input.transpose() * d_pre;
    bias.grad.row(0) += d_pre.colwise().sum();
    return d_pre * w_input.value.transpose();
}

// ---------------------------------------------------------------------------

BiRnnStack::BiRnnStack(const std::string& name, const BiRnnConfig& config) : config_(config)
{
    if (config.num_layers < 1 || config.hidden_size < 1 || config.input_width < 1) {
        throw ShapeError(name + ": BiRNN needs positive layers, hidden size and input width");
    }
    if (!(config.inter_layer_dropout >= 0.0 && config.inter_layer_dropout < 1.0)) {
        throw ShapeError(name + ": inter-layer dropout must lie in [0, 1)");
    }
    for (int l = 0; l < config.num_layers; ++l) {
        const Index in = l == 0 ? config.input_width : 2 * config.hidden_size;
        const std::string prefix = name + ".l" + std::to_string(l);
        forward_.emplace_back(prefix + ".fwd", in, config.hidden_size, false);
        backward_.emplace_back(prefix + ".bwd", in, config.hidden_size, true);
    }
}

void BiRnnStack::init(Rng& rng)
{
    for (std::size_t l = 0; l < forward_.size(); ++l) {
        forward_[l].init(rng);
        backward_[l].init(rng);
    }
}

Matrix BiRnnStack::forward(const Matrix& x, Rng* dropout_rng, Cache* cache) const
{
    if (x.rows() < 1) {
        throw ShapeError("BiRNN needs at least one step");
    }
    if (cache) {
        cache->assign(forward_.size(), LayerCache{});
    }
    const Index h = config_.hidden_size;
    Matrix current = x;
    for (std::size_t l = 0; l < forward_.size(); ++l) {
        Matrix mask;
        if (l > 0 && dropout_rng && config_.inter_layer_dropout > 0.0) {
            mask = dropout_mask(current.rows(), current.cols(), config_.inter_layer_dropout, *dropout_rng);
            current = current.cwiseProduct(mask);
        }
        LayerCache* lc = cache ? &(*cache)[l] : nullptr;
        Matrix out(current.rows(), 2 * h);
        out.leftCols(h) = forward_[l].forward(current, lc ? &lc->forward : nullptr);
        out.rightCols(h) = backward_[l].forward(current, lc ? &lc->backward : nullptr);
        if (lc) {
            lc->input = std::move(current);
            lc->dropout_mask = std::move(mask);
        }
        current = std::move(out);
    }
    return current;
}

Matrix BiRnnStack::backward(const Cache& cache, const Matrix& d_output)
{
    if (cache.size() != forward_.size()) {
        throw ShapeError("BiRNN backward called without a matching forward cache");
    }
    const Index h = config_.hidden_size;
    Matrix grad = d_output;
    for (std::size_t l = forward_.size(); l-- > 0;) {
        const LayerCache& lc = cache[l];
        Matrix d_in = forward_[l].backward(lc.forward, grad.leftCols(h));
        d_in += backward_[l].backward(lc.backward, grad.rightCols(h));
        if (lc.dropout_mask.size() > 0) {
            d_in = d_in.cwiseProduct(lc.dropout_mask);
        }
        grad = std::move(d_in);
    }
    return grad;
}

ParameterList BiRnnStack::parameters()
{
    ParameterList out;
    for (std::size_t l = 0; l < forward_.size(); ++l) {
        for (Parameter* p : forward_[l].parameters()) out.push_back(p);
        for (Parameter* p : backward_[l].parameters()) out.push_back(p);
    }
    return out;
}

} // namespace ecpe
