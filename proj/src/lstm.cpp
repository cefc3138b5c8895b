#include "fedcast/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "fedcast/rng.hpp"

namespace fedcast {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_well_formed(const ModelWeights& w) {
    const int h = w.hidden_size;
    if (h < 1) throw std::invalid_argument("model: hidden_size must be positive");
    auto check_gate = [&](const GateWeights& g) {
        if (static_cast<int>(g.recurrent.size()) != h * h ||
            static_cast<int>(g.input.size()) != h || static_cast<int>(g.bias.size()) != h) {
            throw std::invalid_argument("model: gate dimensions do not match hidden_size");
        }
    };
    check_gate(w.gate_input);
    check_gate(w.gate_forget);
    check_gate(w.gate_output);
    check_gate(w.gate_candidate);
    if (static_cast<int>(w.readout.size()) != h) {
        throw std::invalid_argument("model: readout dimension does not match hidden_size");
    }
}

} // namespace

GradientVector flatten(const ModelWeights& w) {
    GradientVector flat;
    flat.reserve(w.param_count());
    for (const GateWeights* gate :
         {&w.gate_input, &w.gate_forget, &w.gate_output, &w.gate_candidate}) {
        flat.insert(flat.end(), gate->recurrent.begin(), gate->recurrent.end());
        flat.insert(flat.end(), gate->input.begin(), gate->input.end());
        flat.insert(flat.end(), gate->bias.begin(), gate->bias.end());
    }
    flat.insert(flat.end(), w.readout.begin(), w.readout.end());
    flat.push_back(w.readout_bias);
    return flat;
}

ModelWeights unflatten(std::span<const double> flat, int hidden_size) {
    if (hidden_size < 1) throw std::invalid_argument("unflatten: hidden_size must be positive");
    ModelWeights w;
    w.hidden_size = hidden_size;
    if (static_cast<int>(flat.size()) != w.param_count()) {
        throw std::invalid_argument("unflatten: expected " + std::to_string(w.param_count()) +
                                    " values, got " + std::to_string(flat.size()));
    }
    const int h = hidden_size;
    std::size_t pos = 0;
    auto take = [&](std::size_t n) {
        std::vector<double> out(flat.begin() + pos, flat.begin() + pos + n);
        pos += n;
        return out;
    };
    for (GateWeights* gate : {&w.gate_input, &w.gate_forget, &w.gate_output, &w.gate_candidate}) {
        gate->recurrent = take(static_cast<std::size_t>(h) * h);
        gate->input = take(h);
        gate->bias = take(h);
    }
    w.readout = take(h);
    w.readout_bias = flat[pos];
    return w;
}

ModelWeights init_weights(int hidden_size, std::uint64_t rng_seed) {
    if (hidden_size < 1) throw std::invalid_argument("init_weights: hidden_size must be positive");
    ModelWeights shape;
    shape.hidden_size = hidden_size;
    const int p = shape.param_count();
    const double k = 1.0 / std::sqrt(static_cast<double>(hidden_size));

    std::mt19937_64 gen(rng_seed);
    std::vector<double> flat(p);
    for (double& v : flat) v = rng::uniform_range(gen, -k, k);

    ModelWeights w = unflatten(flat, hidden_size);
    // forget bias at 1.0 keeps early cell memory open
    std::fill(w.gate_forget.bias.begin(), w.gate_forget.bias.end(), 1.0);
    return w;
}

ForwardTrace forward(const ModelWeights& w, std::span<const double> window) {
    check_well_formed(w);
    if (window.empty()) throw std::invalid_argument("forward: empty window");

    const int h = w.hidden_size;
    const int steps = static_cast<int>(window.size());

    ForwardTrace trace;
    trace.steps = steps;
    trace.hidden_size = h;
    trace.inputs.assign(window.begin(), window.end());
    const std::size_t cells = static_cast<std::size_t>(steps) * h;
    trace.gate_i.resize(cells);
    trace.gate_f.resize(cells);
    trace.gate_o.resize(cells);
    trace.cand.resize(cells);
    trace.cell.resize(cells);
    trace.hidden.resize(cells);

    std::vector<double> h_prev(h, 0.0);
    std::vector<double> c_prev(h, 0.0);

    for (int t = 0; t < steps; ++t) {
        const double x = window[t];
        const std::size_t row = static_cast<std::size_t>(t) * h;
        for (int j = 0; j < h; ++j) {
            double pre_i = w.gate_input.bias[j] + w.gate_input.input[j] * x;
            double pre_f = w.gate_forget.bias[j] + w.gate_forget.input[j] * x;
            double pre_o = w.gate_output.bias[j] + w.gate_output.input[j] * x;
            double pre_g = w.gate_candidate.bias[j] + w.gate_candidate.input[j] * x;
            const std::size_t wrow = static_cast<std::size_t>(j) * h;
            for (int k = 0; k < h; ++k) {
                const double hk = h_prev[k];
                pre_i += w.gate_input.recurrent[wrow + k] * hk;
                pre_f += w.gate_forget.recurrent[wrow + k] * hk;
                pre_o += w.gate_output.recurrent[wrow + k] * hk;
                pre_g += w.gate_candidate.recurrent[wrow + k] * hk;
            }
            const double gi = sigmoid(pre_i);
            const double gf = sigmoid(pre_f);
            const double go = sigmoid(pre_o);
            const double gc = std::tanh(pre_g);
            const double c = gf * c_prev[j] + gi * gc;
            const double hid = go * std::tanh(c);
            trace.gate_i[row + j] = gi;
            trace.gate_f[row + j] = gf;
            trace.gate_o[row + j] = go;
            trace.cand[row + j] = gc;
            trace.cell[row + j] = c;
            trace.hidden[row + j] = hid;
        }
        std::copy(trace.hidden.begin() + row, trace.hidden.begin() + row + h, h_prev.begin());
        std::copy(trace.cell.begin() + row, trace.cell.begin() + row + h, c_prev.begin());
    }

    double pred = w.readout_bias;
    const std::size_t last = static_cast<std::size_t>(steps - 1) * h;
    for (int j = 0; j < h; ++j) pred += w.readout[j] * trace.hidden[last + j];
    trace.prediction = pred;
    return trace;
}

double predict(const ModelWeights& w, std::span<const double> window) {
    return forward(w, window).prediction;
}

BackwardResult backward(const ModelWeights& w, const ForwardTrace& trace, double target) {
    const int h = w.hidden_size;
    const int steps = trace.steps;
    if (trace.hidden_size != h || steps < 1) {
        throw std::invalid_argument("backward: trace does not match model");
    }

    BackwardResult result;
    const double diff = trace.prediction - target;
    result.loss = diff * diff;

    ModelWeights grad;
    grad.hidden_size = h;
    auto zero_gate = [&](GateWeights& g) {
        g.recurrent.assign(static_cast<std::size_t>(h) * h, 0.0);
        g.input.assign(h, 0.0);
        g.bias.assign(h, 0.0);
    };
    zero_gate(grad.gate_input);
    zero_gate(grad.gate_forget);
    zero_gate(grad.gate_output);
    zero_gate(grad.gate_candidate);
    grad.readout.assign(h, 0.0);

    const double dpred = 2.0 * diff;
    grad.readout_bias = dpred;

    std::vector<double> dh(h, 0.0);
    std::vector<double> dc_next(h, 0.0);
    const std::size_t last = static_cast<std::size_t>(steps - 1) * h;
    for (int j = 0; j < h; ++j) {
        grad.readout[j] = dpred * trace.hidden[last + j];
        dh[j] = dpred * w.readout[j];
    }

    std::vector<double> dpre_i(h), dpre_f(h), dpre_o(h), dpre_g(h), dh_prev(h);
    for (int t = steps - 1; t >= 0; --t) {
        const std::size_t row = static_cast<std::size_t>(t) * h;
        const std::size_t prev_row = row - h; // valid only when t > 0
        const double x = trace.inputs[t];
        for (int j = 0; j < h; ++j) {
            const double gi = trace.gate_i[row + j];
            const double gf = trace.gate_f[row + j];
            const double go = trace.gate_o[row + j];
            const double gc = trace.cand[row + j];
            const double c = trace.cell[row + j];
            const double c_prev = (t > 0) ? trace.cell[prev_row + j] : 0.0;
            const double tc = std::tanh(c);

            const double d_go = dh[j] * tc;
            dpre_o[j] = d_go * go * (1.0 - go);

            const double dc = dh[j] * go * (1.0 - tc * tc) + dc_next[j];

            const double d_gf = dc * c_prev;
            dpre_f[j] = d_gf * gf * (1.0 - gf);

            const double d_gi = dc * gc;
            dpre_i[j] = d_gi * gi * (1.0 - gi);

            const double d_gc = dc * gi;
            dpre_g[j] = d_gc * (1.0 - gc * gc);

            dc_next[j] = dc * gf;
        }

        for (int j = 0; j < h; ++j) {
            const std::size_t wrow = static_cast<std::size_t>(j) * h;
            if (t > 0) {
                for (int k = 0; k < h; ++k) {
                    const double hk = trace.hidden[prev_row + k];
                    grad.gate_input.recurrent[wrow + k] += dpre_i[j] * hk;
                    grad.gate_forget.recurrent[wrow + k] += dpre_f[j] * hk;
                    grad.gate_output.recurrent[wrow + k] += dpre_o[j] * hk;
                    grad.gate_candidate.recurrent[wrow + k] += dpre_g[j] * hk;
                }
            }
            grad.gate_input.input[j] += dpre_i[j] * x;
            grad.gate_forget.input[j] += dpre_f[j] * x;
            grad.gate_output.input[j] += dpre_o[j] * x;
            grad.gate_candidate.input[j] += dpre_g[j] * x;
            grad.gate_input.bias[j] += dpre_i[j];
            grad.gate_forget.bias[j] += dpre_f[j];
            grad.gate_output.bias[j] += dpre_o[j];
            grad.gate_candidate.bias[j] += dpre_g[j];
        }

        if (t > 0) {
            for (int k = 0; k < h; ++k) {
                double acc = 0.0;
                for (int j = 0; j < h; ++j) {
                    const std::size_t wrow = static_cast<std::size_t>(j) * h;
                    acc += w.gate_input.recurrent[wrow + k] * dpre_i[j];
                    acc += w.gate_forget.recurrent[wrow + k] * dpre_f[j];
                    acc += w.gate_output.recurrent[wrow + k] * dpre_o[j];
                    acc += w.gate_candidate.recurrent[wrow + k] * dpre_g[j];
                }
                dh_prev[k] = acc;
            }
            std::copy(dh_prev.begin(), dh_prev.end(), dh.begin());
        }
    }

    result.grad = flatten(grad);
    return result;
}

namespace {

void accumulate(GradientVector& acc, const GradientVector& g) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
}

void finish_mean(AverageGradient& out, std::size_t n) {
    const double inv = 1.0 / static_cast<double>(n);
    out.mean_loss *= inv;
    for (double& v : out.grad) v *= inv;
}

} // namespace

AverageGradient average_gradient(const ModelWeights& w, const WindowedDataset& dataset) {
    if (dataset.samples.empty()) {
        throw std::invalid_argument("average_gradient: empty dataset");
    }
    AverageGradient out;
    out.grad.assign(w.param_count(), 0.0);
    for (const WindowSample& sample : dataset.samples) {
        const ForwardTrace trace = forward(w, sample.input);
        BackwardResult back = backward(w, trace, sample.target);
        out.mean_loss += back.loss;
        accumulate(out.grad, back.grad);
    }
    finish_mean(out, dataset.samples.size());
    return out;
}

AverageGradient average_gradient_parallel(const ModelWeights& w, const WindowedDataset& dataset,
                                          int threads) {
    if (dataset.samples.empty()) {
        throw std::invalid_argument("average_gradient: empty dataset");
    }
    if (threads <= 1) return average_gradient(w, dataset);

    const std::size_t n = dataset.samples.size();
    const std::size_t block = 256; // bounds slot memory; fold order is unchanged

    AverageGradient out;
    out.grad.assign(w.param_count(), 0.0);
    std::vector<BackwardResult> slots(std::min(block, n));

    for (std::size_t begin = 0; begin < n; begin += block) {
        const std::size_t end = std::min(begin + block, n);
#pragma omp parallel for num_threads(threads) schedule(static)
        for (long long i = static_cast<long long>(begin); i < static_cast<long long>(end); ++i) {
            const WindowSample& sample = dataset.samples[static_cast<std::size_t>(i)];
            const ForwardTrace trace = forward(w, sample.input);
            slots[static_cast<std::size_t>(i) - begin] = backward(w, trace, sample.target);
        }
        for (std::size_t i = begin; i < end; ++i) {
            out.mean_loss += slots[i - begin].loss;
            accumulate(out.grad, slots[i - begin].grad);
        }
    }
    finish_mean(out, n);
    return out;
}

double mean_loss(const ModelWeights& w, const WindowedDataset& dataset) {
    if (dataset.samples.empty()) {
        throw std::invalid_argument("mean_loss: empty dataset");
    }
    double sum = 0.0;
    for (const WindowSample& sample : dataset.samples) {
        const double diff = predict(w, sample.input) - sample.target;
        sum += diff * diff;
    }
    return sum / static_cast<double>(dataset.samples.size());
}

void apply_sgd_step(std::vector<double>& flat, std::span<const double> grad, double eta) {
    if (flat.size() != grad.size()) {
        throw std::invalid_argument("sgd_step: parameter/gradient length mismatch");
    }
    for (std::size_t i = 0; i < flat.size(); ++i) flat[i] -= eta * grad[i];
}

ModelWeights sgd_step(const ModelWeights& w, const GradientVector& grad, double eta) {
    std::vector<double> flat = flatten(w);
    apply_sgd_step(flat, grad, eta);
    return unflatten(flat, w.hidden_size);
}

GradientVector numerical_gradient(const ModelWeights& w, std::span<const double> window,
                                  double target, double epsilon) {
    if (epsilon <= 0.0) throw std::invalid_argument("numerical_gradient: epsilon must be > 0");
    std::vector<double> flat = flatten(w);
    GradientVector grad(flat.size());
    for (std::size_t j = 0; j < flat.size(); ++j) {
        const double saved = flat[j];
        flat[j] = saved + epsilon;
        const double up = predict(unflatten(flat, w.hidden_size), window);
        flat[j] = saved - epsilon;
        const double down = predict(unflatten(flat, w.hidden_size), window);
        flat[j] = saved;
        const double loss_up = (up - target) * (up - target);
        const double loss_down = (down - target) * (down - target);
        grad[j] = (loss_up - loss_down) / (2.0 * epsilon);
    }
    return grad;
}

std::vector<double> forecast_horizon(const ModelWeights& w, std::span<const double> seed_window,
                                     int horizon) {
    if (horizon < 1) throw std::invalid_argument("forecast_horizon: horizon must be >= 1");
    std::vector<double> window(seed_window.begin(), seed_window.end());
    std::vector<double> predictions;
    predictions.reserve(horizon);
    for (int i = 0; i < horizon; ++i) {
        const double p = predict(w, window);
        predictions.push_back(p);
        window.erase(window.begin());
        window.push_back(p);
    }
    return predictions;
}

} // namespace fedcast
