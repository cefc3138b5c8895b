#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedcast/series.hpp"

namespace fedcast {

// Parameters of one LSTM gate for a univariate input: recurrent H x H matrix
// (row-major), input weight vector (H), bias vector (H).
struct GateWeights {
    std::vector<double> recurrent;
    std::vector<double> input;
    std::vector<double> bias;
};

// Single-layer LSTM with a linear scalar readout. Flattening order is fixed:
// gates input, forget, output, candidate; within a gate the recurrent matrix
// row-major, then input weights, then bias; finally readout weights and the
// readout bias. All training and serialization relies on this ordering.
struct ModelWeights {
    int hidden_size = 0;
    GateWeights gate_input, gate_forget, gate_output, gate_candidate;
    std::vector<double> readout;
    double readout_bias = 0.0;

    int param_count() const {
        const int h = hidden_size;
        return 4 * (h * h + h + h) + h + 1;
    }
};

// Flat parameter vector in the canonical ordering above. Gradients use the
// same layout as the flattened weights they pair with.
using GradientVector = std::vector<double>;

GradientVector flatten(const ModelWeights& w);
ModelWeights unflatten(std::span<const double> flat, int hidden_size);

// Uniform init in [-1/sqrt(H), 1/sqrt(H)], forget-gate biases then set to 1.0.
// Deterministic per (hidden_size, seed).
ModelWeights init_weights(int hidden_size, std::uint64_t rng_seed);

// Everything backpropagation needs from one forward pass.
struct ForwardTrace {
    int steps = 0;
    int hidden_size = 0;
    std::vector<double> inputs;  // steps
    std::vector<double> gate_i;  // steps x H, row-major
    std::vector<double> gate_f;
    std::vector<double> gate_o;
    std::vector<double> cand;
    std::vector<double> cell;
    std::vector<double> hidden;
    double prediction = 0.0;
};

// Standard LSTM recurrence from zero initial state; prediction is the linear
// readout of the final hidden state.
ForwardTrace forward(const ModelWeights& w, std::span<const double> window);

double predict(const ModelWeights& w, std::span<const double> window);

struct BackwardResult {
    double loss = 0.0;
    GradientVector grad;
};

// Squared-error loss (prediction - target)^2 and its exact gradient via
// backpropagation through time over the full window.
BackwardResult backward(const ModelWeights& w, const ForwardTrace& trace, double target);

struct AverageGradient {
    double mean_loss = 0.0;
    GradientVector grad;
};

// Arithmetic mean of per-sample losses and gradients, accumulated in dataset
// order. This is the serial reference implementation.
AverageGradient average_gradient(const ModelWeights& w, const WindowedDataset& dataset);

// OpenMP variant: per-sample gradients are computed in parallel, then folded
// in dataset order, so the result is bit-identical to the serial reference.
AverageGradient average_gradient_parallel(const ModelWeights& w, const WindowedDataset& dataset,
                                          int threads);

// Mean loss over the dataset without gradient work.
double mean_loss(const ModelWeights& w, const WindowedDataset& dataset);

// Elementwise w - eta * g on the flat parameter vectors.
void apply_sgd_step(std::vector<double>& flat, std::span<const double> grad, double eta);
ModelWeights sgd_step(const ModelWeights& w, const GradientVector& grad, double eta);

// Central-difference gradient of the squared-error loss; the verification
// oracle for backward().
GradientVector numerical_gradient(const ModelWeights& w, std::span<const double> window,
                                  double target, double epsilon);

// Iterated one-step-ahead forecasting: each prediction is appended to the
// window and the oldest value dropped. Returns normalized-space predictions.
std::vector<double> forecast_horizon(const ModelWeights& w, std::span<const double> seed_window,
                                     int horizon);

} // namespace fedcast
