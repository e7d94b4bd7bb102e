#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uclm/corpus.hpp"

namespace uclm {

enum class CellKind : uint8_t { elman = 0, lstm = 1 };

// Dense parameter block; which members are populated depends on the cell.
// Weights are kept in double; checkpoints store them as fp32.
struct Tensors {
    std::vector<double> emb;     // v x d input embeddings
    std::vector<double> rec;     // elman: d x d recurrent matrix
    std::vector<double> w_gates; // lstm: 4d x d input->gates, blocks [i f g o]
    std::vector<double> u_gates; // lstm: 4d x d hidden->gates
    std::vector<double> b_gates; // lstm: 4d gate biases
    std::vector<double> out;     // v x d softmax weights

    void zero();
};

Tensors make_tensors(CellKind cell, uint32_t v, uint32_t d);

// name/buffer pairs in a fixed order, shared by the optimizer, the
// checkpoint writer and the gradient tests
struct TensorRef {
    const char* name;
    std::vector<double>* data;
};
std::vector<TensorRef> tensor_refs(Tensors& t, CellKind cell);

struct RnnModel {
    CellKind cell = CellKind::lstm;
    uint32_t d = 0;
    uint32_t v = 0; // training vocabulary size
    Tensors w;
    Vocabulary vocab;

    void save(const std::string& path) const;
    static RnnModel load(const std::string& path);
};

// Uniform(-init_range, init_range) weights; lstm gate biases start at zero
// except the forget block, which starts at one.
RnnModel make_model(CellKind cell, uint32_t d, Vocabulary vocab, uint64_t seed,
                    double init_range = 0.05);

struct RnnState {
    std::vector<double> h;
    std::vector<double> c; // lstm cell state; empty for elman
};
RnnState make_state(const RnnModel& m);

// Advance the recurrence by one token. Inputs outside the training
// vocabulary contribute a zero embedding; the recurrence still runs.
void step(const RnnModel& m, RnnState& st, uint32_t input);

// Softmax over the v training words given the current hidden state.
std::vector<double> model_probs(const RnnModel& m, const RnnState& st);

// One truncated-BPTT window: consume inputs[t] and score targets[t] from the
// resulting state, t = 0..len-1, starting from state_in. No gradient flows
// past the window boundary (state_in is a constant). Accumulates into *grads
// when non-null, writes the carried state to *state_out when non-null, and
// returns the summed NLL in nats.
double bptt_window_pass(const RnnModel& m, const RnnState& state_in,
                        const uint32_t* inputs, const uint32_t* targets,
                        size_t len, Tensors* grads, RnnState* state_out);

struct TrainConfig {
    CellKind cell = CellKind::lstm;
    uint32_t d = 64;
    double lr = 0.2;
    uint32_t epochs = 10;
    uint32_t bptt_window = 20;
    uint32_t batch_size = 1;
    uint64_t seed = 1;
    double init_range = 0.05;
    double adagrad_eps = 1e-8;
};

// Adagrad over truncated-BPTT windows. With batch_size > 1 the stream is cut
// into contiguous shards scanned in lockstep, each with its own carried
// state; one update sums the window gradients across shards. Returns the
// mean NLL per epoch.
std::vector<double> train_model(RnnModel& m, const TokenStream& tokens,
                                const TrainConfig& cfg);

// make_model (seeded from cfg) + train_model in one call
RnnModel train_new_model(const TokenStream& tokens, Vocabulary vocab,
                         const TrainConfig& cfg,
                         std::vector<double>* epoch_nll = nullptr);

// What the evaluation loop needs per token: the state the prediction was
// made from (the retrieval query, and the key stored with this token) and
// the model probability of the token.
struct StepOutcome {
    std::vector<float> h_query;
    double p_model; // 0 when the token is outside the train vocabulary
};

// Streaming scorer: next(token) scores the token under the current state,
// then advances the recurrence with it.
class StreamEvaluator {
public:
    explicit StreamEvaluator(const RnnModel& m);

    StepOutcome next(uint32_t token);
    void reset();

    const RnnModel& model() const { return m_; }
    // model distribution used at the most recent next() call
    const std::vector<double>& last_probs() const { return probs_; }

private:
    const RnnModel& m_;
    RnnState st_;
    std::vector<double> probs_;
};

// Mean NLL (nats/token) of an in-vocabulary stream under the bare model.
double evaluate_stream(const RnnModel& m, const TokenStream& tokens);

} // namespace uclm
