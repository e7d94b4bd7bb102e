#include "uclm/rnnlm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "uclm/error.hpp"
#include "uclm/io.hpp"
#include "uclm/kernels.hpp"
#include "uclm/rng.hpp"

namespace uclm {

void Tensors::zero() {
    std::fill(emb.begin(), emb.end(), 0.0);
    std::fill(rec.begin(), rec.end(), 0.0);
    std::fill(w_gates.begin(), w_gates.end(), 0.0);
    std::fill(u_gates.begin(), u_gates.end(), 0.0);
    std::fill(b_gates.begin(), b_gates.end(), 0.0);
    std::fill(out.begin(), out.end(), 0.0);
}

Tensors make_tensors(CellKind cell, uint32_t v, uint32_t d) {
    Tensors t;
    t.emb.assign(size_t(v) * d, 0.0);
    if (cell == CellKind::elman) {
        t.rec.assign(size_t(d) * d, 0.0);
    } else {
        t.w_gates.assign(size_t(4) * d * d, 0.0);
        t.u_gates.assign(size_t(4) * d * d, 0.0);
        t.b_gates.assign(size_t(4) * d, 0.0);
    }
    t.out.assign(size_t(v) * d, 0.0);
    return t;
}

std::vector<TensorRef> tensor_refs(Tensors& t, CellKind cell) {
    if (cell == CellKind::elman)
        return {{"emb", &t.emb}, {"rec", &t.rec}, {"out", &t.out}};
    return {{"emb", &t.emb},
            {"w_gates", &t.w_gates},
            {"u_gates", &t.u_gates},
            {"b_gates", &t.b_gates},
            {"out", &t.out}};
}

RnnModel make_model(CellKind cell, uint32_t d, Vocabulary vocab, uint64_t seed,
                    double init_range) {
    require(d >= 1, "rnnlm: hidden dimension must be >= 1");
    require(vocab.size() >= 1, "rnnlm: empty vocabulary");
    require(init_range > 0.0, "rnnlm: init_range must be positive");

    RnnModel m;
    m.cell = cell;
    m.d = d;
    m.v = vocab.size();
    m.vocab = std::move(vocab);
    m.w = make_tensors(cell, m.v, d);

    Rng rng(seed);
    auto fill = [&](std::vector<double>& t) {
        for (double& x : t) x = rng.uniform(-init_range, init_range);
    };
    fill(m.w.emb);
    if (cell == CellKind::elman) {
        fill(m.w.rec);
    } else {
        fill(m.w.w_gates);
        fill(m.w.u_gates);
        // forget-gate bias starts at one so early training does not flush
        // the cell state
        std::fill(m.w.b_gates.begin() + d, m.w.b_gates.begin() + 2 * d, 1.0);
    }
    fill(m.w.out);
    return m;
}

RnnState make_state(const RnnModel& m) {
    RnnState st;
    st.h.assign(m.d, 0.0);
    if (m.cell == CellKind::lstm) st.c.assign(m.d, 0.0);
    return st;
}

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// acc[j] += sum_r mat[r*cols + j] * coef[r]
void add_matT_vec(const double* mat, size_t rows, size_t cols,
                  const double* coef, double* acc) {
    for (size_t r = 0; r < rows; ++r) {
        double cf = coef[r];
        const double* row = mat + r * cols;
        for (size_t j = 0; j < cols; ++j) acc[j] += cf * row[j];
    }
}

// grad[r*cols + j] += coef[r] * vec[j]
void add_outer(double* grad, size_t rows, size_t cols, const double* coef,
               const double* vec) {
    for (size_t r = 0; r < rows; ++r) {
        double cf = coef[r];
        double* row = grad + r * cols;
        for (size_t j = 0; j < cols; ++j) row[j] += cf * vec[j];
    }
}

struct LstmSnapshot {
    std::vector<double> gates; // 4d, post-activation [i f g o]
    std::vector<double> tc;    // tanh(c_t)
};

// shared forward step; fills *snap when the backward pass will need it
void forward_step(const RnnModel& m, const std::vector<double>& h_prev,
                  const std::vector<double>& c_prev, uint32_t input,
                  std::vector<double>& h_out, std::vector<double>& c_out,
                  LstmSnapshot* snap) {
    uint32_t d = m.d;
    bool in_vocab = input < m.v;
    if (m.cell == CellKind::elman) {
        std::vector<double> a(d);
        kernels::matvec_rows(m.w.rec.data(), d, d, h_prev.data(), a.data(),
                             Exec::serial);
        if (in_vocab) {
            const double* e = m.w.emb.data() + size_t(input) * d;
            for (uint32_t j = 0; j < d; ++j) a[j] += e[j];
        }
        h_out.resize(d);
        for (uint32_t j = 0; j < d; ++j) h_out[j] = std::tanh(a[j]);
        return;
    }

    std::vector<double> pre(size_t(4) * d);
    kernels::matvec_rows(m.w.u_gates.data(), size_t(4) * d, d, h_prev.data(),
                         pre.data(), Exec::serial);
    if (in_vocab) {
        const double* e = m.w.emb.data() + size_t(input) * d;
        std::vector<double> wx(size_t(4) * d);
        kernels::matvec_rows(m.w.w_gates.data(), size_t(4) * d, d, e,
                             wx.data(), Exec::serial);
        for (size_t j = 0; j < size_t(4) * d; ++j) pre[j] += wx[j];
    }
    for (size_t j = 0; j < size_t(4) * d; ++j) pre[j] += m.w.b_gates[j];

    std::vector<double> gates(size_t(4) * d);
    for (uint32_t j = 0; j < d; ++j) {
        gates[j] = sigmoid(pre[j]);                   // i
        gates[d + j] = sigmoid(pre[d + j]);           // f
        gates[2 * d + j] = std::tanh(pre[2 * d + j]); // g
        gates[3 * d + j] = sigmoid(pre[3 * d + j]);   // o
    }
    h_out.resize(d);
    c_out.resize(d);
    std::vector<double> tc(d);
    for (uint32_t j = 0; j < d; ++j) {
        c_out[j] = gates[d + j] * c_prev[j] + gates[j] * gates[2 * d + j];
        tc[j] = std::tanh(c_out[j]);
        h_out[j] = gates[3 * d + j] * tc[j];
    }
    if (snap) {
        snap->gates = std::move(gates);
        snap->tc = std::move(tc);
    }
}

} // namespace

void step(const RnnModel& m, RnnState& st, uint32_t input) {
    std::vector<double> h_new, c_new;
    forward_step(m, st.h, st.c, input, h_new, c_new, nullptr);
    st.h = std::move(h_new);
    if (m.cell == CellKind::lstm) st.c = std::move(c_new);
}

std::vector<double> model_probs(const RnnModel& m, const RnnState& st) {
    std::vector<double> logits(m.v);
    kernels::matvec_rows(m.w.out.data(), m.v, m.d, st.h.data(), logits.data(),
                         default_exec());
    double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double& z : logits) {
        z = std::exp(z - mx);
        sum += z;
    }
    for (double& z : logits) z /= sum;
    return logits;
}

double bptt_window_pass(const RnnModel& m, const RnnState& state_in,
                        const uint32_t* inputs, const uint32_t* targets,
                        size_t len, Tensors* grads, RnnState* state_out) {
    require(len >= 1, "rnnlm: empty bptt window");
    const uint32_t d = m.d;
    const uint32_t v = m.v;
    const bool lstm = m.cell == CellKind::lstm;

    // forward, keeping what the backward pass needs
    std::vector<std::vector<double>> hs(len + 1), cs;
    std::vector<LstmSnapshot> snaps;
    std::vector<std::vector<double>> probs(len);
    hs[0] = state_in.h;
    if (lstm) {
        cs.resize(len + 1);
        cs[0] = state_in.c;
        snaps.resize(len);
    }

    double loss = 0.0;
    std::vector<double> logits(v);
    for (size_t t = 0; t < len; ++t) {
        require(targets[t] < v, "rnnlm: target outside training vocabulary");
        std::vector<double> c_next;
        forward_step(m, hs[t], lstm ? cs[t] : hs[t], inputs[t], hs[t + 1],
                     c_next, (lstm && grads) ? &snaps[t] : nullptr);
        if (lstm) cs[t + 1] = std::move(c_next);

        kernels::matvec_rows(m.w.out.data(), v, d, hs[t + 1].data(),
                             logits.data(), Exec::serial);
        double mx = *std::max_element(logits.begin(), logits.end());
        double sum = 0.0;
        std::vector<double>& p = probs[t];
        p.resize(v);
        for (uint32_t r = 0; r < v; ++r) {
            p[r] = std::exp(logits[r] - mx);
            sum += p[r];
        }
        loss -= logits[targets[t]] - mx - std::log(sum);
        for (uint32_t r = 0; r < v; ++r) p[r] /= sum;
    }

    if (state_out) {
        state_out->h = hs[len];
        state_out->c = lstm ? cs[len] : std::vector<double>{};
    }
    if (!grads) return loss;

    // backward with truncation at the window boundary
    std::vector<double> dh(d, 0.0), dc(d, 0.0);
    std::vector<double> dz(v), da(d);
    for (size_t t = len; t-- > 0;) {
        std::vector<double>& p = probs[t];
        for (uint32_t r = 0; r < v; ++r) dz[r] = p[r];
        dz[targets[t]] -= 1.0;

        add_outer(grads->out.data(), v, d, dz.data(), hs[t + 1].data());
        add_matT_vec(m.w.out.data(), v, d, dz.data(), dh.data());

        bool in_vocab = inputs[t] < v;
        if (!lstm) {
            for (uint32_t j = 0; j < d; ++j)
                da[j] = dh[j] * (1.0 - hs[t + 1][j] * hs[t + 1][j]);
            if (in_vocab) {
                double* ge = grads->emb.data() + size_t(inputs[t]) * d;
                for (uint32_t j = 0; j < d; ++j) ge[j] += da[j];
            }
            add_outer(grads->rec.data(), d, d, da.data(), hs[t].data());
            std::fill(dh.begin(), dh.end(), 0.0);
            add_matT_vec(m.w.rec.data(), d, d, da.data(), dh.data());
            continue;
        }

        const LstmSnapshot& sn = snaps[t];
        std::vector<double> dpre(size_t(4) * d);
        for (uint32_t j = 0; j < d; ++j) {
            double i = sn.gates[j];
            double f = sn.gates[d + j];
            double g = sn.gates[2 * d + j];
            double o = sn.gates[3 * d + j];
            double tc = sn.tc[j];
            dc[j] += dh[j] * o * (1.0 - tc * tc);
            dpre[3 * d + j] = dh[j] * tc * o * (1.0 - o);
            dpre[j] = dc[j] * g * i * (1.0 - i);
            dpre[d + j] = dc[j] * cs[t][j] * f * (1.0 - f);
            dpre[2 * d + j] = dc[j] * i * (1.0 - g * g);
        }
        for (size_t j = 0; j < size_t(4) * d; ++j) grads->b_gates[j] += dpre[j];
        add_outer(grads->u_gates.data(), size_t(4) * d, d, dpre.data(),
                  hs[t].data());
        if (in_vocab) {
            const double* e = m.w.emb.data() + size_t(inputs[t]) * d;
            add_outer(grads->w_gates.data(), size_t(4) * d, d, dpre.data(), e);
            double* ge = grads->emb.data() + size_t(inputs[t]) * d;
            add_matT_vec(m.w.w_gates.data(), size_t(4) * d, d, dpre.data(),
                         ge);
        }
        std::fill(dh.begin(), dh.end(), 0.0);
        add_matT_vec(m.w.u_gates.data(), size_t(4) * d, d, dpre.data(),
                     dh.data());
        for (uint32_t j = 0; j < d; ++j) dc[j] *= sn.gates[d + j];
    }
    return loss;
}

std::vector<double> train_model(RnnModel& m, const TokenStream& tokens,
                                const TrainConfig& cfg) {
    require(tokens.size() >= 2, "rnnlm: training stream needs >= 2 tokens");
    require(cfg.bptt_window >= 1, "rnnlm: bptt_window must be >= 1");
    require(cfg.epochs >= 1, "rnnlm: epochs must be >= 1");
    const size_t steps_total = tokens.size() - 1;
    const uint32_t batch = std::max<uint32_t>(1, cfg.batch_size);
    require(batch <= steps_total,
            "rnnlm: batch_size exceeds the number of training steps");

    std::vector<size_t> shard(batch + 1);
    for (uint32_t s = 0; s <= batch; ++s)
        shard[s] = size_t(s) * steps_total / batch;

    Tensors grads = make_tensors(m.cell, m.v, m.d);
    Tensors accum = make_tensors(m.cell, m.v, m.d);
    auto g_refs = tensor_refs(grads, m.cell);
    auto a_refs = tensor_refs(accum, m.cell);
    auto w_refs = tensor_refs(m.w, m.cell);

    std::vector<double> epoch_nll;
    for (uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        double loss_sum = 0.0;
        size_t loss_steps = 0;
        std::vector<RnnState> st(batch, make_state(m));
        std::vector<size_t> pos(shard.begin(), shard.end() - 1);

        for (;;) {
            grads.zero();
            size_t took = 0;
            for (uint32_t s = 0; s < batch; ++s) {
                size_t remain = shard[s + 1] - pos[s];
                if (remain == 0) continue;
                size_t len = std::min<size_t>(cfg.bptt_window, remain);
                double loss =
                    bptt_window_pass(m, st[s], tokens.data() + pos[s],
                                     tokens.data() + pos[s] + 1, len, &grads,
                                     &st[s]);
                require(std::isfinite(loss),
                        "rnnlm: non-finite loss at step " +
                            std::to_string(pos[s]));
                loss_sum += loss;
                loss_steps += len;
                pos[s] += len;
                took += len;
            }
            if (took == 0) break;
            for (size_t t = 0; t < w_refs.size(); ++t) {
                std::vector<double>& w = *w_refs[t].data;
                std::vector<double>& g = *g_refs[t].data;
                std::vector<double>& a = *a_refs[t].data;
                for (size_t j = 0; j < w.size(); ++j) {
                    a[j] += g[j] * g[j];
                    w[j] -= cfg.lr * g[j] / (std::sqrt(a[j]) + cfg.adagrad_eps);
                }
            }
        }
        epoch_nll.push_back(loss_sum / double(loss_steps));
    }
    return epoch_nll;
}

RnnModel train_new_model(const TokenStream& tokens, Vocabulary vocab,
                         const TrainConfig& cfg,
                         std::vector<double>* epoch_nll) {
    RnnModel m = make_model(cfg.cell, cfg.d, std::move(vocab), cfg.seed,
                            cfg.init_range);
    std::vector<double> nll = train_model(m, tokens, cfg);
    if (epoch_nll) *epoch_nll = std::move(nll);
    return m;
}

StreamEvaluator::StreamEvaluator(const RnnModel& m)
    : m_(m), st_(make_state(m)) {}

StepOutcome StreamEvaluator::next(uint32_t token) {
    probs_ = model_probs(m_, st_);
    StepOutcome out;
    out.h_query.resize(m_.d);
    for (uint32_t j = 0; j < m_.d; ++j)
        out.h_query[j] = static_cast<float>(st_.h[j]);
    out.p_model = token < m_.v ? probs_[token] : 0.0;
    step(m_, st_, token);
    return out;
}

void StreamEvaluator::reset() {
    st_ = make_state(m_);
    probs_.clear();
}

double evaluate_stream(const RnnModel& m, const TokenStream& tokens) {
    require(!tokens.empty(), "rnnlm: empty evaluation stream");
    StreamEvaluator ev(m);
    double nll = 0.0;
    for (uint32_t tok : tokens) {
        require(tok < m.v, "rnnlm: evaluate_stream requires in-vocab tokens");
        StepOutcome so = ev.next(tok);
        nll -= std::log(so.p_model);
    }
    return nll / double(tokens.size());
}

void RnnModel::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) raise("rnnlm: cannot open " + path + " for writing");
    io::write_magic(os, "UCLM");
    io::write_pod<uint32_t>(os, 1); // version
    io::write_pod<uint8_t>(os, static_cast<uint8_t>(cell));
    io::write_pod<uint32_t>(os, d);
    io::write_pod<uint32_t>(os, v);
    for (uint32_t i = 0; i < v; ++i) io::write_string(os, vocab.word_of(i));
    Tensors& wt = const_cast<Tensors&>(w);
    for (const TensorRef& ref : tensor_refs(wt, cell)) {
        std::vector<float> buf(ref.data->size());
        for (size_t j = 0; j < buf.size(); ++j)
            buf[j] = static_cast<float>((*ref.data)[j]);
        io::write_array(os, buf.data(), buf.size());
    }
    if (!os) raise("rnnlm: write failed for " + path);
}

RnnModel RnnModel::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) raise("rnnlm: cannot open " + path);
    io::check_magic(is, "UCLM", "model checkpoint");
    uint32_t version = io::read_pod<uint32_t>(is, "checkpoint version");
    require(version == 1, "rnnlm: unsupported checkpoint version");
    uint8_t cell_raw = io::read_pod<uint8_t>(is, "cell kind");
    require(cell_raw <= 1, "rnnlm: unknown cell kind in checkpoint");

    RnnModel m;
    m.cell = static_cast<CellKind>(cell_raw);
    m.d = io::read_pod<uint32_t>(is, "hidden dimension");
    m.v = io::read_pod<uint32_t>(is, "vocabulary size");
    require(m.d >= 1 && m.v >= 1, "rnnlm: corrupt checkpoint header");
    for (uint32_t i = 0; i < m.v; ++i)
        m.vocab.add(io::read_string(is, "vocabulary word"));
    require(m.vocab.size() == m.v,
            "rnnlm: duplicate word in checkpoint vocabulary");

    m.w = make_tensors(m.cell, m.v, m.d);
    for (const TensorRef& ref : tensor_refs(m.w, m.cell)) {
        std::vector<float> buf(ref.data->size());
        io::read_array(is, buf.data(), buf.size(), ref.name);
        for (size_t j = 0; j < buf.size(); ++j)
            (*ref.data)[j] = static_cast<double>(buf[j]);
    }
    return m;
}

} // namespace uclm
