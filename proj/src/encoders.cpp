#include "mvmt/encoders.hpp"

#include <cmath>

#include "mvmt/errors.hpp"

namespace mvmt {

void EncoderConfig::validate() const {
    if (hidden_dim < 2 || hidden_dim % 2 != 0) {
        raise(ErrorKind::Config, "hidden dimension must be even and at least 2, got " +
                                     std::to_string(hidden_dim));
    }
    if (vocab_size == 0) raise(ErrorKind::Config, "encoder vocabulary size must be positive");
    if (kernel_width % 2 == 0 || kernel_width == 0) {
        raise(ErrorKind::Config, "kernel width must be odd, got " + std::to_string(kernel_width));
    }
    if (demo_dim == 0) raise(ErrorKind::Config, "demographic dimension must be positive");
}

void register_encoder_params(ParamStore& store, const EncoderConfig& config, Rng& rng,
                             bool feature_view, bool visit_view) {
    config.validate();
    const std::size_t d = config.hidden_dim;
    if (feature_view) {
        store.add_glorot("enc.conv.kernels", {config.vocab_size, config.feature_filters(), config.kernel_width},
                         config.kernel_width, config.feature_filters(), rng);
        store.add("enc.conv.bias", {config.vocab_size, config.feature_filters()});
    }
    if (visit_view) {
        store.add_glorot("enc.embed.weight", {d, config.vocab_size}, config.vocab_size, d, rng);
        store.add("enc.embed.bias", {d});
        store.add_glorot("enc.code_attn.w1", {d, d}, d, d, rng);
        store.add("enc.code_attn.b1", {d});
        store.add_glorot("enc.code_attn.w2", {1, d}, d, 1, rng);
        store.add("enc.code_attn.b2", {1});
        store.add_glorot("enc.demo.weight", {d, d + config.demo_dim}, d + config.demo_dim, d, rng);
        for (const char* dir : {"fwd", "bwd"}) {
            const std::string p = std::string("enc.gru.") + dir + ".";
            for (const char* gate : {"update", "reset", "cand"}) {
                store.add_glorot(p + "w_" + gate, {d, d}, d, d, rng);
                store.add_glorot(p + "u_" + gate, {d, d}, d, d, rng);
                store.add(p + "b_" + gate, {d});
            }
        }
        const std::size_t s = config.visit_state_dim();
        store.add_glorot("enc.out.w1", {s, s}, s, s, rng);
        store.add("enc.out.b1", {s});
        store.add_glorot("enc.out.w2", {s, s}, s, s, rng);
        store.add("enc.out.b2", {s});
    }
}

ag::Var encode_feature_view(const Tensor& visit_matrix, ParamStore& store,
                            const EncoderConfig& config) {
    if (visit_matrix.rank() != 2 || visit_matrix.extent(1) != config.vocab_size) {
        raise(ErrorKind::Dimension, "visit matrix " + visit_matrix.shape_str() +
                                        " does not match vocabulary size " +
                                        std::to_string(config.vocab_size));
    }
    const std::size_t t_len = visit_matrix.extent(0);
    ag::Var kernels = store.bind("enc.conv.kernels");
    ag::Var bias = store.bind("enc.conv.bias");
    std::vector<ag::Var> rows;
    rows.reserve(config.vocab_size);
    for (std::size_t i = 0; i < config.vocab_size; ++i) {
        Tensor column({t_len});
        for (std::size_t t = 0; t < t_len; ++t) column[t] = visit_matrix.at(t, i);
        ag::Var conv = ag::conv1d_single_channel(ag::constant(std::move(column)),
                                                 ag::slice_block(kernels, i), ag::row(bias, i));
        rows.push_back(ag::maxpool_over_time(conv));
    }
    return ag::stack_rows(rows);
}

ag::Var encode_feature_view_fast(const Tensor& visit_matrix, ParamStore& store,
                                 const EncoderConfig& config) {
    if (visit_matrix.rank() != 2 || visit_matrix.extent(1) != config.vocab_size) {
        raise(ErrorKind::Dimension, "visit matrix " + visit_matrix.shape_str() +
                                        " does not match vocabulary size " +
                                        std::to_string(config.vocab_size));
    }
    return ag::feature_view_fused(visit_matrix, store.bind("enc.conv.kernels"),
                                  store.bind("enc.conv.bias"));
}

ag::Var embed_codes(const Visit& visit, ParamStore& store, const EncoderConfig& config) {
    (void)config;
    if (visit.code_indices.empty()) raise(ErrorKind::Domain, "cannot embed an empty visit");
    ag::Var selected = ag::gather_columns(store.bind("enc.embed.weight"), visit.code_indices);
    return ag::relu(ag::add_row_broadcast(selected, store.bind("enc.embed.bias")));
}

std::pair<ag::Var, ag::Var> visit_code_attention(const ag::Var& code_embeddings, ParamStore& store,
                                                 const EncoderConfig& config) {
    (void)config;
    ag::Var hidden = ag::tanh_op(
        ag::linear_rows(code_embeddings, store.bind("enc.code_attn.w1"), store.bind("enc.code_attn.b1")));
    ag::Var scores =
        ag::flatten(ag::linear_rows(hidden, store.bind("enc.code_attn.w2"), store.bind("enc.code_attn.b2")));
    ag::Var weights = ag::softmax(scores);
    return {weights, ag::weighted_sum_rows(weights, code_embeddings)};
}

ag::Var fuse_demographics(const ag::Var& visit_vector, const Tensor& demo_one_hot,
                          ParamStore& store, const EncoderConfig& config) {
    if (demo_one_hot.size() != config.demo_dim) {
        raise(ErrorKind::Dimension, "demographics vector has length " + std::to_string(demo_one_hot.size()) +
                                        ", expected " + std::to_string(config.demo_dim));
    }
    ag::Var joined = ag::concat({visit_vector, ag::constant(demo_one_hot)});
    return ag::matvec(store.bind("enc.demo.weight"), joined);
}

Tensor temporal_encoding(double t_j, double t_T, std::size_t d) {
    if (t_j > t_T) raise(ErrorKind::Ordering, "temporal encoding requires t_j <= t_T");
    if (d < 2 || d % 2 != 0) raise(ErrorKind::Domain, "temporal encoding needs an even dimension");
    const double delta = t_T - t_j;
    Tensor out({d});
    for (std::size_t t = 0; 2 * t < d; ++t) {
        const double divisor = std::pow(10000.0, (2.0 * static_cast<double>(t)) / static_cast<double>(d));
        out[2 * t] = std::sin(delta / divisor);
        out[2 * t + 1] = std::cos(delta / divisor);
    }
    return out;
}

VisitViewOutput encode_visit_view(const PatientRecord& record, ParamStore& store,
                                  const EncoderConfig& config) {
    if (record.visits.empty()) raise(ErrorKind::Domain, "record has no visits");
    const std::size_t t_len = record.visits.size();
    const std::size_t d = config.hidden_dim;
    const double t_last = static_cast<double>(record.visits.back().timestamp_days);
    const Tensor demo = record.demographics.one_hot();

    VisitViewOutput out;
    std::vector<ag::Var> visit_inputs;
    visit_inputs.reserve(t_len);
    for (const Visit& visit : record.visits) {
        ag::Var embeddings = embed_codes(visit, store, config);
        auto [alpha, pooled] = visit_code_attention(embeddings, store, config);
        out.code_attention.push_back(alpha);
        ag::Var fused = fuse_demographics(pooled, demo, store, config);
        Tensor delta = temporal_encoding(static_cast<double>(visit.timestamp_days), t_last, d);
        visit_inputs.push_back(ag::add(fused, ag::constant(std::move(delta))));
    }

    auto gru_params = [&](const char* dir) {
        const std::string p = std::string("enc.gru.") + dir + ".";
        ag::GruParams g;
        g.w_update = store.bind(p + "w_update");
        g.u_update = store.bind(p + "u_update");
        g.b_update = store.bind(p + "b_update");
        g.w_reset = store.bind(p + "w_reset");
        g.u_reset = store.bind(p + "u_reset");
        g.b_reset = store.bind(p + "b_reset");
        g.w_cand = store.bind(p + "w_cand");
        g.u_cand = store.bind(p + "u_cand");
        g.b_cand = store.bind(p + "b_cand");
        return g;
    };

    const ag::GruParams fwd = gru_params("fwd");
    const ag::GruParams bwd = gru_params("bwd");
    std::vector<ag::Var> forward_states(t_len), backward_states(t_len);
    ag::Var state = ag::constant(Tensor::zeros({d}));
    for (std::size_t j = 0; j < t_len; ++j) {
        state = ag::gru_cell(visit_inputs[j], state, fwd);
        forward_states[j] = state;
    }
    state = ag::constant(Tensor::zeros({d})); // h_{T+1} = 0
    for (std::size_t j = t_len; j-- > 0;) {
        state = ag::gru_cell(visit_inputs[j], state, bwd);
        backward_states[j] = state;
    }

    std::vector<ag::Var> steps;
    steps.reserve(t_len);
    for (std::size_t j = 0; j < t_len; ++j) {
        steps.push_back(ag::concat({forward_states[j], backward_states[j]}));
    }
    out.visit_states = ag::stack_rows(steps);

    ag::Var last = steps.back();
    ag::Var hidden = ag::relu(ag::affine(last, store.bind("enc.out.w1"), store.bind("enc.out.b1")));
    out.patient_vector = ag::affine(hidden, store.bind("enc.out.w2"), store.bind("enc.out.b2"));
    return out;
}

} // namespace mvmt
