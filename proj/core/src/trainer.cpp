#include "wsol/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <memory>
#include <numeric>
#include <sstream>

#include "wsol/errors.hpp"
#include "wsol/ops.hpp"

namespace wsol {

void TrainConfig::validate() const {
  if (batch_size == 0) throw ArgumentError("train: batch_size must be positive");
  if (!(learning_rate >= 0.0)) throw ArgumentError("train: learning rate must be non-negative");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ArgumentError("train: momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ArgumentError("train: weight decay must be non-negative");
  if (!(margin >= 0.0)) throw ArgumentError("train: margin must be non-negative");
  if (!(grad_clip >= 0.0)) throw ArgumentError("train: grad_clip must be non-negative");
  mask.validate();
  model.validate();
  eval.validate();
}

namespace {

bool finite(double v) { return std::isfinite(v); }

}  // namespace

BatchResult batch_gradients(const TinyBackbone& model, std::span<const SynthSample* const> batch,
                            const ForwardConfig& cfg, const CounterRng& rng) {
  if (batch.empty()) throw ArgumentError("batch_gradients: empty batch");
  const std::size_t B = batch.size();

  struct SampleState {
    std::unique_ptr<Graph> graph;
    BoundModel bound;
    TrainForward fwd;
  };
  std::vector<SampleState> states(B);
  BatchResult result;
  for (std::size_t i = 0; i < B; ++i) {
    auto& st = states[i];
    st.graph = std::make_unique<Graph>();
    st.bound = bind(*st.graph, model);
    CounterRng sample_rng = rng.split(i);
    try {
      st.fwd = forward_train(*st.graph, st.bound, batch[i]->image, batch[i]->label, cfg, sample_rng, &result.selection);
    } catch (const NumericError& e) {
      // Non-finite activations surface here before any loss is formed.
      throw NonFiniteLossError(std::string(e.what()) + " (sample " + batch[i]->image_id + ")");
    }
  }

  const std::size_t n_layers = cfg.flags.attention ? kAttentionLayers : 0;
  std::vector<std::size_t> n_valid(n_layers, 0);
  std::vector<double> ca_sum(n_layers, 0.0);
  double cls_sum = 0.0, fc_sum = 0.0;
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < B; ++i) {
    const auto& f = states[i].fwd;
    const double cls = f.l_cls.value()[0];
    if (!finite(cls))
      throw NonFiniteLossError("non-finite classification loss for sample " + batch[i]->image_id);
    cls_sum += cls;
    for (std::size_t l = 0; l < f.layers.size(); ++l) {
      if (f.layers[l].l_ca) {
        const double v = f.layers[l].l_ca->value()[0];
        if (!finite(v)) throw NonFiniteLossError("non-finite contrastive loss for sample " + batch[i]->image_id);
        ca_sum[l] += v;
        ++n_valid[l];
      } else if (f.layers[l].ca_skipped) {
        ++skipped;
      }
    }
    if (f.l_fc) {
      const double v = f.l_fc->value()[0];
      if (!finite(v)) throw NonFiniteLossError("non-finite consistency loss for sample " + batch[i]->image_id);
      fc_sum += v;
    }
  }

  const double inv_b = 1.0 / static_cast<double>(B);
  std::vector<double> ca_layers;
  if (cfg.flags.attention && cfg.flags.contrastive)
    for (std::size_t l = 0; l < n_layers; ++l)
      ca_layers.push_back(n_valid[l] ? ca_sum[l] / static_cast<double>(n_valid[l]) : 0.0);
  std::vector<double> fc_pairs;
  if (cfg.flags.attention && cfg.flags.consistency) fc_pairs.push_back(fc_sum * inv_b);
  result.loss = total_loss(cls_sum * inv_b, ca_layers, fc_pairs, skipped);

  const auto params = model.parameters();
  result.gradients.reserve(params.size());
  for (const auto& [name, t] : params) result.gradients.emplace_back(t->shape());

  for (std::size_t i = 0; i < B; ++i) {
    auto& st = states[i];
    Graph& g = *st.graph;
    Var loss = scale(st.fwd.l_cls, inv_b);
    for (std::size_t l = 0; l < st.fwd.layers.size(); ++l)
      if (st.fwd.layers[l].l_ca)
        loss = add(loss, scale(*st.fwd.layers[l].l_ca,
                               1.0 / (static_cast<double>(n_valid[l]) * static_cast<double>(ca_layers.size()))));
    if (st.fwd.l_fc) loss = add(loss, scale(*st.fwd.l_fc, inv_b / static_cast<double>(fc_pairs.size())));
    g.backward(loss);
    const auto vars = st.bound.all();
    for (std::size_t p = 0; p < vars.size(); ++p) {
      const Tensor gp = g.grad(vars[p]);
      auto dst = result.gradients[p].data();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += gp[k];
    }
    st.graph.reset();
  }
  return result;
}

double clip_gradient_norm(std::vector<Tensor>& gradients, double max_norm) {
  if (!(max_norm > 0.0)) throw ArgumentError("clip_gradient_norm: max_norm must be positive");
  double sq = 0.0;
  for (const auto& g : gradients)
    for (double v : g.data()) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& g : gradients)
      for (auto& v : g.data()) v *= s;
  }
  return norm;
}

SgdMomentum::SgdMomentum(const TinyBackbone& model) {
  for (const auto& [name, t] : model.parameters()) velocity_.emplace_back(t->shape());
}

void SgdMomentum::step(TinyBackbone& model, const std::vector<Tensor>& gradients, double lr, double momentum,
                       double weight_decay) {
  auto params = model.parameters();
  if (gradients.size() != params.size() || velocity_.size() != params.size())
    throw ArgumentError("sgd: gradient list does not match the model");
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto w = params[p].second->data();
    auto v = velocity_[p].data();
    const auto gr = gradients[p].data();
    for (std::size_t k = 0; k < w.size(); ++k) {
      v[k] = momentum * v[k] + (gr[k] + weight_decay * w[k]);
      w[k] -= lr * v[k];
    }
  }
}

EvalResult evaluate(const TinyBackbone& model, const std::vector<SynthSample>& test,
                    const std::vector<SynthSample>& val, const EvalConfig& cfg) {
  cfg.validate();
  EvalResult out;
  std::vector<std::size_t> labels;
  for (const auto& s : test) {
    Inference inf = forward_infer(model, s.image);
    out.maps.push_back({s.image_id, std::move(inf.score_map)});
    out.predictions.push_back(inf.predicted);
    labels.push_back(s.label);
  }
  const BoxSets gt = ground_truth(test);
  out.boxes = max_box_acc_v2(out.maps, gt, cfg);
  out.top1_cls = top1_classification(out.predictions, labels);

  if (cfg.fixed_threshold) {
    out.fixed_threshold = *cfg.fixed_threshold;
  } else if (!val.empty()) {
    std::vector<ScoreMap> val_maps;
    for (const auto& s : val) val_maps.push_back({s.image_id, forward_infer(model, s.image).score_map});
    out.fixed_threshold = select_fixed_threshold(val_maps, ground_truth(val), cfg.n_thresholds, cfg.connectivity);
  } else {
    out.fixed_threshold = max_box_acc(out.maps, gt, 0.5, cfg.n_thresholds, cfg.connectivity).tau;
  }
  out.top1_loc = top1_localization(out.predictions, out.maps, labels, gt, out.fixed_threshold, cfg.connectivity);
  return out;
}

TrainResult train(const TrainConfig& train_cfg, const SynthConfig& synth_cfg, const EpochCallback& on_epoch) {
  synth_cfg.validate();
  return train(train_cfg, generate_dataset(synth_cfg), on_epoch);
}

TrainResult train(const TrainConfig& cfg, const SynthDataset& data, const EpochCallback& on_epoch) {
  cfg.validate();
  if (data.train.empty()) throw ArgumentError("train: empty training split");
  TrainResult result{TinyBackbone::init(cfg.model, cfg.seed), {}};
  SgdMomentum opt(result.model);
  const ForwardConfig fwd = cfg.forward_config();
  const CounterRng root(cfg.seed, 0x747261696eULL);

  std::vector<std::size_t> order(data.train.size());
  LossBreakdown last_finite;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    CounterRng shuffle = root.split(epoch << 32);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    EpochMetrics m;
    m.epoch = epoch;
    std::size_t n_batches = 0;
    for (std::size_t start = 0, b = 0; start < order.size(); start += cfg.batch_size, ++b) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<const SynthSample*> batch;
      for (std::size_t k = start; k < end; ++k) batch.push_back(&data.train[order[k]]);
      BatchResult br;
      try {
        br = batch_gradients(result.model, batch, fwd, root.split((epoch << 32) | (b + 1)));
      } catch (const NonFiniteLossError& e) {
        std::ostringstream os;
        os << e.what() << " (epoch " << epoch << ", batch " << b << "; last finite losses: l_cls=" << last_finite.l_cls
           << " l_ca=" << last_finite.l_ca << " l_fc=" << last_finite.l_fc << ")";
        throw NonFiniteLossError(os.str());
      }
      last_finite = br.loss;
      if (cfg.grad_clip > 0.0) clip_gradient_norm(br.gradients, cfg.grad_clip);
      opt.step(result.model, br.gradients, cfg.learning_rate, cfg.momentum, cfg.weight_decay);
      m.l_cls += br.loss.l_cls;
      m.l_ca += br.loss.l_ca;
      m.l_fc += br.loss.l_fc;
      m.n_ca_skipped += br.loss.n_ca_skipped;
      m.selection.importance += br.selection.importance;
      m.selection.dropped += br.selection.dropped;
      m.selection.empty_mask_fallbacks += br.selection.empty_mask_fallbacks;
      ++n_batches;
    }
    m.l_cls /= static_cast<double>(n_batches);
    m.l_ca /= static_cast<double>(n_batches);
    m.l_fc /= static_cast<double>(n_batches);

    const bool do_eval = epoch == cfg.epochs || (cfg.eval_every > 0 && epoch % cfg.eval_every == 0);
    if (do_eval && !data.test.empty()) {
      const EvalResult ev = evaluate(result.model, data.test, data.val, cfg.eval);
      m.maxboxaccv2 = ev.boxes.mean;
      m.top1_loc = ev.top1_loc;
      m.top1_cls = ev.top1_cls;
    } else if (!result.history.empty()) {
      const auto& prev = result.history.back();
      m.maxboxaccv2 = prev.maxboxaccv2;
      m.top1_loc = prev.top1_loc;
      m.top1_cls = prev.top1_cls;
    }
    result.history.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return result;
}

std::string history_csv(const std::vector<EpochMetrics>& history) {
  std::ostringstream os;
  os << "epoch,l_cls,l_ca,l_fc,maxboxaccv2,top1_loc,top1_cls\n";
  char buf[256];
  for (const auto& m : history) {
    std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g,%.9g,%.6f,%.6f,%.6f\n", m.epoch, m.l_cls, m.l_ca, m.l_fc,
                  m.maxboxaccv2, m.top1_loc, m.top1_cls);
    os << buf;
  }
  return os.str();
}

}  // namespace wsol
