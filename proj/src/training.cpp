#include "dgon/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "dgon/errors.hpp"
#include "dgon/random.hpp"
#include "dgon/weights_io.hpp"

namespace dgon {

namespace {

constexpr std::size_t kEvalWindowChunk = 64;

const Graph& split_graph(const DatasetSplit& split) {
  if (split.train.empty()) throw DataError("training split is empty");
  const Graph& g = split.train.front().graph();
  auto check = [&](const std::vector<Trajectory>& trajs) {
    for (const auto& t : trajs) {
      if (&t.graph() != &g && !(t.graph() == g)) {
        throw ConfigError("all trajectories of a split must share one graph");
      }
    }
  };
  check(split.train);
  check(split.validation);
  check(split.test);
  return g;
}

std::vector<std::vector<std::size_t>> queries_by_window(const TripletSet& set) {
  std::vector<std::vector<std::size_t>> out(set.windows.size());
  for (std::size_t k = 0; k < set.queries.size(); ++k) out[set.queries[k].window].push_back(k);
  return out;
}

struct Batch {
  Tensor features;
  std::vector<double> queries;
  std::vector<std::size_t> query_window;
  Tensor targets;
};

Batch assemble(const DeepGraphONet& model, const TripletSet& set,
               const std::vector<std::vector<std::size_t>>& by_window,
               std::span<const std::size_t> windows) {
  Batch b;
  std::vector<const MemoryWindow*> ptrs;
  std::size_t count = 0;
  for (std::size_t w : windows) {
    ptrs.push_back(&set.windows[w]);
    count += by_window[w].size();
  }
  b.features = stack_features(model, ptrs);
  const std::size_t n = set.windows[windows.front()].node_count();
  b.targets = Tensor({count, n});
  std::size_t row = 0;
  for (std::size_t local = 0; local < windows.size(); ++local) {
    for (std::size_t qk : by_window[windows[local]]) {
      const Query& q = set.queries[qk];
      b.queries.push_back(q.offset);
      b.query_window.push_back(local);
      std::copy(q.target.data().begin(), q.target.data().end(), b.targets.row(row).begin());
      ++row;
    }
  }
  return b;
}

// Splits the window order into groups holding at least `batch_size` queries.
std::vector<std::vector<std::size_t>> make_batches(
    const std::vector<std::size_t>& order, const std::vector<std::vector<std::size_t>>& by_window,
    std::size_t batch_size) {
  std::vector<std::vector<std::size_t>> batches;
  std::vector<std::size_t> current;
  std::size_t count = 0;
  for (std::size_t w : order) {
    if (by_window[w].empty()) continue;
    current.push_back(w);
    count += by_window[w].size();
    if (count >= batch_size) {
      batches.push_back(std::move(current));
      current.clear();
      count = 0;
    }
  }
  if (!current.empty()) batches.push_back(std::move(current));
  return batches;
}

std::vector<Tensor> snapshot(const ParamStore& params) {
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < params.size(); ++i) out.push_back(params.value(ParamId{i}));
  return out;
}

void restore(ParamStore& params, const std::vector<Tensor>& values) {
  for (std::size_t i = 0; i < params.size(); ++i) params.value(ParamId{i}) = values[i];
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (validate_every < 1) throw ConfigError("validate_every must be at least 1");
  if (!(adam.lr >= 0.0)) throw ConfigError("learning rate must be non-negative");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(adam.eps > 0.0)) throw ConfigError("Adam eps must be positive");
}

std::string TrainHistory::to_csv() const {
  std::string out = "epoch,train_loss,val_loss\n";
  std::size_t v = 0;
  for (std::size_t e = 0; e < train_loss.size(); ++e) {
    out += std::to_string(e + 1) + "," + format_double(train_loss[e]) + ",";
    if (v < validation_epochs.size() && validation_epochs[v] == e + 1) {
      out += format_double(validation_loss[v]);
      ++v;
    }
    out += "\n";
  }
  return out;
}

double evaluate_loss(const DeepGraphONet& model, const Graph& g, const TripletSet& set) {
  if (set.empty()) throw DataError("cannot evaluate the loss of an empty triplet set");
  const auto by_window = queries_by_window(set);
  std::vector<std::size_t> order(set.windows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double total = 0.0;
  for (std::size_t start = 0; start < order.size(); start += kEvalWindowChunk) {
    const std::size_t stop = std::min(order.size(), start + kEvalWindowChunk);
    std::vector<std::size_t> chunk;
    for (std::size_t w = start; w < stop; ++w) {
      if (!by_window[w].empty()) chunk.push_back(w);
    }
    if (chunk.empty()) continue;
    const Batch b = assemble(model, set, by_window, chunk);
    const Tensor pred = model.predict_batch(g, b.features, b.queries, b.query_window);
    for (std::size_t k = 0; k < b.queries.size(); ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i < pred.cols(); ++i) s += std::abs(pred(k, i) - b.targets(k, i));
      total += s;
    }
  }
  return total / static_cast<double>(set.size());
}

TrainHistory train(DeepGraphONet& model, DatasetSplit& split, const TrainConfig& cfg,
                   const EpochCallback& on_epoch) {
  cfg.validate();
  if (split.train_set.empty()) throw DataError("training set has no triplets");
  const Graph& g = split_graph(split);
  if (window_mode(model.config().variant) != split.sampling.mode) {
    throw CompatibilityError("model variant " + to_string(model.config().variant) +
                             " does not match the split's window layout");
  }
  const bool resample = split.sampling.mode == WindowMode::random;
  const bool has_validation = !split.validation_set.empty();

  TrainHistory history;
  history.initial_train_loss = evaluate_loss(model, g, split.train_set);
  const auto by_window = queries_by_window(split.train_set);
  std::vector<Tensor> best;
  double best_loss = 0.0;
  ParamStore& params = model.params();
  params.zero_grad();

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    if (resample) {
      resample_windows(split.train_set, split.train, split.sampling,
                       derive_seed(cfg.seed, 0x5e5au, epoch));
    }
    std::vector<std::size_t> order(split.train_set.windows.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (cfg.shuffle) {
      Rng rng(derive_seed(cfg.seed, 0xb47cu, epoch));
      rng.shuffle(order);
    }
    const auto batches = make_batches(order, by_window, cfg.batch_size);
    double weighted = 0.0;
    std::size_t seen = 0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const Batch b = assemble(model, split.train_set, by_window, batches[bi]);
      Tape tape;
      Var pred = model.forward(tape, g, b.features, b.queries, b.query_window);
      Var loss = l1_loss(pred, b.targets);
      const double value = loss.value()[0];
      if (!std::isfinite(value)) {
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(bi));
      }
      tape.backward(loss);
      try {
        adam_step(params, cfg.adam);
      } catch (const DivergenceError& e) {
        throw DivergenceError(std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                              ", batch " + std::to_string(bi));
      }
      weighted += value * static_cast<double>(b.queries.size());
      seen += b.queries.size();
    }
    const double epoch_loss = weighted / static_cast<double>(seen);
    if (!std::isfinite(epoch_loss)) {
      throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch));
    }
    history.train_loss.push_back(epoch_loss);

    std::optional<double> val;
    if (has_validation && (epoch % cfg.validate_every == 0 || epoch == cfg.epochs)) {
      val = evaluate_loss(model, g, split.validation_set);
      if (!std::isfinite(*val)) {
        throw DivergenceError("non-finite validation loss at epoch " + std::to_string(epoch));
      }
      history.validation_epochs.push_back(epoch);
      history.validation_loss.push_back(*val);
      if (history.best_epoch == 0 || *val < best_loss) {
        best_loss = *val;
        history.best_epoch = epoch;
        best = snapshot(params);
        if (!cfg.checkpoint.empty()) save_model(model, cfg.checkpoint);
      }
    }
    history.epoch_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
    if (on_epoch) on_epoch(epoch, history.train_loss.back(), val);
  }

  if (has_validation) {
    restore(params, best);
  } else {
    history.best_epoch = cfg.epochs;
    if (!cfg.checkpoint.empty()) save_model(model, cfg.checkpoint);
  }
  return history;
}

}  // namespace dgon
