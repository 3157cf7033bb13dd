#include "cslr/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace cslr {

namespace {

// Large negative sentinel standing in for log(0); absorbing under log_add.
constexpr double kLogZero = -1e30;

double log_add(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b <= kLogZero * 0.5) return a;
  return a + std::log1p(std::exp(b - a));
}

void validate_target(const GlossSequence& target, std::size_t width) {
  for (int id : target.ids)
    if (id < 1 || id >= static_cast<int>(width))
      throw DataError("ctc: target id " + std::to_string(id) +
                      " outside [1, " + std::to_string(width - 1) + "]");
}

}  // namespace

std::size_t ctc_required_length(const GlossSequence& target) {
  std::size_t repeats = 0;
  for (std::size_t i = 1; i < target.ids.size(); ++i)
    if (target.ids[i] == target.ids[i - 1]) ++repeats;
  return target.ids.size() + repeats;
}

CtcResult ctc_loss(const TensorPtr& log_probs, const GlossSequence& target) {
  const std::size_t t_len = log_probs->rows();
  const std::size_t width = log_probs->cols();
  validate_target(target, width);
  if (t_len < ctc_required_length(target))
    throw InfeasibleAlignmentError(
        "ctc: target needs at least " + std::to_string(ctc_required_length(target)) +
        " frames, got " + std::to_string(t_len));

  // Blank-extended label sequence: blank, l1, blank, ..., lL, blank.
  const std::size_t l = target.ids.size();
  const std::size_t s_len = 2 * l + 1;
  std::vector<int> labels(s_len, kBlankIndex);
  for (std::size_t i = 0; i < l; ++i) labels[2 * i + 1] = target.ids[i];

  auto lp = [&](std::size_t t, int k) { return log_probs->at(t, static_cast<std::size_t>(k)); };
  auto can_skip = [&](std::size_t s) {
    return s >= 2 && labels[s] != kBlankIndex && labels[s] != labels[s - 2];
  };

  std::vector<double> alpha(t_len * s_len, kLogZero), beta(t_len * s_len, kLogZero);

  alpha[0] = lp(0, labels[0]);
  if (s_len > 1) alpha[1] = lp(0, labels[1]);
  for (std::size_t t = 1; t < t_len; ++t)
    for (std::size_t s = 0; s < s_len; ++s) {
      double acc = alpha[(t - 1) * s_len + s];
      if (s >= 1) acc = log_add(acc, alpha[(t - 1) * s_len + s - 1]);
      if (can_skip(s)) acc = log_add(acc, alpha[(t - 1) * s_len + s - 2]);
      alpha[t * s_len + s] = acc <= kLogZero * 0.5 ? kLogZero : acc + lp(t, labels[s]);
    }

  double log_p = alpha[(t_len - 1) * s_len + s_len - 1];
  if (s_len > 1) log_p = log_add(log_p, alpha[(t_len - 1) * s_len + s_len - 2]);
  if (log_p <= kLogZero * 0.5)
    throw InfeasibleAlignmentError("ctc: no feasible alignment path");

  beta[(t_len - 1) * s_len + s_len - 1] = lp(t_len - 1, labels[s_len - 1]);
  if (s_len > 1)
    beta[(t_len - 1) * s_len + s_len - 2] = lp(t_len - 1, labels[s_len - 2]);
  for (std::size_t t = t_len - 1; t-- > 0;)
    for (std::size_t s = 0; s < s_len; ++s) {
      double acc = beta[(t + 1) * s_len + s];
      if (s + 1 < s_len) acc = log_add(acc, beta[(t + 1) * s_len + s + 1]);
      if (s + 2 < s_len && can_skip(s + 2)) acc = log_add(acc, beta[(t + 1) * s_len + s + 2]);
      beta[t * s_len + s] = acc <= kLogZero * 0.5 ? kLogZero : acc + lp(t, labels[s]);
    }

  // d(-logP)/d lp(t,k) = -(1/P) sum_{s: lab(s)=k} alpha_t(s) beta_t(s) / p_t(k)
  auto grad = Tensor::zeros(log_probs->shape);
  for (std::size_t t = 0; t < t_len; ++t) {
    std::vector<double> acc(width, kLogZero);
    for (std::size_t s = 0; s < s_len; ++s) {
      const double ab = alpha[t * s_len + s] + beta[t * s_len + s];
      if (ab <= kLogZero * 0.5) continue;
      auto& slot = acc[static_cast<std::size_t>(labels[s])];
      slot = log_add(slot, ab);
    }
    for (std::size_t k = 0; k < width; ++k) {
      if (acc[k] <= kLogZero * 0.5) continue;
      grad->at(t, k) = -std::exp(acc[k] - lp(t, static_cast<int>(k)) - log_p);
    }
  }

  CtcResult res;
  res.loss = -log_p;
  res.grad = grad;
  if (!std::isfinite(res.loss)) throw NumericError("ctc: non-finite loss");
  check_finite(*grad, "ctc_loss gradient");
  return res;
}

double ctc_loss_on_tape(Tape* tape, const TensorPtr& log_probs,
                        const GlossSequence& target, double grad_scale) {
  CtcResult res = ctc_loss(log_probs, target);
  if (tape && log_probs->requires_grad) {
    tape->record([log_probs, g = res.grad, grad_scale] {
      log_probs->ensure_grad();
      for (std::size_t i = 0; i < log_probs->size(); ++i)
        log_probs->grad[i] += grad_scale * g->values[i];
    });
  }
  return res.loss;
}

GlossSequence greedy_decode(const TensorPtr& log_probs) {
  const std::size_t t_len = log_probs->rows(), width = log_probs->cols();
  GlossSequence out;
  int prev = kBlankIndex;
  for (std::size_t t = 0; t < t_len; ++t) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < width; ++k)
      if (log_probs->at(t, k) > log_probs->at(t, best)) best = k;
    const int sym = static_cast<int>(best);
    if (sym != kBlankIndex && sym != prev) out.ids.push_back(sym);
    prev = sym;
  }
  return out;
}

GlossSequence beam_decode(const TensorPtr& log_probs, std::size_t beam_width) {
  if (beam_width < 1) throw ConfigError("beam_decode: beam width must be >= 1");
  const std::size_t t_len = log_probs->rows(), width = log_probs->cols();

  struct Score {
    double blank = kLogZero;      // prob of the prefix ending in blank
    double non_blank = kLogZero;  // prob of the prefix ending in its last label
    double total() const { return log_add(blank, non_blank); }
  };
  using Beams = std::map<std::vector<int>, Score>;

  Beams beams;
  beams[{}] = Score{0.0, kLogZero};

  for (std::size_t t = 0; t < t_len; ++t) {
    Beams next;
    for (const auto& [prefix, sc] : beams) {
      const double p_total = sc.total();
      // stay on blank
      {
        auto& ns = next[prefix];
        ns.blank = log_add(ns.blank, p_total + log_probs->at(t, 0));
      }
      for (std::size_t k = 1; k < width; ++k) {
        const double lp = log_probs->at(t, k);
        const int sym = static_cast<int>(k);
        if (!prefix.empty() && prefix.back() == sym) {
          // repeat collapses unless separated by blank
          auto& same = next[prefix];
          same.non_blank = log_add(same.non_blank, sc.non_blank + lp);
          auto ext = prefix;
          ext.push_back(sym);
          auto& ns = next[ext];
          ns.non_blank = log_add(ns.non_blank, sc.blank + lp);
        } else {
          auto ext = prefix;
          ext.push_back(sym);
          auto& ns = next[ext];
          ns.non_blank = log_add(ns.non_blank, p_total + lp);
        }
      }
    }
    if (next.size() > beam_width) {
      std::vector<std::pair<double, const std::vector<int>*>> ranked;
      ranked.reserve(next.size());
      for (const auto& [prefix, sc] : next) ranked.emplace_back(sc.total(), &prefix);
      std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(beam_width),
                        ranked.end(),
                        [](const auto& a, const auto& b) { return a.first > b.first; });
      Beams pruned;
      for (std::size_t i = 0; i < beam_width; ++i)
        pruned.emplace(*ranked[i].second, next[*ranked[i].second]);
      next = std::move(pruned);
    }
    beams = std::move(next);
  }

  const std::vector<int>* best = nullptr;
  double best_score = -std::numeric_limits<double>::infinity();
  for (const auto& [prefix, sc] : beams) {
    const double s = sc.total();
    if (s > best_score) {
      best_score = s;
      best = &prefix;
    }
  }
  GlossSequence out;
  if (best) out.ids = *best;
  return out;
}

}  // namespace cslr
