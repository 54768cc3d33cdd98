#include "porrl/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace porrl {

void ConfidenceParams::validate() const {
    if (!(delta > 0.0 && delta < 1.0)) throw SpecError("delta must lie in (0, 1)");
    if (!(bonus_scale > 0.0)) throw SpecError("bonus_scale must be positive");
    if (!(eta >= 0.0)) throw SpecError("noise scale must be nonnegative");
    if (!(reward_bound > 0.0)) throw SpecError("reward bound must be positive");
    if (planned_episodes < 1) throw SpecError("planned episodes must be positive");
    if (horizon < 1) throw SpecError("horizon must be positive");
    if (!(zeta_prefix > 0.0)) throw SpecError("zeta_prefix must be positive");
}

LeastSquaresFit::LeastSquaresFit(std::size_t num_candidates)
    : loss_(num_candidates, 0.0), dist_(num_candidates * num_candidates, 0.0) {}

void LeastSquaresFit::add(std::uint64_t key, const std::vector<double>& predictions, double o) {
    const std::size_t K = loss_.size();
    if (predictions.size() != K) throw SpecError("prediction vector does not match the class size");
    for (std::size_t i = 0; i < K; ++i) {
        const double e = predictions[i] - o;
        loss_[i] += e * e;
    }
    for (std::size_t i = 0; i < K; ++i) {
        for (std::size_t j = i + 1; j < K; ++j) {
            const double d = predictions[i] - predictions[j];
            dist_[i * K + j] += d * d;
            dist_[j * K + i] = dist_[i * K + j];
        }
    }
    best_ = static_cast<std::size_t>(std::min_element(loss_.begin(), loss_.end()) - loss_.begin());
    keys_.push_back(key);
    obs_.push_back(o);
}

std::vector<double> class_predictions(const FiniteFunctionClass& cls, std::uint64_t code, Activation act) {
    std::vector<double> out(cls.size());
    for (std::size_t i = 0; i < cls.size(); ++i) out[i] = activate(act, cls.values[i][code]);
    return out;
}

std::size_t least_squares_fit(const FiniteFunctionClass& cls,
                              const std::vector<std::pair<std::uint64_t, double>>& data, Activation act) {
    if (cls.size() == 0) throw SpecError("least squares needs a nonempty class");
    std::size_t best = 0;
    double best_loss = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cls.size(); ++i) {
        double loss = 0.0;
        for (const auto& [code, o] : data) {
            const double e = activate(act, cls.values[i].at(code)) - o;
            loss += e * e;
        }
        if (loss < best_loss) {
            best_loss = loss;
            best = i;
        }
    }
    return best;
}

double beta_threshold(int t, std::size_t class_size, const ConfidenceParams& p, double delta) {
    if (t < 1) throw SpecError("beta threshold needs t >= 1");
    if (class_size == 0) throw SpecError("beta threshold needs a nonempty class");
    const double td = static_cast<double>(t);
    const double d = delta / (2.0 * td * td * p.horizon);
    const double log_cover = std::log(static_cast<double>(class_size) / d);
    const double alpha = (td * p.reward_bound + td * p.eta * std::log(td / d)) / p.planned_episodes;
    return p.bonus_scale * (p.eta * p.eta * log_cover + alpha);
}

double beta_threshold(int t, std::size_t class_size, const ConfidenceParams& p) {
    return beta_threshold(t, class_size, p, p.delta);
}

std::vector<bool> confidence_set_F(const LeastSquaresFit& fit, double beta) {
    std::vector<bool> mask(fit.size());
    const std::size_t best = fit.best();
    for (std::size_t i = 0; i < fit.size(); ++i) mask[i] = i == best || fit.distance(i, best) <= beta;
    return mask;
}

double reward_bonus_gamma(const FiniteFunctionClass& cls, const std::vector<bool>& mask, std::uint64_t code) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < cls.size(); ++i) {
        if (!mask[i]) continue;
        lo = std::min(lo, cls.values[i][code]);
        hi = std::max(hi, cls.values[i][code]);
    }
    if (hi < lo) throw SpecError("reward bonus needs a nonempty confidence set");
    return hi - lo;
}

double l1_radius(std::uint64_t n, double delta, int S, int A, double zeta_prefix, double bonus_scale) {
    if (n == 0) return 2.0;
    const double nd = static_cast<double>(n);
    const double inner = (S * std::log(2.0) + std::log(nd * (nd + 1.0) * S * A / delta)) / (2.0 * nd);
    return std::min(2.0, bonus_scale * zeta_prefix * std::sqrt(inner));
}

double transition_bonus_xi(std::uint64_t n, int t, double delta, int S, int A, int H, double bonus_scale) {
    if (n == 0) return 2.0;
    const double nd = static_cast<double>(n), td = static_cast<double>(t);
    const double inner = (H * std::log(6.0 * H * S * A) + S * std::log(8.0 * td * td * H * H) +
                          std::log(32.0 * td * td * nd / delta)) /
                         (2.0 * nd);
    return std::min(2.0, bonus_scale * 4.0 * std::sqrt(inner));
}

double z_of(double D, double bonus_scale) {
    if (!(D > 0.0)) throw SpecError("z(D) needs D > 0");
    return bonus_scale * std::max(D, 2.0 * D * std::sqrt(std::log(std::max(D, M_E))));
}

TransitionFitState::TransitionFitState(int S, int A)
    : S_(S), A_(A), n_sa_(static_cast<std::size_t>(S) * A, 0), n_sas_(static_cast<std::size_t>(S) * A * S, 0) {}

void TransitionFitState::add(int s, int a, int s_next) {
    ++n_sa_[static_cast<std::size_t>(s) * A_ + a];
    ++n_sas_[(static_cast<std::size_t>(s) * A_ + a) * S_ + s_next];
}

std::vector<double> TransitionFitState::estimate() const {
    std::vector<double> P(n_sas_.size());
    for (std::size_t sa = 0; sa < n_sa_.size(); ++sa) {
        for (int j = 0; j < S_; ++j) {
            P[sa * S_ + j] = n_sa_[sa] == 0 ? 1.0 / S_
                                            : static_cast<double>(n_sas_[sa * S_ + j]) / static_cast<double>(n_sa_[sa]);
        }
    }
    return P;
}

double TransitionFitState::l1_distance(const std::vector<double>& kernel, int s, int a) const {
    const std::size_t sa = static_cast<std::size_t>(s) * A_ + a;
    double d = 0.0;
    for (int j = 0; j < S_; ++j) {
        const double phat = n_sa_[sa] == 0 ? 1.0 / S_
                                           : static_cast<double>(n_sas_[sa * S_ + j]) / static_cast<double>(n_sa_[sa]);
        d += std::abs(kernel[sa * S_ + j] - phat);
    }
    return d;
}

}  // namespace porrl
