#pragma once

#include <algorithm>
#include <cstddef>
#include <deque>
#include <span>
#include <vector>

// Keep the small least-squares solves serial and thread-count independent.
#define EIGEN_DONT_PARALLELIZE
#include <Eigen/Dense>

namespace karma_ev::detail {

// Anderson mixing for a fixed point x = G(x). Each call receives the
// current iterate x and g = G(x) and overwrites x with the next iterate,
// the combination of recent g's whose residuals best cancel in least
// squares. With no history it is the plain step x <- g.
class Anderson {
public:
    Anderson(std::size_t n, int depth) : n_(n), depth_(depth) {}

    void reset()
    {
        df_.clear();
        dg_.clear();
        f_prev_.clear();
        g_prev_.clear();
    }

    void step(std::span<double> x, std::span<const double> g)
    {
        std::vector<double> f(n_);
        for (std::size_t i = 0; i < n_; ++i) f[i] = g[i] - x[i];
        if (!f_prev_.empty()) {
            std::vector<double> df(n_), dg(n_);
            for (std::size_t i = 0; i < n_; ++i) {
                df[i] = f[i] - f_prev_[i];
                dg[i] = g[i] - g_prev_[i];
            }
            df_.push_back(std::move(df));
            dg_.push_back(std::move(dg));
            if (static_cast<int>(df_.size()) > depth_) {
                df_.pop_front();
                dg_.pop_front();
            }
        }
        f_prev_ = f;
        g_prev_.assign(g.begin(), g.end());

        std::copy(g.begin(), g.end(), x.begin());
        if (df_.empty()) return;

        const auto m = static_cast<Eigen::Index>(df_.size());
        Eigen::MatrixXd F(static_cast<Eigen::Index>(n_), m);
        for (Eigen::Index j = 0; j < m; ++j)
            F.col(j) = Eigen::Map<const Eigen::VectorXd>(df_[static_cast<std::size_t>(j)].data(),
                                                         static_cast<Eigen::Index>(n_));
        const Eigen::VectorXd gamma =
            F.colPivHouseholderQr().solve(Eigen::Map<const Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(n_)));
        for (Eigen::Index j = 0; j < m; ++j) {
            const double c = gamma[j];
            const auto& dg = dg_[static_cast<std::size_t>(j)];
            for (std::size_t i = 0; i < n_; ++i) x[i] -= c * dg[i];
        }
    }

private:
    std::size_t n_;
    int depth_;
    std::deque<std::vector<double>> df_, dg_;
    std::vector<double> f_prev_, g_prev_;
};

// Anderson step on a probability vector. Mixed iterates can dip below
// zero; they are kept (clipped and renormalised) only while that is
// negligible, otherwise x falls back to the plain step g. Returns false on
// fallback so the caller can drop the history.
inline bool mix_distribution(Anderson& mixer, std::span<double> x, std::span<const double> g)
{
    mixer.step(x, g);
    double clipped = 0.0;
    double total = 0.0;
    for (double& v : x) {
        if (v < 0.0) {
            clipped -= v;
            v = 0.0;
        }
        total += v;
    }
    if (clipped > 1e-12) {
        std::copy(g.begin(), g.end(), x.begin());
        return false;
    }
    for (double& v : x) v /= total;
    return true;
}

}  // namespace karma_ev::detail
