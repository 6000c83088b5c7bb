#pragma once

// Minimal feed-forward networks with manual backprop. Gradients are available
// with respect to both the parameters (actor/critic updates) and the inputs
// (action-gradient of the critic). Hidden layers share one activation, the
// output layer is linear.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "wppg/numeric.hpp"

namespace wppg {

enum class Activation : std::uint32_t { Tanh = 0, Relu = 1 };

inline Mat gather_rows(const Mat& m, const std::vector<std::size_t>& idx) {
    Mat out(idx.size(), m.cols);
    for (std::size_t i = 0; i < idx.size(); ++i)
        std::memcpy(out.row(i), m.row(idx[i]), m.cols * sizeof(double));
    return out;
}

class MlpNet {
public:
    MlpNet() = default;

    /// widths = {input, hidden..., output}
    MlpNet(std::vector<std::size_t> widths, Activation act) : widths_(std::move(widths)), act_(act) {
        if (widths_.size() < 2) throw std::invalid_argument("MlpNet: need at least input and output widths");
        for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
            weights_.emplace_back(widths_[l], widths_[l + 1]);  // stored input-major: h = x * W + b
            biases_.emplace_back(widths_[l + 1], 0.0);
        }
    }

    /// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, zero biases.
    void init_params(Rng& rng) {
        for (std::size_t l = 0; l < weights_.size(); ++l) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(widths_[l]));
            for (double& w : weights_[l].data) w = rng.uniform(-bound, bound);
            for (double& b : biases_[l]) b = 0.0;
        }
    }

    std::size_t input_width() const { return widths_.front(); }
    std::size_t output_width() const { return widths_.back(); }
    const std::vector<std::size_t>& widths() const { return widths_; }
    Activation activation() const { return act_; }

    std::size_t num_params() const {
        std::size_t n = 0;
        for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].data.size() + biases_[l].size();
        return n;
    }

    Vec get_params() const {
        Vec out;
        out.reserve(num_params());
        for (std::size_t l = 0; l < weights_.size(); ++l) {
            out.insert(out.end(), weights_[l].data.begin(), weights_[l].data.end());
            out.insert(out.end(), biases_[l].begin(), biases_[l].end());
        }
        return out;
    }

    void set_params(const Vec& p) {
        if (p.size() != num_params()) throw std::invalid_argument("set_params: length mismatch");
        std::size_t off = 0;
        for (std::size_t l = 0; l < weights_.size(); ++l) {
            std::copy(p.begin() + off, p.begin() + off + weights_[l].data.size(), weights_[l].data.begin());
            off += weights_[l].data.size();
            std::copy(p.begin() + off, p.begin() + off + biases_[l].size(), biases_[l].begin());
            off += biases_[l].size();
        }
    }

    // ---- single-sample path with an activation cache ----

    Vec forward(const Vec& x) {
        if (x.size() != input_width()) throw std::invalid_argument("forward: input width mismatch");
        cache_.assign(1, x);
        Vec h = x;
        for (std::size_t l = 0; l < weights_.size(); ++l) {
            Vec z = biases_[l];
            const Mat& w = weights_[l];
            for (std::size_t k = 0; k < w.rows; ++k) {
                const double hk = h[k];
                const double* wr = w.row(k);
                for (std::size_t j = 0; j < w.cols; ++j) z[j] += hk * wr[j];
            }
            if (l + 1 < weights_.size()) apply_act(z);
            h = std::move(z);
            cache_.push_back(h);
        }
        return h;
    }

    /// d(upstream . output)/d(theta), flattened in get_params() order.
    /// Requires a forward() on the same x first.
    Vec grad_params(const Vec& x, const Vec& upstream) {
        check_cache(x, upstream);
        Vec grad(num_params(), 0.0);
        backward_single(upstream, &grad, nullptr);
        return grad;
    }

    /// d(upstream . output)/d(x).
    Vec grad_input(const Vec& x, const Vec& upstream) {
        check_cache(x, upstream);
        Vec dx;
        backward_single(upstream, nullptr, &dx);
        return dx;
    }

    // ---- batched path (rows are samples); pure, no shared state ----

    struct BatchCache {
        std::vector<Mat> acts;  // acts[0] = input, acts.back() = output
    };

    Mat forward_batch(const Mat& x, BatchCache* cache = nullptr) const {
        if (x.cols != input_width()) throw std::invalid_argument("forward_batch: input width mismatch");
        if (cache) {
            cache->acts.clear();
            cache->acts.reserve(weights_.size() + 1);
            cache->acts.push_back(x);
        }
        Mat h;
        const Mat* cur = &x;
        for (std::size_t l = 0; l < weights_.size(); ++l) {
            Mat z(cur->rows, weights_[l].cols);
            layer_pass(*cur, weights_[l], biases_[l], l + 1 < weights_.size(), z);
            if (cache) {
                cache->acts.push_back(std::move(z));
                cur = &cache->acts.back();
            } else {
                h = std::move(z);
                cur = &h;
            }
        }
        return cache ? cache->acts.back() : std::move(h);
    }

    /// Backprop of sum_i upstream_i . output_i through a cached batch forward.
    /// param_grad (if given) receives the sum over rows; input_grad (if given)
    /// receives per-row input gradients.
    void backward_batch(const BatchCache& cache, const Mat& upstream, Vec* param_grad, Mat* input_grad) const {
        if (cache.acts.size() != weights_.size() + 1) throw std::logic_error("backward_batch: stale cache");
        if (upstream.rows != cache.acts[0].rows || upstream.cols != output_width())
            throw std::invalid_argument("backward_batch: upstream shape mismatch");
        if (param_grad) param_grad->assign(num_params(), 0.0);

        Mat d = upstream;
        std::size_t off_end = num_params();
        for (std::size_t l = weights_.size(); l-- > 0;) {
            const Mat& w = weights_[l];
            const Mat& hin = cache.acts[l];
            const std::size_t kk = w.rows, n = w.cols, rows = d.rows;
            const bool need_dh = l > 0 || input_grad;
            Mat dh;
            if (need_dh) dh = Mat(rows, kk);

            double* gw = nullptr;
            double* gb = nullptr;
            if (param_grad) {
                const std::size_t wsz = w.data.size(), bsz = biases_[l].size();
                gw = param_grad->data() + (off_end - wsz - bsz);
                gb = param_grad->data() + (off_end - bsz);
                off_end -= wsz + bsz;
            }

            if (n <= 4) {
                // Narrow upstream (network outputs): work against a transposed
                // weight copy so the inner loops run over the wide k axis.
                Mat wt(n, kk);
                for (std::size_t k = 0; k < kk; ++k)
                    for (std::size_t j = 0; j < n; ++j) wt(j, k) = w(k, j);
                Mat gwt;
                if (param_grad) gwt = Mat(n, kk);
                for (std::size_t i = 0; i < rows; ++i) {
                    const double* __restrict drow = d.row(i);
                    const double* __restrict hrow = hin.row(i);
                    double* __restrict dhrow = need_dh ? dh.row(i) : nullptr;
                    if (need_dh) std::memset(dhrow, 0, kk * sizeof(double));
                    for (std::size_t j = 0; j < n; ++j) {
                        const double dj = drow[j];
                        if (dj == 0.0) continue;
                        if (gb) gb[j] += dj;
                        const double* __restrict wtr = wt.row(j);
                        if (need_dh)
                            for (std::size_t k = 0; k < kk; ++k) dhrow[k] += dj * wtr[k];
                        if (gw) {
                            double* __restrict gwtr = gwt.row(j);
                            for (std::size_t k = 0; k < kk; ++k) gwtr[k] += dj * hrow[k];
                        }
                    }
                }
                if (gw)
                    for (std::size_t k = 0; k < kk; ++k)
                        for (std::size_t j = 0; j < n; ++j) gw[k * n + j] += gwt(j, k);
            } else {
                std::size_t i = 0;
                for (; i + 2 <= rows; i += 2) {
                    const double* __restrict d0 = d.row(i);
                    const double* __restrict d1 = d.row(i + 1);
                    const double* __restrict h0 = hin.row(i);
                    const double* __restrict h1 = hin.row(i + 1);
                    if (gw) {
                        for (std::size_t k = 0; k < kk; ++k) {
                            const double a0 = h0[k], a1 = h1[k];
                            double* __restrict gwr = gw + k * n;
                            for (std::size_t j = 0; j < n; ++j) gwr[j] += a0 * d0[j] + a1 * d1[j];
                        }
                        for (std::size_t j = 0; j < n; ++j) gb[j] += d0[j] + d1[j];
                    }
                    if (need_dh) {
                        double* __restrict dh0 = dh.row(i);
                        double* __restrict dh1 = dh.row(i + 1);
                        for (std::size_t k = 0; k < kk; ++k) {
                            const double* __restrict wr = w.row(k);
                            double acc0 = 0.0, acc1 = 0.0;
                            for (std::size_t j = 0; j < n; ++j) {
                                acc0 += d0[j] * wr[j];
                                acc1 += d1[j] * wr[j];
                            }
                            dh0[k] = acc0;
                            dh1[k] = acc1;
                        }
                    }
                }
                for (; i < rows; ++i) {
                    const double* __restrict drow = d.row(i);
                    const double* __restrict hrow = hin.row(i);
                    if (gw) {
                        for (std::size_t k = 0; k < kk; ++k) {
                            const double hk = hrow[k];
                            double* __restrict gwr = gw + k * n;
                            for (std::size_t j = 0; j < n; ++j) gwr[j] += hk * drow[j];
                        }
                        for (std::size_t j = 0; j < n; ++j) gb[j] += drow[j];
                    }
                    if (need_dh) {
                        double* __restrict dhrow = dh.row(i);
                        for (std::size_t k = 0; k < kk; ++k) {
                            const double* __restrict wr = w.row(k);
                            double acc = 0.0;
                            for (std::size_t j = 0; j < n; ++j) acc += drow[j] * wr[j];
                            dhrow[k] = acc;
                        }
                    }
                }
            }

            if (!need_dh) break;
            if (l == 0) {
                *input_grad = std::move(dh);
                return;
            }
            // chain through the activation of layer l-1 (derivative from post-activation)
            const Mat& hpost = cache.acts[l];
            if (act_ == Activation::Relu) {
                for (std::size_t t = 0; t < dh.data.size(); ++t)
                    dh.data[t] = hpost.data[t] > 0.0 ? dh.data[t] : 0.0;
            } else {
                for (std::size_t t = 0; t < dh.data.size(); ++t)
                    dh.data[t] *= 1.0 - hpost.data[t] * hpost.data[t];
            }
            d = std::move(dh);
        }
        if (input_grad && weights_.empty()) *input_grad = upstream;
    }

    Vec grad_params_batch(const Mat& x, const Mat& upstream) const {
        BatchCache c;
        forward_batch(x, &c);
        Vec g;
        backward_batch(c, upstream, &g, nullptr);
        return g;
    }

    Mat grad_input_batch(const Mat& x, const Mat& upstream) const {
        BatchCache c;
        forward_batch(x, &c);
        Mat g;
        backward_batch(c, upstream, nullptr, &g);
        return g;
    }

    // ---- serialization: [u32 n_widths][u32 widths...][u32 activation][f64 params...] little-endian ----

    std::vector<std::uint8_t> to_bytes() const {
        std::vector<std::uint8_t> out;
        auto put_u32 = [&out](std::uint32_t v) {
            for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        };
        put_u32(static_cast<std::uint32_t>(widths_.size()));
        for (std::size_t w : widths_) put_u32(static_cast<std::uint32_t>(w));
        put_u32(static_cast<std::uint32_t>(act_));
        const Vec p = get_params();
        const std::size_t base = out.size();
        out.resize(base + p.size() * sizeof(double));
        std::memcpy(out.data() + base, p.data(), p.size() * sizeof(double));
        return out;
    }

    static MlpNet from_bytes(const std::uint8_t* bytes, std::size_t len, std::size_t* consumed = nullptr) {
        std::size_t off = 0;
        auto get_u32 = [&](std::uint32_t& v) {
            if (off + 4 > len) throw std::runtime_error("MlpNet::from_bytes: truncated header");
            v = 0;
            for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[off + i]) << (8 * i);
            off += 4;
        };
        std::uint32_t nw = 0;
        get_u32(nw);
        if (nw < 2 || nw > 64) throw std::runtime_error("MlpNet::from_bytes: bad width count");
        std::vector<std::size_t> widths(nw);
        for (auto& w : widths) {
            std::uint32_t v;
            get_u32(v);
            w = v;
        }
        std::uint32_t act = 0;
        get_u32(act);
        if (act > 1) throw std::runtime_error("MlpNet::from_bytes: bad activation tag");
        MlpNet net(widths, static_cast<Activation>(act));
        const std::size_t np = net.num_params();
        if (off + np * sizeof(double) > len) throw std::runtime_error("MlpNet::from_bytes: truncated params");
        Vec p(np);
        std::memcpy(p.data(), bytes + off, np * sizeof(double));
        off += np * sizeof(double);
        net.set_params(p);
        if (consumed) *consumed = off;
        return net;
    }

    void save_file(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open for write: " + path);
        const auto b = to_bytes();
        f.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
    }

    static MlpNet load_file(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open for read: " + path);
        std::vector<std::uint8_t> b((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
        return from_bytes(b.data(), b.size());
    }

private:
    double activate(double z) const { return act_ == Activation::Tanh ? std::tanh(z) : (z > 0.0 ? z : 0.0); }
    // derivative expressed through the post-activation value; ReLU subgradient at 0 is 0
    double activate_deriv(double y) const { return act_ == Activation::Tanh ? 1.0 - y * y : (y > 0.0 ? 1.0 : 0.0); }

    // One fused layer: out = act(in * w + bias). Wide layers accumulate along
    // the output axis; narrow ones (network heads) run k-wide dot products
    // against a transposed weight copy.
    void layer_pass(const Mat& in, const Mat& w, const Vec& bias, bool with_act, Mat& out) const {
        const std::size_t rows = in.rows, kk = w.rows, n = w.cols;
        if (n <= 4) {
            Mat wt(n, kk);
            for (std::size_t k = 0; k < kk; ++k)
                for (std::size_t j = 0; j < n; ++j) wt(j, k) = w(k, j);
            for (std::size_t i = 0; i < rows; ++i) {
                const double* __restrict xr = in.row(i);
                double* __restrict orow = out.row(i);
                for (std::size_t j = 0; j < n; ++j) {
                    const double* __restrict wtr = wt.row(j);
                    double acc = bias[j];
                    for (std::size_t k = 0; k < kk; ++k) acc += xr[k] * wtr[k];
                    orow[j] = with_act ? activate(acc) : acc;
                }
            }
            return;
        }
        std::size_t i = 0;
        for (; i + 2 <= rows; i += 2) {
            const double* __restrict x0 = in.row(i);
            const double* __restrict x1 = in.row(i + 1);
            double* __restrict o0 = out.row(i);
            double* __restrict o1 = out.row(i + 1);
            std::memcpy(o0, bias.data(), n * sizeof(double));
            std::memcpy(o1, bias.data(), n * sizeof(double));
            for (std::size_t k = 0; k < kk; ++k) {
                const double a0 = x0[k], a1 = x1[k];
                const double* __restrict wr = w.row(k);
                for (std::size_t j = 0; j < n; ++j) {
                    const double wv = wr[j];
                    o0[j] += a0 * wv;
                    o1[j] += a1 * wv;
                }
            }
            if (with_act) apply_act_rows(o0, o1, n);
        }
        for (; i < rows; ++i) {
            const double* __restrict xr = in.row(i);
            double* __restrict orow = out.row(i);
            std::memcpy(orow, bias.data(), n * sizeof(double));
            for (std::size_t k = 0; k < kk; ++k) {
                const double a = xr[k];
                const double* __restrict wr = w.row(k);
                for (std::size_t j = 0; j < n; ++j) orow[j] += a * wr[j];
            }
            if (with_act) apply_act_rows(orow, nullptr, n);
        }
    }

    void apply_act_rows(double* __restrict o0, double* __restrict o1, std::size_t n) const {
        if (act_ == Activation::Relu) {
            for (std::size_t j = 0; j < n; ++j) o0[j] = o0[j] > 0.0 ? o0[j] : 0.0;
            if (o1)
                for (std::size_t j = 0; j < n; ++j) o1[j] = o1[j] > 0.0 ? o1[j] : 0.0;
        } else {
            for (std::size_t j = 0; j < n; ++j) o0[j] = std::tanh(o0[j]);
            if (o1)
                for (std::size_t j = 0; j < n; ++j) o1[j] = std::tanh(o1[j]);
        }
    }

    void apply_act(Vec& z) const {
        for (double& v : z) v = activate(v);
    }

    void check_cache(const Vec& x, const Vec& upstream) const {
        if (upstream.size() != output_width()) throw std::invalid_argument("grad: upstream width mismatch");
        if (cache_.empty() || cache_.front() != x) throw std::logic_error("grad: stale activation cache, call forward(x) first");
    }

    void backward_single(const Vec& upstream, Vec* param_grad, Vec* input_grad) const {
        Vec d = upstream;
        std::size_t off_end = num_params();
        for (std::size_t l = weights_.size(); l-- > 0;) {
            const Mat& w = weights_[l];
            const Vec& hin = cache_[l];
            if (param_grad) {
                const std::size_t wsz = w.data.size(), bsz = biases_[l].size();
                double* gw = param_grad->data() + (off_end - wsz - bsz);
                double* gb = param_grad->data() + (off_end - bsz);
                for (std::size_t k = 0; k < w.rows; ++k)
                    for (std::size_t j = 0; j < w.cols; ++j) gw[k * w.cols + j] += hin[k] * d[j];
                for (std::size_t j = 0; j < bsz; ++j) gb[j] += d[j];
                off_end -= wsz + bsz;
            }
            if (l == 0 && !input_grad) return;
            Vec dh(w.rows, 0.0);
            for (std::size_t k = 0; k < w.rows; ++k) {
                const double* wr = w.row(k);
                double acc = 0.0;
                for (std::size_t j = 0; j < w.cols; ++j) acc += d[j] * wr[j];
                dh[k] = acc;
            }
            if (l == 0) {
                *input_grad = std::move(dh);
                return;
            }
            const Vec& hpost = cache_[l];
            for (std::size_t k = 0; k < dh.size(); ++k) dh[k] *= activate_deriv(hpost[k]);
            d = std::move(dh);
        }
        if (input_grad && weights_.empty()) *input_grad = upstream;
    }

    std::vector<std::size_t> widths_;
    Activation act_ = Activation::Tanh;
    std::vector<Mat> weights_;
    std::vector<Vec> biases_;
    std::vector<Vec> cache_;  // [input, post-activation per layer]
};

struct AdamState {
    Vec m;
    Vec v;
    long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double lr = 3e-4;

    explicit AdamState(std::size_t n, double learning_rate = 3e-4)
        : m(n, 0.0), v(n, 0.0), lr(learning_rate) {}
};

/// Standard Adam update with bias correction, in place.
inline void adam_step(Vec& params, const Vec& grad, AdamState& st) {
    if (params.size() != grad.size() || params.size() != st.m.size())
        throw std::invalid_argument("adam_step: length mismatch");
    ++st.step;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * grad[i];
        st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * grad[i] * grad[i];
        const double mhat = st.m[i] / bc1;
        const double vhat = st.v[i] / bc2;
        params[i] -= st.lr * mhat / (std::sqrt(vhat) + st.eps);
    }
}

/// sigma * online + (1 - sigma) * target, elementwise.
inline Vec polyak(const Vec& target, const Vec& online, double sigma) {
    if (target.size() != online.size()) throw std::invalid_argument("polyak: length mismatch");
    if (sigma < 0.0 || sigma > 1.0) throw std::invalid_argument("polyak: sigma out of [0,1]");
    Vec out(target.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigma * online[i] + (1.0 - sigma) * target[i];
    return out;
}

}  // namespace wppg
