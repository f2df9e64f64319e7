#pragma once

#include <cblas.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <string>
#include <vector>

#include "advloc/common.hpp"

extern "C" void openblas_set_num_threads(int num);

namespace advloc::net {

// The training loop runs its own worker pool across batch samples, so BLAS
// itself must stay single threaded for deterministic reductions.
inline void use_single_threaded_blas() {
    static const bool done = [] {
        openblas_set_num_threads(1);
        return true;
    }();
    (void)done;
}

inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
                 const float* a, int lda, const float* b, int ldb, float beta,
                 float* c, int ldc) {
    cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b,
                ldb, beta, c, ldc);
}

inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
                 const double* a, int lda, const double* b, int ldb, double beta,
                 double* c, int ldc) {
    cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b,
                ldb, beta, c, ldc);
}

template <class T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        size_t n = 1;
        for (int d : shape) n *= static_cast<size_t>(d);
        data.assign(n, T(0));
    }
    size_t size() const { return data.size(); }
    void zero() { std::fill(data.begin(), data.end(), T(0)); }
};

struct ConvSpec {
    int out_channels = 0;
    int kernel = 3;
    int stride = 2;
    int pad = 1;
};

struct ArchConfig {
    int input_size = 224;
    int in_channels = 3;
    std::vector<ConvSpec> convs = {{64, 5, 2, 2},
                                   {64, 3, 2, 1},
                                   {128, 3, 2, 1},
                                   {128, 3, 2, 1},
                                   {256, 3, 2, 1}};
    int dense_hidden = 256;
    int output_dim = 4;
};

inline bool operator==(const ConvSpec& a, const ConvSpec& b) {
    return a.out_channels == b.out_channels && a.kernel == b.kernel &&
           a.stride == b.stride && a.pad == b.pad;
}
inline bool operator==(const ArchConfig& a, const ArchConfig& b) {
    return a.input_size == b.input_size && a.in_channels == b.in_channels &&
           a.convs == b.convs && a.dense_hidden == b.dense_hidden &&
           a.output_dim == b.output_dim;
}

struct ConvDims {
    int in_channels, in_size, out_channels, out_size, kernel, stride, pad;
    int col_rows() const { return in_channels * kernel * kernel; }
    int col_cols() const { return out_size * out_size; }
};

// Per-evaluation scratch: layer activations plus im2col buffers. One
// workspace per worker thread.
template <class T>
struct Workspace {
    std::vector<std::vector<T>> acts;   // post-activation per layer output
    std::vector<std::vector<T>> cols;   // im2col buffer per conv layer
    std::vector<T> gap_out, fc1_out, fc2_out;
    std::vector<T> dbuf_a, dbuf_b;      // ping-pong gradient buffers
};

template <class T>
class Network {
public:
    explicit Network(const ArchConfig& arch) : arch_(arch) {
        use_single_threaded_blas();
        int size = arch.input_size;
        int channels = arch.in_channels;
        for (const ConvSpec& c : arch.convs) {
            ConvDims d;
            d.in_channels = channels;
            d.in_size = size;
            d.out_channels = c.out_channels;
            d.kernel = c.kernel;
            d.stride = c.stride;
            d.pad = c.pad;
            d.out_size = (size + 2 * c.pad - c.kernel) / c.stride + 1;
            if (d.out_size < 1)
                throw ConfigError("network: conv stack shrinks below 1x1");
            dims_.push_back(d);
            size = d.out_size;
            channels = c.out_channels;
        }
        feat_channels_ = channels;

        for (const ConvDims& d : dims_) {
            params_.emplace_back(std::vector<int>{d.out_channels, d.col_rows()});
            params_.emplace_back(std::vector<int>{d.out_channels});
        }
        params_.emplace_back(std::vector<int>{arch.dense_hidden, feat_channels_});
        params_.emplace_back(std::vector<int>{arch.dense_hidden});
        params_.emplace_back(std::vector<int>{arch.output_dim, arch.dense_hidden});
        params_.emplace_back(std::vector<int>{arch.output_dim});

        offsets_.resize(params_.size() + 1, 0);
        for (size_t i = 0; i < params_.size(); ++i)
            offsets_[i + 1] = offsets_[i] + params_[i].size();
    }

    const ArchConfig& arch() const { return arch_; }
    size_t param_count() const { return offsets_.back(); }
    std::vector<Tensor<T>>& params() { return params_; }
    const std::vector<Tensor<T>>& params() const { return params_; }

    void init_params(uint64_t seed) {
        Rng rng(hash_combine(seed, 0x4e455457ull));
        for (size_t li = 0; li < dims_.size(); ++li) {
            double std_dev = std::sqrt(2.0 / dims_[li].col_rows());
            for (T& w : params_[2 * li].data) w = static_cast<T>(rng.normal() * std_dev);
            params_[2 * li + 1].zero();
        }
        size_t base = 2 * dims_.size();
        double fc1_std = std::sqrt(2.0 / feat_channels_);
        for (T& w : params_[base].data) w = static_cast<T>(rng.normal() * fc1_std);
        params_[base + 1].zero();
        double fc2_std = std::sqrt(1.0 / arch_.dense_hidden);
        for (T& w : params_[base + 2].data) w = static_cast<T>(rng.normal() * fc2_std);
        params_[base + 3].zero();
    }

    Workspace<T> make_workspace() const {
        Workspace<T> ws;
        ws.acts.resize(dims_.size() + 1);
        ws.cols.resize(dims_.size());
        ws.acts[0].resize(static_cast<size_t>(arch_.in_channels) * arch_.input_size *
                          arch_.input_size);
        size_t max_act = ws.acts[0].size();
        for (size_t i = 0; i < dims_.size(); ++i) {
            ws.acts[i + 1].resize(static_cast<size_t>(dims_[i].out_channels) *
                                  dims_[i].col_cols());
            ws.cols[i].resize(static_cast<size_t>(dims_[i].col_rows()) *
                              dims_[i].col_cols());
            max_act = std::max(max_act, ws.acts[i + 1].size());
            max_act = std::max(max_act, ws.cols[i].size());
        }
        ws.gap_out.resize(feat_channels_);
        ws.fc1_out.resize(arch_.dense_hidden);
        ws.fc2_out.resize(arch_.output_dim);
        max_act = std::max(max_act, static_cast<size_t>(arch_.dense_hidden));
        max_act = std::max(max_act, static_cast<size_t>(arch_.output_dim));
        ws.dbuf_a.resize(max_act);
        ws.dbuf_b.resize(max_act);
        return ws;
    }

    std::vector<Tensor<T>> make_grad_buffers() const {
        std::vector<Tensor<T>> g;
        g.reserve(params_.size());
        for (const Tensor<T>& p : params_) g.emplace_back(p.shape);
        return g;
    }

    // input: CHW image scaled to [0,1], length in_channels*input_size^2.
    void forward(const T* input, T* out, Workspace<T>& ws) const {
        std::memcpy(ws.acts[0].data(), input, ws.acts[0].size() * sizeof(T));
        const T* cur = ws.acts[0].data();
        for (size_t li = 0; li < dims_.size(); ++li) {
            const ConvDims& d = dims_[li];
            im2col(cur, d, ws.cols[li].data());
            T* y = ws.acts[li + 1].data();
            const Tensor<T>& w = params_[2 * li];
            const Tensor<T>& b = params_[2 * li + 1];
            gemm(false, false, d.out_channels, d.col_cols(), d.col_rows(), T(1),
                 w.data.data(), d.col_rows(), ws.cols[li].data(), d.col_cols(),
                 T(0), y, d.col_cols());
            int n = d.col_cols();
            for (int oc = 0; oc < d.out_channels; ++oc) {
                T bias = b.data[oc];
                T* row = y + static_cast<size_t>(oc) * n;
                for (int i = 0; i < n; ++i) {
                    T v = row[i] + bias;
                    row[i] = v > T(0) ? v : T(0);
                }
            }
            cur = y;
        }

        // global average pool
        const ConvDims& last = dims_.back();
        int spatial = last.col_cols();
        for (int c = 0; c < feat_channels_; ++c) {
            const T* row = cur + static_cast<size_t>(c) * spatial;
            T acc = T(0);
            for (int i = 0; i < spatial; ++i) acc += row[i];
            ws.gap_out[c] = acc / static_cast<T>(spatial);
        }

        dense_forward(params_[fc1_w_index()], params_[fc1_w_index() + 1],
                      ws.gap_out.data(), feat_channels_, arch_.dense_hidden,
                      ws.fc1_out.data(), /*relu=*/true);
        dense_forward(params_[fc2_w_index()], params_[fc2_w_index() + 1],
                      ws.fc1_out.data(), arch_.dense_hidden, arch_.output_dim,
                      ws.fc2_out.data(), /*relu=*/false);
        std::memcpy(out, ws.fc2_out.data(), arch_.output_dim * sizeof(T));
    }

    // Accumulates parameter gradients for the sample most recently run through
    // forward() with the same workspace. d_out has length output_dim.
    void backward(const T* d_out, Workspace<T>& ws,
                  std::vector<Tensor<T>>& grads) const {
        std::vector<T>& d_fc1 = ws.dbuf_a;  // reuse scratch
        dense_backward(params_[fc2_w_index()], grads[fc2_w_index()],
                       grads[fc2_w_index() + 1], ws.fc1_out.data(),
                       arch_.dense_hidden, arch_.output_dim, d_out,
                       d_fc1.data(), /*relu_output=*/nullptr);
        // fc1 relu mask
        for (int i = 0; i < arch_.dense_hidden; ++i)
            if (ws.fc1_out[i] <= T(0)) d_fc1[i] = T(0);

        std::vector<T>& d_gap = ws.dbuf_b;
        dense_backward(params_[fc1_w_index()], grads[fc1_w_index()],
                       grads[fc1_w_index() + 1], ws.gap_out.data(),
                       feat_channels_, arch_.dense_hidden, d_fc1.data(),
                       d_gap.data(), nullptr);

        // un-pool into the last conv activation gradient
        const ConvDims& last = dims_.back();
        int spatial = last.col_cols();
        std::vector<T>& d_act = ws.dbuf_a;
        for (int c = 0; c < feat_channels_; ++c) {
            T v = d_gap[c] / static_cast<T>(spatial);
            T* row = d_act.data() + static_cast<size_t>(c) * spatial;
            for (int i = 0; i < spatial; ++i) row[i] = v;
        }

        for (size_t li = dims_.size(); li-- > 0;) {
            const ConvDims& d = dims_[li];
            int m = d.out_channels, n = d.col_cols(), k = d.col_rows();
            T* dz = d_act.data();
            const T* y = ws.acts[li + 1].data();
            size_t total = static_cast<size_t>(m) * n;
            for (size_t i = 0; i < total; ++i)
                if (y[i] <= T(0)) dz[i] = T(0);

            // dW += dZ * col^T ; db += row sums
            gemm(false, true, m, k, n, T(1), dz, n, ws.cols[li].data(), n, T(1),
                 grads[2 * li].data.data(), k);
            T* db = grads[2 * li + 1].data.data();
            for (int oc = 0; oc < m; ++oc) {
                const T* row = dz + static_cast<size_t>(oc) * n;
                T acc = T(0);
                for (int i = 0; i < n; ++i) acc += row[i];
                db[oc] += acc;
            }

            if (li == 0) break;  // input gradient not needed
            // dcol = W^T * dZ, then scatter back to the previous activation
            std::vector<T>& dcol = ws.dbuf_b;
            gemm(true, false, k, n, m, T(1), params_[2 * li].data.data(), k, dz,
                 n, T(0), dcol.data(), n);
            std::vector<T>& d_prev = ws.dbuf_a;
            col2im(dcol.data(), d, d_prev.data());
        }
    }

    // Flat parameter view for finite-difference checks and the optimizer.
    T get_param(size_t flat) const {
        size_t ti = tensor_of(flat);
        return params_[ti].data[flat - offsets_[ti]];
    }
    void set_param(size_t flat, T v) {
        size_t ti = tensor_of(flat);
        params_[ti].data[flat - offsets_[ti]] = v;
    }
    static T grad_at(const std::vector<Tensor<T>>& grads,
                     const std::vector<size_t>& offsets, size_t flat) {
        size_t ti = 0;
        while (offsets[ti + 1] <= flat) ++ti;
        return grads[ti].data[flat - offsets[ti]];
    }
    const std::vector<size_t>& offsets() const { return offsets_; }
    const std::vector<ConvDims>& conv_dims() const { return dims_; }
    int feature_channels() const { return feat_channels_; }

    size_t fc1_w_index() const { return 2 * dims_.size(); }
    size_t fc2_w_index() const { return 2 * dims_.size() + 2; }

private:
    size_t tensor_of(size_t flat) const {
        size_t ti = 0;
        while (offsets_[ti + 1] <= flat) ++ti;
        return ti;
    }

    static void dense_forward(const Tensor<T>& w, const Tensor<T>& b, const T* x,
                              int in_dim, int out_dim, T* y, bool relu) {
        for (int o = 0; o < out_dim; ++o) {
            const T* row = w.data.data() + static_cast<size_t>(o) * in_dim;
            T acc = b.data[o];
            for (int i = 0; i < in_dim; ++i) acc += row[i] * x[i];
            y[o] = relu && acc < T(0) ? T(0) : acc;
        }
    }

    static void dense_backward(const Tensor<T>& w, Tensor<T>& dw, Tensor<T>& db,
                               const T* x, int in_dim, int out_dim, const T* dy,
                               T* dx, const T* /*unused*/) {
        for (int i = 0; i < in_dim; ++i) dx[i] = T(0);
        for (int o = 0; o < out_dim; ++o) {
            T g = dy[o];
            db.data[o] += g;
            T* dw_row = dw.data.data() + static_cast<size_t>(o) * in_dim;
            const T* w_row = w.data.data() + static_cast<size_t>(o) * in_dim;
            for (int i = 0; i < in_dim; ++i) {
                dw_row[i] += g * x[i];
                dx[i] += g * w_row[i];
            }
        }
    }

    static void im2col(const T* in, const ConvDims& d, T* col) {
        int os = d.out_size, is = d.in_size, k = d.kernel, s = d.stride, p = d.pad;
        for (int c = 0; c < d.in_channels; ++c) {
            const T* plane = in + static_cast<size_t>(c) * is * is;
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    T* row = col + (static_cast<size_t>(c) * k * k + ky * k + kx) *
                                       (static_cast<size_t>(os) * os);
                    for (int oy = 0; oy < os; ++oy) {
                        int iy = oy * s - p + ky;
                        T* out_row = row + static_cast<size_t>(oy) * os;
                        if (iy < 0 || iy >= is) {
                            std::memset(out_row, 0, os * sizeof(T));
                            continue;
                        }
                        const T* in_row = plane + static_cast<size_t>(iy) * is;
                        for (int ox = 0; ox < os; ++ox) {
                            int ix = ox * s - p + kx;
                            out_row[ox] =
                                (ix >= 0 && ix < is) ? in_row[ix] : T(0);
                        }
                    }
                }
            }
        }
    }

    static void col2im(const T* col, const ConvDims& d, T* out) {
        int os = d.out_size, is = d.in_size, k = d.kernel, s = d.stride, p = d.pad;
        std::memset(out, 0,
                    static_cast<size_t>(d.in_channels) * is * is * sizeof(T));
        for (int c = 0; c < d.in_channels; ++c) {
            T* plane = out + static_cast<size_t>(c) * is * is;
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    const T* row = col + (static_cast<size_t>(c) * k * k + ky * k + kx) *
                                             (static_cast<size_t>(os) * os);
                    for (int oy = 0; oy < os; ++oy) {
                        int iy = oy * s - p + ky;
                        if (iy < 0 || iy >= is) continue;
                        T* out_row = plane + static_cast<size_t>(iy) * is;
                        const T* in_row = row + static_cast<size_t>(oy) * os;
                        for (int ox = 0; ox < os; ++ox) {
                            int ix = ox * s - p + kx;
                            if (ix >= 0 && ix < is) out_row[ix] += in_row[ox];
                        }
                    }
                }
            }
        }
    }

    ArchConfig arch_;
    std::vector<ConvDims> dims_;
    std::vector<Tensor<T>> params_;
    std::vector<size_t> offsets_;
    int feat_channels_ = 0;
};

}  // namespace advloc::net
