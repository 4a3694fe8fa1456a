#include "vivid/conv_net.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "vivid/io.hpp"

namespace vivid {

namespace {

// Activations are (h*w x ch) matrices: pixel index r*w+c as the row, one
// contiguous column per channel. The im2col buffer K is (h*w x in_ch*kh*kw)
// with column index ch*kh*kw + ki*kw + kj, matching the weight layout
// W (in_ch*kh*kw x out_ch); a convolution is then out = K * W.
struct LayerCache {
    Eigen::MatrixXd in;
    Eigen::MatrixXd out;
    Eigen::MatrixXi argmax;  // maxpool: input pixel row per output cell
};

struct Workspace {
    std::vector<LayerCache> cache;
    Eigen::MatrixXd K;
    Eigen::MatrixXd dK;
};

void im2col(const Layer& L, const Eigen::MatrixXd& x, Eigen::MatrixXd& K) {
    const int h = L.in_shape.h, w = L.in_shape.w;
    const int pt = (L.kh - 1) / 2, pl = (L.kw - 1) / 2;
    K.resize(static_cast<Eigen::Index>(h) * w, static_cast<Eigen::Index>(L.in_ch) * L.kh * L.kw);
    for (int ch = 0; ch < L.in_ch; ++ch) {
        for (int ki = 0; ki < L.kh; ++ki) {
            const int dr = ki - pt;
            for (int kj = 0; kj < L.kw; ++kj) {
                const int dc = kj - pl;
                const int q = ch * L.kh * L.kw + ki * L.kw + kj;
                const int c_lo = std::max(0, -dc), c_hi = std::min(w, w - dc);
                auto dst = K.col(q);
                const auto src = x.col(ch);
                for (int r = 0; r < h; ++r) {
                    const int rr = r + dr;
                    if (rr < 0 || rr >= h || c_lo >= c_hi) {
                        dst.segment(static_cast<Eigen::Index>(r) * w, w).setZero();
                        continue;
                    }
                    if (c_lo > 0) dst.segment(static_cast<Eigen::Index>(r) * w, c_lo).setZero();
                    dst.segment(static_cast<Eigen::Index>(r) * w + c_lo, c_hi - c_lo) =
                        src.segment(static_cast<Eigen::Index>(rr) * w + c_lo + dc, c_hi - c_lo);
                    if (c_hi < w)
                        dst.segment(static_cast<Eigen::Index>(r) * w + c_hi, w - c_hi).setZero();
                }
            }
        }
    }
}

// Transpose of im2col: scatter-add the kernel-position columns back onto
// the input channels.
void col2im_accumulate(const Layer& L, const Eigen::MatrixXd& dK, Eigen::MatrixXd& dx) {
    const int h = L.in_shape.h, w = L.in_shape.w;
    const int pt = (L.kh - 1) / 2, pl = (L.kw - 1) / 2;
    dx.setZero(static_cast<Eigen::Index>(h) * w, L.in_ch);
    for (int ch = 0; ch < L.in_ch; ++ch) {
        for (int ki = 0; ki < L.kh; ++ki) {
            const int dr = ki - pt;
            for (int kj = 0; kj < L.kw; ++kj) {
                const int dc = kj - pl;
                const int q = ch * L.kh * L.kw + ki * L.kw + kj;
                const int c_lo = std::max(0, -dc), c_hi = std::min(w, w - dc);
                if (c_lo >= c_hi) continue;
                const auto src = dK.col(q);
                auto dst = dx.col(ch);
                for (int r = 0; r < h; ++r) {
                    const int rr = r + dr;
                    if (rr < 0 || rr >= h) continue;
                    dst.segment(static_cast<Eigen::Index>(rr) * w + c_lo + dc, c_hi - c_lo) +=
                        src.segment(static_cast<Eigen::Index>(r) * w + c_lo, c_hi - c_lo);
                }
            }
        }
    }
}

void maxpool_forward(const Layer& L, const Eigen::MatrixXd& x, Eigen::MatrixXd& out,
                     Eigen::MatrixXi* argmax) {
    const int h = L.in_shape.h, w = L.in_shape.w;
    const int oh = L.out_shape.h, ow = L.out_shape.w;
    out.resize(static_cast<Eigen::Index>(oh) * ow, L.in_shape.ch);
    if (argmax) argmax->resize(static_cast<Eigen::Index>(oh) * ow, L.in_shape.ch);
    for (int ch = 0; ch < L.in_shape.ch; ++ch) {
        const auto src = x.col(ch);
        for (int orow = 0; orow < oh; ++orow) {
            for (int ocol = 0; ocol < ow; ++ocol) {
                const int r0 = 2 * orow, c0 = 2 * ocol;
                int best_idx = r0 * w + c0;
                double best = src[best_idx];
                for (int dr = 0; dr < 2; ++dr)
                    for (int dc = 0; dc < 2; ++dc) {
                        const int r = r0 + dr, c = c0 + dc;
                        if (r >= h || c >= w) continue;
                        const int idx = r * w + c;
                        if (src[idx] > best) {
                            best = src[idx];
                            best_idx = idx;
                        }
                    }
                const int op = orow * ow + ocol;
                out(op, ch) = best;
                if (argmax) (*argmax)(op, ch) = best_idx;
            }
        }
    }
}

void apply_activation(Activation act, Eigen::MatrixXd& m) {
    if (act == Activation::relu) m = m.cwiseMax(0.0);
}

// dPre = dOut masked by the ReLU pattern (out > 0 iff preactivation > 0).
Eigen::MatrixXd activation_backward(Activation act, const Eigen::MatrixXd& out,
                                    const Eigen::MatrixXd& d_out) {
    if (act == Activation::linear) return d_out;
    return (out.array() > 0.0).cast<double>().matrix().cwiseProduct(d_out);
}

Eigen::MatrixXd forward_pass(const ConvNetModel& model, const Eigen::VectorXd& input,
                             Workspace* ws) {
    const auto& layers = model.layers();
    if (ws) ws->cache.resize(layers.size());
    Eigen::MatrixXd cur =
        Eigen::Map<const Eigen::MatrixXd>(input.data(), input.size(), 1);
    Eigen::MatrixXd local_k;
    for (std::size_t li = 0; li < layers.size(); ++li) {
        const Layer& L = layers[li];
        if (ws) ws->cache[li].in = cur;
        Eigen::MatrixXd out;
        switch (L.kind) {
            case Layer::Kind::conv: {
                Eigen::MatrixXd& K = ws ? ws->K : local_k;
                im2col(L, cur, K);
                out.noalias() = K * L.W;
                out.rowwise() += L.b.transpose();
                apply_activation(L.act, out);
                break;
            }
            case Layer::Kind::maxpool:
                maxpool_forward(L, cur, out, ws ? &ws->cache[li].argmax : nullptr);
                break;
            case Layer::Kind::flatten:
                out = Eigen::Map<const Eigen::MatrixXd>(cur.data(), cur.size(), 1);
                break;
            case Layer::Kind::dense:
                out.noalias() = L.W.transpose() * cur;
                out.col(0) += L.b;
                apply_activation(L.act, out);
                break;
        }
        if (ws) ws->cache[li].out = out;
        cur = std::move(out);
    }
    return cur;
}

void backward_pass(const ConvNetModel& model, Workspace& ws, Eigen::MatrixXd d_out,
                   std::vector<Eigen::MatrixXd>& dW, std::vector<Eigen::VectorXd>& db) {
    const auto& layers = model.layers();
    for (int li = static_cast<int>(layers.size()) - 1; li >= 0; --li) {
        const Layer& L = layers[li];
        const LayerCache& cache = ws.cache[static_cast<std::size_t>(li)];
        switch (L.kind) {
            case Layer::Kind::conv: {
                const Eigen::MatrixXd d_pre = activation_backward(L.act, cache.out, d_out);
                im2col(L, cache.in, ws.K);
                dW[static_cast<std::size_t>(li)].noalias() += ws.K.transpose() * d_pre;
                db[static_cast<std::size_t>(li)] += d_pre.colwise().sum().transpose();
                ws.dK.noalias() = d_pre * L.W.transpose();
                col2im_accumulate(L, ws.dK, d_out);
                break;
            }
            case Layer::Kind::maxpool: {
                Eigen::MatrixXd d_in =
                    Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(L.in_shape.h) * L.in_shape.w,
                                          L.in_shape.ch);
                for (int ch = 0; ch < L.in_shape.ch; ++ch)
                    for (Eigen::Index p = 0; p < d_out.rows(); ++p)
                        d_in(cache.argmax(p, ch), ch) += d_out(p, ch);
                d_out = std::move(d_in);
                break;
            }
            case Layer::Kind::flatten: {
                Eigen::MatrixXd reshaped = Eigen::Map<const Eigen::MatrixXd>(
                    d_out.data(), static_cast<Eigen::Index>(L.in_shape.h) * L.in_shape.w,
                    L.in_shape.ch);
                d_out = std::move(reshaped);
                break;
            }
            case Layer::Kind::dense: {
                const Eigen::MatrixXd d_pre = activation_backward(L.act, cache.out, d_out);
                dW[static_cast<std::size_t>(li)].noalias() += cache.in * d_pre.transpose();
                db[static_cast<std::size_t>(li)] += d_pre.col(0);
                d_out.noalias() = L.W * d_pre;
                break;
            }
        }
    }
}

void zero_like_params(const ConvNetModel& model, std::vector<Eigen::MatrixXd>& dW,
                      std::vector<Eigen::VectorXd>& db) {
    const auto& layers = model.layers();
    dW.resize(layers.size());
    db.resize(layers.size());
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].has_params()) {
            dW[i] = Eigen::MatrixXd::Zero(layers[i].W.rows(), layers[i].W.cols());
            db[i] = Eigen::VectorXd::Zero(layers[i].b.size());
        } else {
            dW[i].resize(0, 0);
            db[i].resize(0);
        }
    }
}

}  // namespace

int ConvNetModel::output_dim() const {
    return head_ == HeadType::full_field ? rows_ * cols_ : q_;
}

ConvNetModel ConvNetModel::vcnn(int rows, int cols, int channels, bool linear_head) {
    if (rows < 1 || cols < 1 || channels < 1)
        throw std::invalid_argument("vcnn: invalid dimensions");
    ConvNetModel m;
    m.head_ = HeadType::full_field;
    m.rows_ = rows;
    m.cols_ = cols;
    m.q_ = 0;

    auto conv = [&](int kh, int kw, int in_ch, int out_ch, Activation act) {
        Layer L;
        L.kind = Layer::Kind::conv;
        L.kh = kh;
        L.kw = kw;
        L.in_ch = in_ch;
        L.out_ch = out_ch;
        L.act = act;
        L.in_shape = {in_ch, rows, cols};
        L.out_shape = {out_ch, rows, cols};
        L.W = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(in_ch) * kh * kw, out_ch);
        L.b = Eigen::VectorXd::Zero(out_ch);
        m.layers_.push_back(std::move(L));
    };

    conv(8, 8, 1, channels, Activation::relu);
    for (int i = 0; i < 5; ++i) conv(8, 8, channels, channels, Activation::relu);
    conv(1, 1, channels, 1, linear_head ? Activation::linear : Activation::relu);
    return m;
}

ConvNetModel ConvNetModel::vcnn_rom(int rows, int cols, int channels, int q) {
    if (rows < 1 || cols < 1 || channels < 1 || q < 1)
        throw std::invalid_argument("vcnn_rom: invalid dimensions");
    ConvNetModel m;
    m.head_ = HeadType::latent;
    m.rows_ = rows;
    m.cols_ = cols;
    m.q_ = q;

    int h = rows, w = cols, ch = 1;
    auto conv = [&](int kh, int kw, int out_ch) {
        Layer L;
        L.kind = Layer::Kind::conv;
        L.kh = kh;
        L.kw = kw;
        L.in_ch = ch;
        L.out_ch = out_ch;
        L.act = Activation::relu;
        L.in_shape = {ch, h, w};
        L.out_shape = {out_ch, h, w};
        L.W = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ch) * kh * kw, out_ch);
        L.b = Eigen::VectorXd::Zero(out_ch);
        m.layers_.push_back(std::move(L));
        ch = out_ch;
    };
    auto pool = [&] {
        Layer L;
        L.kind = Layer::Kind::maxpool;
        L.in_shape = {ch, h, w};
        h = (h + 1) / 2;
        w = (w + 1) / 2;
        L.out_shape = {ch, h, w};
        m.layers_.push_back(std::move(L));
    };

    conv(8, 8, channels);
    conv(8, 8, channels);
    pool();
    conv(4, 4, channels);
    pool();
    conv(4, 4, channels);

    Layer flat;
    flat.kind = Layer::Kind::flatten;
    flat.in_shape = {ch, h, w};
    flat.out_shape = {1, ch * h * w, 1};
    m.layers_.push_back(std::move(flat));

    Layer dense;
    dense.kind = Layer::Kind::dense;
    dense.in_dim = ch * h * w;
    dense.out_dim = q;
    dense.act = Activation::linear;
    dense.in_shape = {1, ch * h * w, 1};
    dense.out_shape = {1, q, 1};
    dense.W = Eigen::MatrixXd::Zero(dense.in_dim, dense.out_dim);
    dense.b = Eigen::VectorXd::Zero(q);
    m.layers_.push_back(std::move(dense));
    return m;
}

ConvNetModel ConvNetModel::assemble(HeadType head, int rows, int cols, int q,
                                    std::vector<Layer> layers) {
    if (layers.empty()) throw std::invalid_argument("assemble: empty layer stack");
    ConvNetModel m;
    m.head_ = head;
    m.rows_ = rows;
    m.cols_ = cols;
    m.q_ = head == HeadType::latent ? q : 0;
    for (std::size_t i = 0; i + 1 < layers.size(); ++i)
        if (layers[i].out_shape.size() != layers[i + 1].in_shape.size())
            throw std::invalid_argument("assemble: layer shapes do not compose");
    const TensorShape& first = layers.front().in_shape;
    if (first.ch != 1 || first.h != rows || first.w != cols)
        throw std::invalid_argument("assemble: first layer does not accept the input image");
    const int out = layers.back().out_shape.size();
    if ((head == HeadType::full_field && out != rows * cols) ||
        (head == HeadType::latent && out != q))
        throw std::invalid_argument("assemble: last layer does not match the head");
    m.layers_ = std::move(layers);
    return m;
}

std::size_t ConvNetModel::parameter_count() const {
    std::size_t n = 0;
    for (const Layer& L : layers_)
        if (L.has_params()) n += static_cast<std::size_t>(L.W.size()) + L.b.size();
    return n;
}

void ConvNetModel::init_weights(std::uint64_t seed) {
    Rng rng(seed);
    for (Layer& L : layers_) {
        if (!L.has_params()) continue;
        const double fan_in = static_cast<double>(L.W.rows());
        const double std_dev =
            L.act == Activation::relu ? std::sqrt(2.0 / fan_in) : std::sqrt(1.0 / fan_in);
        for (Eigen::Index c = 0; c < L.W.cols(); ++c)
            for (Eigen::Index r = 0; r < L.W.rows(); ++r) L.W(r, c) = std_dev * rng.normal();
        L.b.setZero();
    }
}

Eigen::VectorXd ConvNetModel::forward(const Eigen::VectorXd& input) const {
    if (input.size() != static_cast<Eigen::Index>(rows_) * cols_)
        throw std::invalid_argument("ConvNetModel::forward: input shape mismatch");
    const Eigen::MatrixXd out = forward_pass(*this, input, nullptr);
    return Eigen::Map<const Eigen::VectorXd>(out.data(), out.size());
}

StateField ConvNetModel::forward_field(const TessellatedField& y_tess) const {
    if (head_ != HeadType::full_field)
        throw std::logic_error("forward_field: model has a latent head");
    if (y_tess.rows() != rows_ || y_tess.cols() != cols_)
        throw std::invalid_argument("forward_field: input shape mismatch");
    Eigen::VectorXd in(static_cast<Eigen::Index>(rows_) * cols_);
    for (int i = 0; i < rows_; ++i)
        for (int j = 0; j < cols_; ++j) in[static_cast<Eigen::Index>(i) * cols_ + j] = y_tess.values(i, j);
    return unflatten(forward(in), rows_, cols_);
}

Eigen::VectorXd ConvNetModel::forward_latent(const TessellatedField& y_tess) const {
    if (head_ != HeadType::latent)
        throw std::logic_error("forward_latent: model has a full-field head");
    if (y_tess.rows() != rows_ || y_tess.cols() != cols_)
        throw std::invalid_argument("forward_latent: input shape mismatch");
    Eigen::VectorXd in(static_cast<Eigen::Index>(rows_) * cols_);
    for (int i = 0; i < rows_; ++i)
        for (int j = 0; j < cols_; ++j) in[static_cast<Eigen::Index>(i) * cols_ + j] = y_tess.values(i, j);
    return forward(in);
}

double batch_loss_and_grads(const ConvNetModel& model,
                            const std::vector<const TrainSample*>& batch,
                            std::vector<Eigen::MatrixXd>& dW,
                            std::vector<Eigen::VectorXd>& db, int threads) {
    const int count = static_cast<int>(batch.size());
    if (count == 0) throw std::invalid_argument("batch_loss_and_grads: empty batch");
    const int n_out = model.output_dim();
    for (const TrainSample* s : batch)
        if (s->target.size() != n_out || s->input.size() != static_cast<Eigen::Index>(model.input_rows()) * model.input_cols())
            throw std::invalid_argument("batch_loss_and_grads: sample shape mismatch");

    zero_like_params(model, dW, db);

    // Per-sample gradients land in separate buffers and are reduced in
    // sample order, so the result does not depend on the thread count.
    std::vector<std::vector<Eigen::MatrixXd>> sample_dw(static_cast<std::size_t>(count));
    std::vector<std::vector<Eigen::VectorXd>> sample_db(static_cast<std::size_t>(count));
    std::vector<double> sample_loss(static_cast<std::size_t>(count), 0.0);

    const int n_threads = std::max(1, std::min(threads, count));
    auto worker = [&](int tid) {
        Workspace ws;
        for (int s = tid; s < count; s += n_threads) {
            const TrainSample& sample = *batch[static_cast<std::size_t>(s)];
            const Eigen::MatrixXd out = forward_pass(model, sample.input, &ws);
            Eigen::Map<const Eigen::VectorXd> pred(out.data(), out.size());
            const Eigen::VectorXd err = pred - sample.target;
            sample_loss[static_cast<std::size_t>(s)] = err.squaredNorm() / n_out;
            Eigen::MatrixXd d_out =
                Eigen::Map<const Eigen::MatrixXd>(err.data(), out.rows(), out.cols()) *
                (2.0 / (static_cast<double>(count) * n_out));
            zero_like_params(model, sample_dw[static_cast<std::size_t>(s)],
                             sample_db[static_cast<std::size_t>(s)]);
            backward_pass(model, ws, std::move(d_out), sample_dw[static_cast<std::size_t>(s)],
                          sample_db[static_cast<std::size_t>(s)]);
        }
    };
    if (n_threads == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n_threads));
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker, t);
        for (auto& th : pool) th.join();
    }

    double loss = 0.0;
    for (int s = 0; s < count; ++s) {
        loss += sample_loss[static_cast<std::size_t>(s)];
        for (std::size_t li = 0; li < model.layers().size(); ++li) {
            if (!model.layers()[li].has_params()) continue;
            dW[li] += sample_dw[static_cast<std::size_t>(s)][li];
            db[li] += sample_db[static_cast<std::size_t>(s)][li];
        }
    }
    return loss / count;
}

TrainResult train(ConvNetModel& model, const std::vector<TrainSample>& dataset,
                  const TrainConfig& cfg) {
    if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
    if (cfg.epochs < 1 || cfg.batch_size < 1 || cfg.learning_rate <= 0.0)
        throw std::invalid_argument("train: invalid hyperparameters");
    const int n_out = model.output_dim();
    for (const TrainSample& s : dataset)
        if (s.target.size() != n_out)
            throw std::invalid_argument("train: target does not match the model head");

    const auto& layers = model.layers();
    std::vector<Eigen::MatrixXd> dW, mW, vW;
    std::vector<Eigen::VectorXd> db, mb, vb;
    zero_like_params(model, mW, mb);
    zero_like_params(model, vW, vb);

    Rng rng(cfg.seed);
    std::vector<int> order(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) order[i] = static_cast<int>(i);

    TrainResult result;
    long t = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates with the shared stream.
        for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) {
            const int j = static_cast<int>(rng.uniform_int(0, i));
            std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
        }

        double epoch_loss = 0.0;
        int epoch_samples = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            std::vector<const TrainSample*> batch;
            batch.reserve(end - start);
            for (std::size_t i = start; i < end; ++i)
                batch.push_back(&dataset[static_cast<std::size_t>(order[i])]);

            const double loss = batch_loss_and_grads(model, batch, dW, db, cfg.threads);
            if (!std::isfinite(loss))
                throw std::runtime_error(
                    "train: loss became non-finite; lower the learning rate");
            epoch_loss += loss * static_cast<double>(batch.size());
            epoch_samples += static_cast<int>(batch.size());

            ++t;
            for (std::size_t li = 0; li < layers.size(); ++li) {
                Layer& L = model.layers()[li];
                if (!L.has_params()) continue;
                if (cfg.optimizer == Optimizer::sgd) {
                    L.W -= cfg.learning_rate * dW[li];
                    L.b -= cfg.learning_rate * db[li];
                    continue;
                }
                mW[li] = cfg.adam_beta1 * mW[li] + (1.0 - cfg.adam_beta1) * dW[li];
                vW[li] = cfg.adam_beta2 * vW[li] +
                         (1.0 - cfg.adam_beta2) * dW[li].cwiseProduct(dW[li]);
                mb[li] = cfg.adam_beta1 * mb[li] + (1.0 - cfg.adam_beta1) * db[li];
                vb[li] = cfg.adam_beta2 * vb[li] +
                         (1.0 - cfg.adam_beta2) * db[li].cwiseProduct(db[li]);
                const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(t));
                const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(t));
                L.W -= (cfg.learning_rate / bc1) *
                       mW[li].cwiseQuotient(((vW[li] / bc2).cwiseSqrt().array() + cfg.adam_eps)
                                                .matrix());
                L.b -= (cfg.learning_rate / bc1) *
                       mb[li].cwiseQuotient(((vb[li] / bc2).cwiseSqrt().array() + cfg.adam_eps)
                                                .matrix());
            }
        }
        result.loss_history.push_back(epoch_loss / epoch_samples);
    }
    return result;
}

FlatVector infer_xv(const ConvNetModel& model, const SensorSet& sensors, int rows,
                    int cols) {
    const TessellatedField tess = tessellate(sensors, rows, cols);
    if (model.head() == HeadType::full_field) return flatten(model.forward_field(tess));
    return model.forward_latent(tess);
}

void ConvNetModel::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("ConvNetModel::save: cannot open " + path);
    io::write_magic(os, "VCNN");
    io::write_u32(os, 1u);  // version
    io::write_u32(os, static_cast<std::uint32_t>(head_));
    io::write_u32(os, static_cast<std::uint32_t>(rows_));
    io::write_u32(os, static_cast<std::uint32_t>(cols_));
    io::write_u32(os, static_cast<std::uint32_t>(q_));
    io::write_u32(os, static_cast<std::uint32_t>(layers_.size()));
    for (const Layer& L : layers_) {
        io::write_u32(os, static_cast<std::uint32_t>(L.kind));
        io::write_u32(os, static_cast<std::uint32_t>(L.kh));
        io::write_u32(os, static_cast<std::uint32_t>(L.kw));
        io::write_u32(os, static_cast<std::uint32_t>(L.kind == Layer::Kind::dense ? L.in_dim : L.in_ch));
        io::write_u32(os, static_cast<std::uint32_t>(L.kind == Layer::Kind::dense ? L.out_dim : L.out_ch));
        io::write_u32(os, static_cast<std::uint32_t>(L.act));
    }
    for (const Layer& L : layers_) {
        if (!L.has_params()) continue;
        // Column by column: one fan_in block per output unit.
        for (Eigen::Index c = 0; c < L.W.cols(); ++c)
            for (Eigen::Index r = 0; r < L.W.rows(); ++r) io::write_f64(os, L.W(r, c));
        for (Eigen::Index i = 0; i < L.b.size(); ++i) io::write_f64(os, L.b[i]);
    }
    if (!os) throw std::runtime_error("ConvNetModel::save: write failed for " + path);
}

ConvNetModel ConvNetModel::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("ConvNetModel::load: cannot open " + path);
    io::expect_magic(is, "VCNN", "ConvNetModel::load");
    const std::uint32_t version = io::read_u32(is);
    if (version != 1u) throw std::runtime_error("ConvNetModel::load: unsupported version");
    const auto head = static_cast<HeadType>(io::read_u32(is));
    const int rows = static_cast<int>(io::read_u32(is));
    const int cols = static_cast<int>(io::read_u32(is));
    const int q = static_cast<int>(io::read_u32(is));
    const std::uint32_t n_layers = io::read_u32(is);

    struct RawLayer {
        Layer::Kind kind;
        int kh, kw, in, out;
        Activation act;
    };
    std::vector<RawLayer> raw;
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        RawLayer r{};
        r.kind = static_cast<Layer::Kind>(io::read_u32(is));
        r.kh = static_cast<int>(io::read_u32(is));
        r.kw = static_cast<int>(io::read_u32(is));
        r.in = static_cast<int>(io::read_u32(is));
        r.out = static_cast<int>(io::read_u32(is));
        r.act = static_cast<Activation>(io::read_u32(is));
        raw.push_back(r);
    }

    // Rebuild through the stock builders so shape metadata stays canonical,
    // then overwrite the weights from the stream.
    ConvNetModel m;
    if (head == HeadType::full_field) {
        const int channels = raw.at(0).out;
        const bool linear_head = raw.back().act == Activation::linear;
        m = vcnn(rows, cols, channels, linear_head);
    } else {
        const int channels = raw.at(0).out;
        m = vcnn_rom(rows, cols, channels, q);
    }
    if (m.layers_.size() != raw.size())
        throw std::runtime_error("ConvNetModel::load: layer table mismatch");
    for (Layer& L : m.layers_) {
        if (!L.has_params()) continue;
        for (Eigen::Index c = 0; c < L.W.cols(); ++c)
            for (Eigen::Index r = 0; r < L.W.rows(); ++r) L.W(r, c) = io::read_f64(is);
        for (Eigen::Index i = 0; i < L.b.size(); ++i) L.b[i] = io::read_f64(is);
    }
    return m;
}

}  // namespace vivid
