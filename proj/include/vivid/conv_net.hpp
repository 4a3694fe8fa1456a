#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "vivid/field.hpp"
#include "vivid/observation.hpp"
#include "vivid/rng.hpp"

namespace vivid {

enum class Activation : std::uint32_t { linear = 0, relu = 1 };
enum class HeadType : std::uint32_t { full_field = 0, latent = 1 };

struct TensorShape {
    int ch = 0, h = 0, w = 0;
    int size() const { return ch * h * w; }
};

/// One layer of the stack. Convolutions are zero-padded "same" (stride 1),
/// pooling is 2x2 max with ceiling semantics, dense closes the latent head.
struct Layer {
    enum class Kind : std::uint32_t { conv = 0, maxpool = 1, flatten = 2, dense = 3 };

    Kind kind = Kind::conv;
    int kh = 0, kw = 0;            // conv kernel
    int in_ch = 0, out_ch = 0;     // conv channels
    int in_dim = 0, out_dim = 0;   // dense dims
    Activation act = Activation::linear;

    // conv: W is out_ch x (in_ch*kh*kw); dense: out_dim x in_dim.
    Eigen::MatrixXd W;
    Eigen::VectorXd b;

    TensorShape in_shape, out_shape;

    bool has_params() const { return kind == Kind::conv || kind == Kind::dense; }
};

/// Convolutional inverse operator (tessellated observation image in, full
/// field or latent vector out), with weights and shape metadata.
class ConvNetModel {
public:
    /// Field-output stack: six same-padded 8x8 conv+ReLU layers at `channels`
    /// width and a final 1x1 conv to one channel. The final activation is
    /// ReLU unless `linear_head` is set (signed fields need the latter).
    static ConvNetModel vcnn(int rows, int cols, int channels, bool linear_head);

    /// Latent-output encoder: conv(8x8)+ReLU x2, maxpool, conv(4x4)+ReLU,
    /// maxpool, conv(4x4)+ReLU, flatten, dense to q.
    static ConvNetModel vcnn_rom(int rows, int cols, int channels, int q);

    /// Build a model from an explicit layer stack; shapes must compose and
    /// the last layer must produce the head's output.
    static ConvNetModel assemble(HeadType head, int rows, int cols, int q,
                                 std::vector<Layer> layers);

    HeadType head() const { return head_; }
    int input_rows() const { return rows_; }
    int input_cols() const { return cols_; }
    int latent_dim() const { return q_; }
    int output_dim() const;

    std::vector<Layer>& layers() { return layers_; }
    const std::vector<Layer>& layers() const { return layers_; }

    std::size_t parameter_count() const;

    /// He-style seeded initialization; biases start at zero.
    void init_weights(std::uint64_t seed);

    /// Raw forward on flattened input pixels (row-major, single channel).
    Eigen::VectorXd forward(const Eigen::VectorXd& input) const;

    StateField forward_field(const TessellatedField& y_tess) const;
    Eigen::VectorXd forward_latent(const TessellatedField& y_tess) const;

    void save(const std::string& path) const;
    static ConvNetModel load(const std::string& path);

private:
    HeadType head_ = HeadType::full_field;
    int rows_ = 0, cols_ = 0, q_ = 0;
    std::vector<Layer> layers_;
};

struct TrainSample {
    Eigen::VectorXd input;   // tessellated image pixels, row-major
    Eigen::VectorXd target;  // full field pixels or latent vector
};

enum class Optimizer : std::uint32_t { sgd = 0, adam = 1 };

struct TrainConfig {
    int epochs = 10;
    int batch_size = 16;
    double learning_rate = 1e-3;
    Optimizer optimizer = Optimizer::adam;
    std::uint64_t seed = 1;
    int threads = 2;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
};

struct TrainResult {
    std::vector<double> loss_history;  // mean training loss per epoch
};

/// Mini-batch gradient descent on mean squared error. Deterministic for a
/// fixed seed: shuffling, init and the sample-ordered gradient reduction do
/// not depend on the thread count.
TrainResult train(ConvNetModel& model, const std::vector<TrainSample>& dataset,
                  const TrainConfig& cfg);

/// Mean-over-batch MSE loss and parameter gradients; exposed for gradient
/// verification.
double batch_loss_and_grads(const ConvNetModel& model,
                            const std::vector<const TrainSample*>& batch,
                            std::vector<Eigen::MatrixXd>& dW,
                            std::vector<Eigen::VectorXd>& db, int threads = 1);

/// tessellate -> forward -> flatten; the x_v entering the assimilation.
FlatVector infer_xv(const ConvNetModel& model, const SensorSet& sensors, int rows,
                    int cols);

}  // namespace vivid
