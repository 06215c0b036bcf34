#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "latpoison/autodiff/tensor.hpp"
#include "latpoison/rng.hpp"

namespace latpoison::models {

// Negative-side slope of the hidden-layer activation.
inline constexpr double kLeakySlope = 0.2;

// Recorded in checkpoints so a reader knows how parameters were drawn.
inline constexpr const char* kInitScheme = "uniform_glorot";

struct Dense {
    ad::Tensor weights;  // [in x out]
    ad::Tensor bias;     // [out]

    std::size_t in() const { return weights.dim(0); }
    std::size_t out() const { return weights.dim(1); }

    // Weights uniform in +-sqrt(6 / (in + out)), bias zero.
    static Dense init(std::size_t in, std::size_t out, Rng& rng, const std::string& name);
    static Dense zeros(std::size_t in, std::size_t out, const std::string& name);
    Dense clone() const;
};

struct VaeParams {
    std::vector<Dense> encoder;  // hidden trunk, leaky activations
    Dense mu_head;
    Dense log_var_head;
    std::vector<Dense> decoder;  // last layer feeds the sigmoid output
    std::size_t image_dim = 0;
    std::size_t latent_dim = 0;

    // image_dim -> encoder_hidden... -> (mu, log_var); latent -> decoder_hidden... -> image_dim.
    static VaeParams init(std::size_t image_dim, const std::vector<std::size_t>& encoder_hidden,
                          std::size_t latent_dim, const std::vector<std::size_t>& decoder_hidden,
                          Rng& rng);

    // Layer widths in forward order, used as the checkpoint arch descriptor:
    // "enc=256,256,128;latent=32;dec=32,128,256,256".
    std::string arch_descriptor() const;
    static VaeParams from_arch_descriptor(const std::string& descriptor);

    std::vector<ad::Tensor> parameters() const;
    VaeParams clone() const;

    void validate() const;
};

enum class ClassifierRole { attack, eval };

std::string to_string(ClassifierRole role);
ClassifierRole parse_classifier_role(const std::string& text);

struct ClassifierParams {
    std::vector<Dense> layers;  // final layer has width 1
    ClassifierRole role = ClassifierRole::eval;

    static ClassifierParams init(std::size_t image_dim, const std::vector<std::size_t>& hidden,
                                 ClassifierRole role, Rng& rng);

    std::size_t input_dim() const { return layers.front().in(); }

    // "layers=256,128,64,1;role=eval"
    std::string arch_descriptor() const;
    static ClassifierParams from_arch_descriptor(const std::string& descriptor);

    std::vector<ad::Tensor> parameters() const;
    ClassifierParams clone() const;

    void validate() const;
};

struct Encoding {
    ad::Tensor mu;
    ad::Tensor log_var;
};

Encoding encode(const ad::Tensor& x, const VaeParams& vae);

// z = mu + exp(log_var / 2) * eps with eps ~ N(0, 1) drawn from rng; eps is a
// constant of the graph.
ad::Tensor sample_latent(const ad::Tensor& mu, const ad::Tensor& log_var, Rng& rng);

ad::Tensor decode(const ad::Tensor& z, const VaeParams& vae);

// [batch x 1] scores in (0, 1).
ad::Tensor classify(const ad::Tensor& x, const ClassifierParams& classifier);

// Reconstruction BCE per image (bce() times the pixel count, i.e. summed over
// pixels and averaged over the batch) + alpha * kl_standard_normal(mu, log_var).
// x and x_hat are [batch x pixels].
ad::Tensor vae_loss(const ad::Tensor& x, const ad::Tensor& x_hat, const ad::Tensor& mu,
                    const ad::Tensor& log_var, double alpha);

}  // namespace latpoison::models
