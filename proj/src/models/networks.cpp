#include "latpoison/models/networks.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "latpoison/autodiff/ops.hpp"

namespace latpoison::models {

namespace {

std::string join(const std::vector<std::size_t>& widths) {
    std::string out;
    for (std::size_t i = 0; i < widths.size(); ++i) {
        if (i > 0) {
            out += ",";
        }
        out += std::to_string(widths[i]);
    }
    return out;
}

std::vector<std::size_t> parse_widths(const std::string& text) {
    std::vector<std::size_t> widths;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        std::size_t used = 0;
        const auto value = std::stoull(item, &used);
        if (used != item.size() || value == 0) {
            throw std::invalid_argument("bad layer width '" + item + "'");
        }
        widths.push_back(value);
    }
    return widths;
}

// Splits "a=..;b=.." into ordered key/value pairs.
std::vector<std::pair<std::string, std::string>> parse_fields(const std::string& descriptor) {
    std::vector<std::pair<std::string, std::string>> fields;
    std::stringstream in(descriptor);
    std::string item;
    while (std::getline(in, item, ';')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("malformed arch descriptor field '" + item + "'");
        }
        fields.emplace_back(item.substr(0, eq), item.substr(eq + 1));
    }
    return fields;
}

const std::string& field(const std::vector<std::pair<std::string, std::string>>& fields,
                         const std::string& key) {
    for (const auto& [k, v] : fields) {
        if (k == key) {
            return v;
        }
    }
    throw std::invalid_argument("arch descriptor missing '" + key + "'");
}

ad::Tensor forward_trunk(ad::Tensor h, const std::vector<Dense>& layers) {
    for (const auto& layer : layers) {
        h = ad::leaky_relu(ad::linear(h, layer.weights, layer.bias), kLeakySlope);
    }
    return h;
}

void require_width(const char* op, const ad::Tensor& x, std::size_t expected) {
    if (x.shape().size() != 2 || x.dim(1) != expected) {
        throw ad::ShapeError(op, "input " + ad::to_string(x.shape()) + " does not have width " +
                                     std::to_string(expected));
    }
}

void append(std::vector<ad::Tensor>& out, const Dense& layer) {
    out.push_back(layer.weights);
    out.push_back(layer.bias);
}

std::vector<Dense> make_stack(const std::vector<std::size_t>& widths, Rng& rng,
                              const std::string& prefix) {
    std::vector<Dense> layers;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        layers.push_back(
            Dense::init(widths[i], widths[i + 1], rng, prefix + "." + std::to_string(i)));
    }
    return layers;
}

std::vector<Dense> clone_stack(const std::vector<Dense>& layers) {
    std::vector<Dense> out;
    out.reserve(layers.size());
    for (const auto& l : layers) {
        out.push_back(l.clone());
    }
    return out;
}

}  // namespace

Dense Dense::init(std::size_t in, std::size_t out, Rng& rng, const std::string& name) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::vector<double> w(in * out);
    for (auto& v : w) {
        v = rng.uniform(-limit, limit);
    }
    Dense layer;
    layer.weights = ad::Tensor::from({in, out}, std::move(w), true).set_name(name + ".weights");
    layer.bias = ad::Tensor::zeros({out}, true).set_name(name + ".bias");
    return layer;
}

Dense Dense::zeros(std::size_t in, std::size_t out, const std::string& name) {
    Dense layer;
    layer.weights = ad::Tensor::zeros({in, out}, true).set_name(name + ".weights");
    layer.bias = ad::Tensor::zeros({out}, true).set_name(name + ".bias");
    return layer;
}

Dense Dense::clone() const { return Dense{weights.clone(), bias.clone()}; }

VaeParams VaeParams::init(std::size_t image_dim, const std::vector<std::size_t>& encoder_hidden,
                          std::size_t latent_dim, const std::vector<std::size_t>& decoder_hidden,
                          Rng& rng) {
    if (image_dim == 0 || latent_dim == 0) {
        throw std::invalid_argument("VaeParams: image and latent widths must be positive");
    }
    VaeParams vae;
    vae.image_dim = image_dim;
    vae.latent_dim = latent_dim;
    std::vector<std::size_t> enc{image_dim};
    enc.insert(enc.end(), encoder_hidden.begin(), encoder_hidden.end());
    vae.encoder = make_stack(enc, rng, "encoder");
    vae.mu_head = Dense::init(enc.back(), latent_dim, rng, "encoder.mu");
    vae.log_var_head = Dense::init(enc.back(), latent_dim, rng, "encoder.log_var");
    std::vector<std::size_t> dec{latent_dim};
    dec.insert(dec.end(), decoder_hidden.begin(), decoder_hidden.end());
    dec.push_back(image_dim);
    vae.decoder = make_stack(dec, rng, "decoder");
    return vae;
}

std::string VaeParams::arch_descriptor() const {
    std::vector<std::size_t> enc{image_dim};
    for (const auto& l : encoder) {
        enc.push_back(l.out());
    }
    std::vector<std::size_t> dec{latent_dim};
    for (const auto& l : decoder) {
        dec.push_back(l.out());
    }
    return "enc=" + join(enc) + ";latent=" + std::to_string(latent_dim) + ";dec=" + join(dec);
}

VaeParams VaeParams::from_arch_descriptor(const std::string& descriptor) {
    const auto fields = parse_fields(descriptor);
    const auto enc = parse_widths(field(fields, "enc"));
    const auto dec = parse_widths(field(fields, "dec"));
    const auto latent = std::stoull(field(fields, "latent"));
    if (enc.empty() || dec.size() < 2 || dec.front() != latent || dec.back() != enc.front()) {
        throw std::invalid_argument("inconsistent VAE arch descriptor '" + descriptor + "'");
    }
    VaeParams vae;
    vae.image_dim = enc.front();
    vae.latent_dim = latent;
    for (std::size_t i = 0; i + 1 < enc.size(); ++i) {
        vae.encoder.push_back(Dense::zeros(enc[i], enc[i + 1], "encoder." + std::to_string(i)));
    }
    vae.mu_head = Dense::zeros(enc.back(), latent, "encoder.mu");
    vae.log_var_head = Dense::zeros(enc.back(), latent, "encoder.log_var");
    for (std::size_t i = 0; i + 1 < dec.size(); ++i) {
        vae.decoder.push_back(Dense::zeros(dec[i], dec[i + 1], "decoder." + std::to_string(i)));
    }
    return vae;
}

std::vector<ad::Tensor> VaeParams::parameters() const {
    std::vector<ad::Tensor> out;
    for (const auto& l : encoder) {
        append(out, l);
    }
    append(out, mu_head);
    append(out, log_var_head);
    for (const auto& l : decoder) {
        append(out, l);
    }
    return out;
}

VaeParams VaeParams::clone() const {
    VaeParams copy;
    copy.encoder = clone_stack(encoder);
    copy.mu_head = mu_head.clone();
    copy.log_var_head = log_var_head.clone();
    copy.decoder = clone_stack(decoder);
    copy.image_dim = image_dim;
    copy.latent_dim = latent_dim;
    return copy;
}

void VaeParams::validate() const {
    const std::size_t trunk_in = encoder.empty() ? mu_head.in() : encoder.front().in();
    if (trunk_in != image_dim || decoder.empty() || decoder.back().out() != image_dim) {
        throw std::invalid_argument("VaeParams: encoder input and decoder output must equal image_dim");
    }
    if (mu_head.out() != latent_dim || log_var_head.out() != latent_dim ||
        decoder.front().in() != latent_dim) {
        throw std::invalid_argument("VaeParams: mu/log_var heads must have width latent_dim");
    }
}

std::string to_string(ClassifierRole role) {
    return role == ClassifierRole::attack ? "attack" : "eval";
}

ClassifierRole parse_classifier_role(const std::string& text) {
    if (text == "attack") {
        return ClassifierRole::attack;
    }
    if (text == "eval") {
        return ClassifierRole::eval;
    }
    throw std::invalid_argument("unknown classifier role '" + text + "' (expected attack|eval)");
}

ClassifierParams ClassifierParams::init(std::size_t image_dim,
                                        const std::vector<std::size_t>& hidden,
                                        ClassifierRole role, Rng& rng) {
    std::vector<std::size_t> widths{image_dim};
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(1);
    ClassifierParams clf;
    clf.layers = make_stack(widths, rng, "classifier");
    clf.role = role;
    return clf;
}

std::string ClassifierParams::arch_descriptor() const {
    std::vector<std::size_t> widths{layers.front().in()};
    for (const auto& l : layers) {
        widths.push_back(l.out());
    }
    return "layers=" + join(widths) + ";role=" + to_string(role);
}

ClassifierParams ClassifierParams::from_arch_descriptor(const std::string& descriptor) {
    const auto fields = parse_fields(descriptor);
    const auto widths = parse_widths(field(fields, "layers"));
    if (widths.size() < 2 || widths.back() != 1) {
        throw std::invalid_argument("inconsistent classifier arch descriptor '" + descriptor + "'");
    }
    ClassifierParams clf;
    clf.role = parse_classifier_role(field(fields, "role"));
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        clf.layers.push_back(
            Dense::zeros(widths[i], widths[i + 1], "classifier." + std::to_string(i)));
    }
    return clf;
}

std::vector<ad::Tensor> ClassifierParams::parameters() const {
    std::vector<ad::Tensor> out;
    for (const auto& l : layers) {
        append(out, l);
    }
    return out;
}

ClassifierParams ClassifierParams::clone() const {
    return ClassifierParams{clone_stack(layers), role};
}

void ClassifierParams::validate() const {
    if (layers.empty() || layers.back().out() != 1) {
        throw std::invalid_argument("ClassifierParams: output width must be exactly 1");
    }
}

Encoding encode(const ad::Tensor& x, const VaeParams& vae) {
    require_width("encode", x, vae.image_dim);
    const auto h = forward_trunk(x, vae.encoder);
    return Encoding{ad::linear(h, vae.mu_head.weights, vae.mu_head.bias),
                    ad::linear(h, vae.log_var_head.weights, vae.log_var_head.bias)};
}

ad::Tensor sample_latent(const ad::Tensor& mu, const ad::Tensor& log_var, Rng& rng) {
    if (mu.shape() != log_var.shape()) {
        throw ad::ShapeError("sample_latent", mu.shape(), log_var.shape());
    }
    std::vector<double> eps(mu.size());
    for (auto& e : eps) {
        e = rng.normal();
    }
    const auto noise = ad::Tensor::from(mu.shape(), std::move(eps));
    const auto sd = ad::exp(ad::scale(log_var, 0.5));
    return ad::add(mu, ad::mul(sd, noise));
}

ad::Tensor decode(const ad::Tensor& z, const VaeParams& vae) {
    require_width("decode", z, vae.latent_dim);
    ad::Tensor h = z;
    for (std::size_t i = 0; i < vae.decoder.size(); ++i) {
        const auto& layer = vae.decoder[i];
        h = ad::linear(h, layer.weights, layer.bias);
        h = i + 1 < vae.decoder.size() ? ad::leaky_relu(h, kLeakySlope) : ad::sigmoid(h);
    }
    return h;
}

ad::Tensor classify(const ad::Tensor& x, const ClassifierParams& classifier) {
    require_width("classify", x, classifier.input_dim());
    ad::Tensor h = x;
    for (std::size_t i = 0; i < classifier.layers.size(); ++i) {
        const auto& layer = classifier.layers[i];
        h = ad::linear(h, layer.weights, layer.bias);
        h = i + 1 < classifier.layers.size() ? ad::leaky_relu(h, kLeakySlope) : ad::sigmoid(h);
    }
    return h;
}

ad::Tensor vae_loss(const ad::Tensor& x, const ad::Tensor& x_hat, const ad::Tensor& mu,
                    const ad::Tensor& log_var, double alpha) {
    if (alpha < 0.0) {
        throw std::invalid_argument("vae_loss: alpha must be non-negative");
    }
    if (x.shape().size() != 2) {
        throw ad::ShapeError("vae_loss", "expected [batch x pixels], got " + ad::to_string(x.shape()));
    }
    // Per-image BCE (summed over pixels) averaged over the batch.
    const auto reconstruction = ad::scale(ad::bce(x_hat, x), static_cast<double>(x.dim(1)));
    if (alpha == 0.0) {
        return reconstruction;
    }
    return ad::add(reconstruction, ad::scale(ad::kl_standard_normal(mu, log_var), alpha));
}

}  // namespace latpoison::models
