#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ctpe/embedding.hpp"
#include "ctpe/error.hpp"
#include "ctpe/io.hpp"
#include "ctpe/rng.hpp"

// The text encoder: parallel convolution blocks (one per window width) with
// ReLU and max pooling over time, concatenated into one vector. Forward
// records a trace (pool argmax + activation gate) from which backward
// computes exact parameter and input gradients.

namespace ctpe {

struct ConvBlock {
    std::size_t width = 1;
    std::vector<double> kernels;  // n_f x (width*dim); [j*(width*dim) + k*dim + r]
    std::vector<double> bias;     // n_f
};

struct EncoderParams {
    std::size_t dim = 0;
    std::size_t l = 0;
    std::size_t n_f = 0;
    std::vector<ConvBlock> blocks;  // widths ascending

    std::size_t out_dim() const { return blocks.size() * n_f; }

    std::size_t max_width() const {
        std::size_t w = 0;
        for (const auto& b : blocks) w = std::max(w, b.width);
        return w;
    }

    std::uint64_t fingerprint() const {
        io::Fnv1a h;
        h.feed_u64(dim);
        h.feed_u64(l);
        h.feed_u64(n_f);
        h.feed_u64(blocks.size());
        for (const auto& b : blocks) {
            h.feed_u64(b.width);
            for (double v : b.kernels) h.feed_f64(v);
            for (double v : b.bias) h.feed_f64(v);
        }
        return h.state;
    }
};

// former encodes f, latter encodes b; the towers share shape, not weights
struct TwinEncoder {
    EncoderParams former;
    EncoderParams latter;

    std::uint64_t fingerprint() const {
        io::Fnv1a h;
        h.feed_u64(former.fingerprint());
        h.feed_u64(latter.fingerprint());
        return h.state;
    }
};

inline void validate_widths(const std::vector<std::size_t>& widths, std::size_t l) {
    if (widths.empty()) throw ConfigError("at least one window width is required");
    for (std::size_t i = 0; i < widths.size(); ++i) {
        if (widths[i] == 0) throw ConfigError("window width must be positive");
        if (i > 0 && widths[i] <= widths[i - 1])
            throw ConfigError("window widths must be strictly ascending");
    }
    if (widths.back() > l)
        throw ConfigError("largest window width exceeds padded length l");
}

// uniform in +-sqrt(6/(fan_in+fan_out)) per block, biases zero
inline EncoderParams init_encoder(std::size_t dim, std::size_t l, std::size_t n_f,
                                  const std::vector<std::size_t>& widths, std::uint64_t seed) {
    if (dim == 0 || n_f == 0) throw ConfigError("dim and n_f must be positive");
    validate_widths(widths, l);
    EncoderParams p;
    p.dim = dim;
    p.l = l;
    p.n_f = n_f;
    Rng rng(seed);
    for (std::size_t w : widths) {
        ConvBlock b;
        b.width = w;
        const std::size_t fan_in = dim * w;
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + n_f));
        b.kernels.resize(n_f * fan_in);
        for (double& v : b.kernels) v = (2.0 * rng.unit() - 1.0) * bound;
        b.bias.assign(n_f, 0.0);
        p.blocks.push_back(std::move(b));
    }
    return p;
}

inline TwinEncoder init_twin(std::size_t dim, std::size_t l, std::size_t n_f,
                             const std::vector<std::size_t>& widths, std::uint64_t seed) {
    TwinEncoder t;
    t.former = init_encoder(dim, l, n_f, widths, derive_seed(seed, 0xf0));
    t.latter = init_encoder(dim, l, n_f, widths, derive_seed(seed, 0xb0));
    return t;
}

inline EncoderParams zero_like(const EncoderParams& p) {
    EncoderParams z = p;
    for (auto& b : z.blocks) {
        std::fill(b.kernels.begin(), b.kernels.end(), 0.0);
        std::fill(b.bias.begin(), b.bias.end(), 0.0);
    }
    return z;
}

// ---------------------------------------------------------------------------
// forward / backward

struct ForwardTrace {
    SequenceMatrix input;                         // copy of the encoded sequence
    std::vector<std::vector<std::size_t>> argmax; // [block][filter] pooled position
    std::vector<std::vector<char>> active;        // [block][filter] relu gate at argmax
    std::vector<double> output;
};

// Pooling runs over valid positions only (padding never wins); ties go to the
// smallest position. Throws SequenceTooShort when the sequence has fewer
// covered tokens than the widest window.
inline std::vector<double> forward(const EncoderParams& p, const SequenceMatrix& m,
                                   ForwardTrace* trace = nullptr) {
    if (m.dim != p.dim || m.l != p.l)
        throw ShapeMismatch("sequence is " + std::to_string(m.dim) + "x" + std::to_string(m.l) +
                            ", encoder expects " + std::to_string(p.dim) + "x" +
                            std::to_string(p.l));
    if (m.valid_len < p.max_width())
        throw SequenceTooShort("sequence has " + std::to_string(m.valid_len) +
                               " covered tokens, narrower than the widest window (" +
                               std::to_string(p.max_width()) + ")");
    std::vector<double> out;
    out.reserve(p.out_dim());
    if (trace) {
        trace->input = m;
        trace->argmax.assign(p.blocks.size(), {});
        trace->active.assign(p.blocks.size(), {});
    }
    for (std::size_t bi = 0; bi < p.blocks.size(); ++bi) {
        const auto& b = p.blocks[bi];
        const std::size_t span = b.width * p.dim;
        const std::size_t positions = m.valid_len - b.width + 1;
        if (trace) {
            trace->argmax[bi].resize(p.n_f);
            trace->active[bi].resize(p.n_f);
        }
        for (std::size_t j = 0; j < p.n_f; ++j) {
            const double* kernel = b.kernels.data() + j * span;
            double best_a = -1.0;  // relu output is >= 0, so any position beats this
            double best_z = 0.0;
            std::size_t best_p = 0;
            for (std::size_t pos = 0; pos < positions; ++pos) {
                const double* window = m.col(pos);  // columns pos..pos+width-1 are contiguous
                double z = b.bias[j];
                for (std::size_t k = 0; k < span; ++k) z += kernel[k] * window[k];
                const double a = z > 0.0 ? z : 0.0;
                if (a > best_a) {
                    best_a = a;
                    best_z = z;
                    best_p = pos;
                }
            }
            out.push_back(best_a);
            if (trace) {
                trace->argmax[bi][j] = best_p;
                trace->active[bi][j] = best_z > 0.0 ? 1 : 0;
            }
        }
    }
    if (trace) trace->output = out;
    return out;
}

// Accumulates d(objective)/d(params) into grad (same shape as p, zeroed by
// the caller or reused across a batch) given d(objective)/d(output). The
// optional grad_input receives d(objective)/d(sequence values).
inline void backward(const EncoderParams& p, const ForwardTrace& trace,
                     const std::vector<double>& grad_out, EncoderParams& grad,
                     SequenceMatrix* grad_input = nullptr) {
    if (grad_out.size() != p.out_dim())
        throw ShapeMismatch("gradient has " + std::to_string(grad_out.size()) +
                            " entries, encoder emits " + std::to_string(p.out_dim()));
    if (trace.argmax.size() != p.blocks.size() || trace.input.dim != p.dim)
        throw TraceMismatch("trace does not belong to this encoder");
    if (grad_input && (grad_input->dim != p.dim || grad_input->l != p.l))
        throw ShapeMismatch("input gradient buffer has the wrong shape");

    for (std::size_t bi = 0; bi < p.blocks.size(); ++bi) {
        const auto& b = p.blocks[bi];
        auto& gb = grad.blocks[bi];
        const std::size_t span = b.width * p.dim;
        if (trace.argmax[bi].size() != p.n_f) throw TraceMismatch("trace filter count differs");
        for (std::size_t j = 0; j < p.n_f; ++j) {
            const double g = grad_out[bi * p.n_f + j];
            if (g == 0.0 || !trace.active[bi][j]) continue;
            const std::size_t pos = trace.argmax[bi][j];
            const double* window = trace.input.col(pos);
            double* gkernel = gb.kernels.data() + j * span;
            const double* kernel = b.kernels.data() + j * span;
            gb.bias[j] += g;
            for (std::size_t k = 0; k < span; ++k) gkernel[k] += g * window[k];
            if (grad_input) {
                double* gwin = grad_input->col(pos);
                for (std::size_t k = 0; k < span; ++k) gwin[k] += g * kernel[k];
            }
        }
    }
}

// ---------------------------------------------------------------------------
// vector geometry

inline double dot(const std::vector<double>& u, const std::vector<double>& v) {
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
    return s;
}

inline double norm(const std::vector<double>& v) { return std::sqrt(dot(v, v)); }

// clamped to [-1, 1]; throws ZeroVector when either argument has zero norm
inline double cosine(const std::vector<double>& u, const std::vector<double>& v) {
    if (u.size() != v.size()) throw ShapeMismatch("cosine of vectors with different sizes");
    const double nu = norm(u), nv = norm(v);
    if (nu == 0.0 || nv == 0.0) throw ZeroVector("cosine of a zero vector");
    return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

struct CosineWithGrad {
    double value = 0.0;
    std::vector<double> du, dv;
};

// d cos / d u = v/(|u||v|) - cos * u/|u|^2, symmetrically for v
inline CosineWithGrad cosine_with_grad(const std::vector<double>& u, const std::vector<double>& v) {
    if (u.size() != v.size()) throw ShapeMismatch("cosine of vectors with different sizes");
    const double nu = norm(u), nv = norm(v);
    if (nu == 0.0 || nv == 0.0) throw ZeroVector("cosine of a zero vector");
    const double c = dot(u, v) / (nu * nv);
    CosineWithGrad out;
    out.value = std::clamp(c, -1.0, 1.0);
    out.du.resize(u.size());
    out.dv.resize(v.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        out.du[i] = v[i] / (nu * nv) - c * u[i] / (nu * nu);
        out.dv[i] = u[i] / (nu * nv) - c * v[i] / (nv * nv);
    }
    return out;
}

// ---------------------------------------------------------------------------
// checkpoint file

struct Checkpoint {
    TwinEncoder twin;
    std::uint64_t table_fingerprint = 0;
};

namespace detail {

inline void write_params(std::ostream& os, const EncoderParams& p) {
    io::write_u64(os, p.dim);
    io::write_u64(os, p.l);
    io::write_u64(os, p.n_f);
    io::write_u64(os, p.blocks.size());
    for (const auto& b : p.blocks) {
        io::write_u64(os, b.width);
        io::write_f64_vec(os, b.kernels);
        io::write_f64_vec(os, b.bias);
    }
}

inline EncoderParams read_params(std::istream& is) {
    EncoderParams p;
    p.dim = io::read_u64(is);
    p.l = io::read_u64(is);
    p.n_f = io::read_u64(is);
    const std::uint64_t nblocks = io::read_u64(is);
    for (std::uint64_t i = 0; i < nblocks; ++i) {
        ConvBlock b;
        b.width = io::read_u64(is);
        b.kernels = io::read_f64_vec(is);
        b.bias = io::read_f64_vec(is);
        p.blocks.push_back(std::move(b));
    }
    return p;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const TwinEncoder& twin,
                            std::uint64_t table_fingerprint) {
    auto os = io::open_out(path, /*binary=*/true);
    io::write_string(os, "ctpe-model-v1");
    io::write_u64(os, table_fingerprint);
    detail::write_params(os, twin.former);
    detail::write_params(os, twin.latter);
    io::write_u64(os, twin.fingerprint());
}

inline Checkpoint load_checkpoint(const std::string& path) {
    auto is = io::open_in(path, /*binary=*/true);
    if (io::read_string(is) != "ctpe-model-v1") throw DataError("not a ctpe model: " + path);
    Checkpoint c;
    c.table_fingerprint = io::read_u64(is);
    c.twin.former = detail::read_params(is);
    c.twin.latter = detail::read_params(is);
    const std::uint64_t recorded = io::read_u64(is);
    if (recorded != c.twin.fingerprint())
        throw FingerprintMismatch("model file is corrupt (fingerprint differs): " + path);
    return c;
}

}  // namespace ctpe
