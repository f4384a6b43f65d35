#pragma once

// Counter-based random streams.
//
// Every random quantity in the library is drawn from a Philox4x32-10 block
// cipher keyed by the run seed.  A stream is identified by (domain, id) and
// walks a 64-bit block counter, so the value of the k-th draw of a stream
// depends only on (seed, domain, id, k).  That is what makes simulations
// bit-identical regardless of how agents are distributed over threads.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>

namespace income {

class Philox4x32 {
public:
    using Block = std::array<std::uint32_t, 4>;

    explicit constexpr Philox4x32(std::uint64_t seed) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)}
    {
    }

    constexpr Block operator()(Block ctr) const noexcept
    {
        std::array<std::uint32_t, 2> key = key_;
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kWeyl0;
                key[1] += kWeyl1;
            }
            const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
            ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
                   static_cast<std::uint32_t>(p1),
                   static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
                   static_cast<std::uint32_t>(p0)};
        }
        return ctr;
    }

    /// Same as operator() on n counters held as four separate lanes, updated in
    /// place.  The layout lets the compiler vectorize across counters.
    void apply_batch(std::uint32_t* c0, std::uint32_t* c1, std::uint32_t* c2, std::uint32_t* c3,
                     std::size_t n) const noexcept
    {
        std::uint32_t k0 = key_[0], k1 = key_[1];
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                k0 += kWeyl0;
                k1 += kWeyl1;
            }
            for (std::size_t i = 0; i < n; ++i) {
                const std::uint64_t p0 = std::uint64_t{kMul0} * c0[i];
                const std::uint64_t p1 = std::uint64_t{kMul1} * c2[i];
                const std::uint32_t n0 = static_cast<std::uint32_t>(p1 >> 32) ^ c1[i] ^ k0;
                const std::uint32_t n2 = static_cast<std::uint32_t>(p0 >> 32) ^ c3[i] ^ k1;
                c1[i] = static_cast<std::uint32_t>(p1);
                c3[i] = static_cast<std::uint32_t>(p0);
                c0[i] = n0;
                c2[i] = n2;
            }
        }
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    std::array<std::uint32_t, 2> key_;
};

/// Stream domains keep independent consumers of one seed from overlapping.
enum class StreamDomain : std::uint32_t {
    dynamics = 0,
    initial_state = 1,
    sampling = 2,
    survey = 3,
    dynamics_fallback = 4,
    test = 0xFFFF,
};

/// Sequential view of one counter-based stream.  Cheap to construct; the
/// position can be saved and restored to resume the stream exactly.
class CounterStream {
public:
    CounterStream(std::uint64_t seed, StreamDomain domain, std::uint32_t id,
                  std::uint64_t position = 0) noexcept
        : cipher_(seed), domain_(static_cast<std::uint32_t>(domain)), id_(id)
    {
        seek(position);
    }

    /// Number of 64-bit words consumed so far.
    std::uint64_t position() const noexcept { return 2 * block_ + lane_; }

    void seek(std::uint64_t position) noexcept
    {
        block_ = position / 2;
        refill();
        lane_ = static_cast<unsigned>(position % 2);
    }

    std::uint64_t next_u64() noexcept
    {
        if (lane_ == 2) {
            ++block_;
            refill();
        }
        return buffer_[lane_++];
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1).
    double uniform_open() noexcept
    {
        return (static_cast<double>(next_u64() >> 12) + 0.5) * 0x1.0p-52;
    }

    double normal() noexcept;

    /// Gamma(shape, 1) variate (Marsaglia and Tsang; shape < 1 boosted).
    double gamma(double shape) noexcept;

private:
    void refill() noexcept
    {
        const auto out = cipher_({static_cast<std::uint32_t>(block_),
                                  static_cast<std::uint32_t>(block_ >> 32), id_, domain_});
        buffer_[0] = (std::uint64_t{out[1]} << 32) | out[0];
        buffer_[1] = (std::uint64_t{out[3]} << 32) | out[2];
        lane_ = 0;
    }

    Philox4x32 cipher_;
    std::uint32_t domain_;
    std::uint32_t id_;
    std::uint64_t block_ = 0;
    unsigned lane_ = 0;
    std::array<std::uint64_t, 2> buffer_{};
};

namespace detail {

// 256-layer ziggurat for the standard normal.  Layer index and magnitude come
// from disjoint bits of the same word.
struct ZigguratTables {
    static constexpr int kLayers = 256;
    static constexpr unsigned kMask = kLayers - 1;
    static constexpr double kTailStart = 3.6541528853610088;
    static constexpr double kLayerArea = 4.92867323399e-3;

    std::array<double, kLayers + 1> x{};
    std::array<double, kLayers + 1> f{};  ///< exp(-x^2 / 2) at each edge
    std::array<double, kLayers> ratio{};

    ZigguratTables() noexcept
    {
        const double f_r = std::exp(-0.5 * kTailStart * kTailStart);
        x[0] = kLayerArea / f_r;
        x[1] = kTailStart;
        for (int i = 2; i < kLayers; ++i) {
            x[i] = std::sqrt(-2.0 * std::log(kLayerArea / x[i - 1] +
                                             std::exp(-0.5 * x[i - 1] * x[i - 1])));
        }
        x[kLayers] = 0.0;
        for (int i = 0; i < kLayers; ++i) ratio[i] = x[i + 1] / x[i];
        for (int i = 0; i <= kLayers; ++i) f[i] = std::exp(-0.5 * x[i] * x[i]);
    }
};

inline const ZigguratTables& ziggurat() noexcept
{
    static const ZigguratTables tables;
    return tables;
}

}  // namespace detail

namespace detail {

/// Fast path of the ziggurat for a 32-bit word: 8 bits pick the layer, the
/// top 24 bits give a signed abscissa.  Returns false when the draw falls
/// outside the layer's rectangle and the slow path must decide.
inline bool ziggurat_try(std::uint32_t bits, unsigned& layer, double& u, double& out) noexcept
{
    const auto& zig = ziggurat();
    layer = bits & ZigguratTables::kMask;
    u = static_cast<double>(bits >> 8) * 0x1.0p-23 - 1.0;
    if (std::fabs(u) < zig.ratio[layer]) {
        out = u * zig.x[layer];
        return true;
    }
    return false;
}

/// Wedge and tail handling; further randomness comes from `stream`.
template <class Stream>
double ziggurat_slow(unsigned layer, double u, Stream& stream) noexcept
{
    const auto& zig = ziggurat();
    constexpr double r = ZigguratTables::kTailStart;
    for (;;) {
        if (layer == 0) {
            double xt, yt;
            do {
                xt = std::log(stream.uniform_open()) / r;
                yt = std::log(stream.uniform_open());
            } while (-2.0 * yt < xt * xt);
            return u < 0.0 ? xt - r : r - xt;
        }
        const double x = u * zig.x[layer];
        const double f0 = zig.f[layer];
        const double f1 = zig.f[layer + 1];
        if (f1 + stream.uniform() * (f0 - f1) < std::exp(-0.5 * x * x)) return x;

        const std::uint64_t bits = stream.next_u64();
        layer = static_cast<unsigned>(bits & ZigguratTables::kMask);
        u = static_cast<double>(bits >> 11) * 0x1.0p-52 - 1.0;
        if (std::fabs(u) < zig.ratio[layer]) return u * zig.x[layer];
    }
}

}  // namespace detail

inline double CounterStream::normal() noexcept
{
    const auto& zig = detail::ziggurat();
    const std::uint64_t bits = next_u64();
    const unsigned layer = static_cast<unsigned>(bits & detail::ZigguratTables::kMask);
    const double u = static_cast<double>(bits >> 11) * 0x1.0p-52 - 1.0;  // [-1, 1)
    if (std::fabs(u) < zig.ratio[layer]) return u * zig.x[layer];
    return detail::ziggurat_slow(layer, u, *this);
}

inline double CounterStream::gamma(double shape) noexcept
{
    if (shape < 1.0) {
        const double g = gamma(shape + 1.0);
        return g * std::pow(uniform_open(), 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double z, v;
        do {
            z = normal();
            v = 1.0 + c * z;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform_open();
        if (u < 1.0 - 0.0331 * z * z * z * z) return d * v;
        if (std::log(u) < 0.5 * z * z + d * (1.0 - v + std::log(v))) return d * v;
    }
}

}  // namespace income
