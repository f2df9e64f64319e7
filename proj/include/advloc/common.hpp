#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace advloc {

inline constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double d) { return d * kPi / 180.0; }
inline double rad_to_deg(double r) { return r * 180.0 / kPi; }

// Wrap an angle to [-pi, pi).
inline double wrap_angle(double t) {
    double w = t - 2.0 * kPi * std::floor((t + kPi) / (2.0 * kPi));
    if (w >= kPi) w -= 2.0 * kPi;  // guard the half-open boundary
    return w;
}

struct Vec2 {
    double x = 0.0, y = 0.0;

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double dot(Vec2 o) const { return x * o.x + y * o.y; }
    double norm() const { return std::hypot(x, y); }
    Vec2 normalized() const {
        double n = norm();
        return n > 0.0 ? Vec2{x / n, y / n} : Vec2{};
    }
    // 90 degrees clockwise (right-hand side of a heading).
    Vec2 perp_right() const { return {y, -x}; }
};

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(Vec3 o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(Vec3 o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double dot(Vec3 o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const {
        double n = norm();
        return n > 0.0 ? Vec3{x / n, y / n, z / n} : Vec3{};
    }
    Vec3 cross(Vec3 o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
};

// Vehicle state: position in map meters, heading in [-pi, pi).
struct Pose {
    double x = 0.0;
    double y = 0.0;
    double theta = 0.0;
};

// ---------------------------------------------------------------------------
// Errors. One type per contract failure named by the operation specs.

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct RouteError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct RenderError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct CalibrationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EvaluationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct EstimationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct ComparisonError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct PipelineError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Deterministic RNG (splitmix64). Kept in-repo so generated worlds and
// training runs do not depend on the standard library's distribution
// implementations.

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline uint64_t hash_u64(uint64_t x) {
    uint64_t s = x;
    return splitmix64(s);
}

inline uint64_t hash_combine(uint64_t a, uint64_t b) {
    return hash_u64(a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2)));
}

class Rng {
public:
    explicit Rng(uint64_t seed = 0) : state_(seed) {}

    uint64_t next_u64() { return splitmix64(state_); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi] inclusive.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        return lo + static_cast<int64_t>(next_u64() % span);
    }

    // Standard normal via Box-Muller.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * kPi * u2);
        has_spare_ = true;
        return r * std::cos(2.0 * kPi * u2);
    }

    // Independent stream derived from this seed and a salt.
    Rng fork(uint64_t salt) const { return Rng(hash_combine(state_, salt)); }

private:
    uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// ---------------------------------------------------------------------------
// Strided parallel loop. Worker t handles indices t, t+T, t+2T, ... so the
// index->worker assignment is a pure function of (n, threads); callers that
// keep per-worker accumulators and reduce them in worker order stay
// deterministic for a fixed thread count.

template <class Fn>
void parallel_for_strided(size_t n, int threads, Fn&& fn) {
    int t_count = threads > 0 ? threads
                              : static_cast<int>(std::thread::hardware_concurrency());
    if (t_count < 1) t_count = 1;
    if (t_count == 1 || n <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i, 0);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(t_count);
    for (int t = 0; t < t_count; ++t) {
        pool.emplace_back([&fn, t, t_count, n] {
            for (size_t i = static_cast<size_t>(t); i < n; i += t_count) fn(i, t);
        });
    }
    for (auto& th : pool) th.join();
}

inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    return hw > 0 ? hw : 1;
}

}  // namespace advloc
