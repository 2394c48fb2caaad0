#include <doctest.h>

#include "amfuse/simd/kernels.hpp"

#include <cstring>
#include <limits>
#include <random>
#include <vector>

using namespace amfuse::simd;

namespace {

std::vector<Isa> available_isas()
{
    std::vector<Isa> out{Isa::scalar};
    const Isa saved = active_isa();
    for (Isa isa : {Isa::avx2, Isa::neon})
        if (set_active_isa(isa))
            out.push_back(isa);
    set_active_isa(saved);
    return out;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b)
{
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("scalar is always available and detection is consistent")
{
    CHECK(set_active_isa(Isa::scalar));
    CHECK(active_isa() == Isa::scalar);
    CHECK(set_active_isa(detected_isa()));
    CHECK(isa_name(Isa::avx2) == "avx2");
}

TEST_CASE("axpy variants match scalar bit for bit")
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    const Isa saved = active_isa();
    for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 33u, 640u, 1001u}) {
        std::vector<double> x(n), y0(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = u(rng);
            y0[i] = u(rng);
        }
        const double a = u(rng);
        std::vector<double> ref = y0;
        kernels_for(Isa::scalar).axpy(a, x.data(), ref.data(), n);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(ref[i] == y0[i] + a * x[i]);
        for (Isa isa : available_isas()) {
            CAPTURE(isa_name(isa));
            std::vector<double> y = y0;
            REQUIRE(set_active_isa(isa));
            axpy(a, x, y);
            CHECK(bit_equal(y, ref));
        }
    }
    set_active_isa(saved);
}

TEST_CASE("fuse_tsdf variants match scalar bit for bit")
{
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-6.0, 6.0), uw(0.0, 3.0);
    const double inf = std::numeric_limits<double>::infinity();
    const Isa saved = active_isa();
    for (std::size_t n : {1u, 5u, 8u, 13u, 512u, 777u}) {
        std::vector<double> D0(n), W0(n), d(n), w(n), cap(n);
        for (std::size_t i = 0; i < n; ++i) {
            D0[i] = u(rng);
            W0[i] = (i % 5 == 0) ? 0.0 : uw(rng) * 50.0;
            d[i] = u(rng);
            w[i] = (i % 7 == 3) ? 0.0 : uw(rng);
            cap[i] = (i % 3 == 0) ? 0.5 : inf;
        }
        std::vector<double> Dr = D0, Wr = W0;
        kernels_for(Isa::scalar).fuse_tsdf(Dr.data(), Wr.data(), d.data(), w.data(), cap.data(), 128.0, n);
        for (Isa isa : available_isas()) {
            CAPTURE(isa_name(isa));
            std::vector<double> D = D0, W = W0;
            REQUIRE(set_active_isa(isa));
            fuse_tsdf({D, W, d, w, cap, 128.0});
            CHECK(bit_equal(D, Dr));
            CHECK(bit_equal(W, Wr));
        }
    }
    set_active_isa(saved);
}

TEST_CASE("fuse_tsdf update rule")
{
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> D{0.5, 0.0, 1.0, 2.0}, W{2.0, 0.0, 10.0, 127.5};
    const std::vector<double> d{0.2, -0.7, 3.0, 0.0}, w{1.0, 1.0, 1.0, 1.0}, cap{inf, inf, 0.5, inf};
    set_active_isa(Isa::scalar);
    fuse_tsdf({D, W, d, w, cap, 128.0});
    CHECK(D[0] == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(W[0] == 3.0);
    CHECK(D[1] == -0.7);
    CHECK(W[1] == 1.0);
    CHECK(D[2] == doctest::Approx((0.5 * 1.0 + 3.0) / 1.5));
    CHECK(W[2] == 1.5);
    CHECK(W[3] == 128.0);
    set_active_isa(detected_isa());
}

TEST_CASE("rigid_transform variants match scalar bit for bit")
{
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(-100.0, 100.0);
    const double r[9] = {0.36, 0.48, -0.8, -0.8, 0.6, 0.0, 0.48, 0.64, 0.6};
    const double t[3] = {10.0, -5.0, 100.0};
    const Isa saved = active_isa();
    for (std::size_t n : {1u, 4u, 9u, 640u, 1923u}) {
        std::vector<double> x0(n), y0(n), z0(n);
        for (std::size_t i = 0; i < n; ++i) {
            x0[i] = u(rng);
            y0[i] = u(rng);
            z0[i] = u(rng);
        }
        std::vector<double> xr = x0, yr = y0, zr = z0;
        kernels_for(Isa::scalar).rigid_transform(r, t, xr.data(), yr.data(), zr.data(), n);
        CHECK(xr[0] == doctest::Approx(r[0] * x0[0] + r[1] * y0[0] + r[2] * z0[0] + t[0]));
        for (Isa isa : available_isas()) {
            CAPTURE(isa_name(isa));
            std::vector<double> x = x0, y = y0, z = z0;
            REQUIRE(set_active_isa(isa));
            rigid_transform(r, t, x, y, z);
            CHECK(bit_equal(x, xr));
            CHECK(bit_equal(y, yr));
            CHECK(bit_equal(z, zr));
        }
    }
    set_active_isa(saved);
}
