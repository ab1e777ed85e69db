#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "psc/errors.hpp"
#include "psc/kernels.hpp"
#include "psc/rng.hpp"
#include "support/oracles.hpp"

using namespace psc::kernels;
using psc::Rng;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = (rng.uniform01() * 2.0 - 1.0) * scale;
  return v;
}

/// Engine weight layout is (k, c_in, c_out); the oracle uses (c_out, k, c_in).
std::vector<double> to_engine_layout(const std::vector<double>& w_oracle,
                                     const ConvShape& s) {
  std::vector<double> w(s.k * s.c_in * s.c_out);
  for (std::size_t o = 0; o < s.c_out; ++o)
    for (std::size_t j = 0; j < s.k; ++j)
      for (std::size_t i = 0; i < s.c_in; ++i)
        w[(j * s.c_in + i) * s.c_out + o] = w_oracle[(o * s.k + j) * s.c_in + i];
  return w;
}

ConvShape random_shape(Rng& rng) {
  ConvShape s;
  s.k = std::vector<std::size_t>{1, 2, 3, 5, 7}[rng.uniform_index(5)];
  s.t_in = s.k + rng.uniform_index(20);
  s.c_in = 1 + rng.uniform_index(9);
  s.c_out = 1 + rng.uniform_index(8);
  return s;
}

struct ConvCase {
  ConvShape shape;
  std::vector<double> x, w_oracle, w, b;
};

ConvCase random_conv_case(Rng& rng) {
  ConvCase c;
  c.shape = random_shape(rng);
  c.x = random_vec(rng, c.shape.t_in * c.shape.c_in);
  c.w_oracle = random_vec(rng, c.shape.k * c.shape.c_in * c.shape.c_out);
  c.w = to_engine_layout(c.w_oracle, c.shape);
  c.b = random_vec(rng, c.shape.c_out);
  return c;
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("isa names parse and print consistently") {
  CHECK(parse_isa("scalar") == Isa::Scalar);
  CHECK(parse_isa("avx2") == Isa::Avx2);
  CHECK(parse_isa("neon") == Isa::Neon);
  CHECK(!parse_isa("sse9").has_value());
  CHECK(!parse_isa("").has_value());
  for (Isa isa : supported_isas()) CHECK(parse_isa(to_string(isa)) == isa);
}

TEST_CASE("the scalar table is always supported and listed first") {
  auto isas = supported_isas();
  REQUIRE(!isas.empty());
  CHECK(isas.front() == Isa::Scalar);
  CHECK(isa_supported(Isa::Scalar));
  for (Isa isa : isas) CHECK(isa_supported(isa));
  CHECK(std::string(table(Isa::Scalar).name) == "scalar");
  CHECK(isa_supported(best_isa()));
}

TEST_CASE("the active table can be switched among supported isas") {
  const std::string before = active().name;
  for (Isa isa : supported_isas()) {
    set_active(isa);
    CHECK(std::string(active().name) == to_string(isa));
  }
  set_active(*parse_isa(before));
  CHECK(std::string(active().name) == before);
}

TEST_CASE("convolution forward: hand-checked values") {
  const Table& t = table(Isa::Scalar);
  // x = [1,2,3] with one channel, all-ones kernel of width 3: plain sum.
  ConvShape s{3, 1, 1, 3};
  const double x[] = {1.0, 2.0, 3.0};
  const double w[] = {1.0, 1.0, 1.0};
  double b0 = 0.0, out = -1.0;
  t.conv_forward(x, w, &b0, &out, s, false);
  CHECK(out == 6.0);

  double bneg = -10.0;
  t.conv_forward(x, w, &bneg, &out, s, true);
  CHECK(out == 0.0);  // clamped
  t.conv_forward(x, w, &bneg, &out, s, false);
  CHECK(out == -4.0);
}

TEST_CASE("convolution forward matches the brute-force oracle") {
  Rng rng(101);
  for (int rep = 0; rep < 120; ++rep) {
    auto c = random_conv_case(rng);
    const bool relu = rng.uniform_index(2) == 1;
    std::vector<double> got(c.shape.t_out() * c.shape.c_out);
    table(Isa::Scalar).conv_forward(c.x.data(), c.w.data(), c.b.data(), got.data(), c.shape,
                                    relu);
    auto want = oracle::conv1d(c.x, c.shape.t_in, c.shape.c_in, c.w_oracle, c.b, c.shape.c_out,
                               c.shape.k, relu);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i)
      CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
}

TEST_CASE("convolution backward matches independent accumulation loops") {
  Rng rng(102);
  for (int rep = 0; rep < 80; ++rep) {
    auto c = random_conv_case(rng);
    const ConvShape& s = c.shape;
    auto g = random_vec(rng, s.t_out() * s.c_out);

    std::vector<double> dx(s.t_in * s.c_in, -7.0);  // overwritten, not accumulated
    std::vector<double> dw(c.w.size(), 0.0), db(s.c_out, 0.0);
    std::vector<double> w_t(s.k * s.c_out * s.c_in);
    table(Isa::Scalar).conv_backward(c.x.data(), c.w.data(), g.data(), dx.data(), dw.data(),
                                     db.data(), w_t.data(), s);

    std::vector<double> dx_ref(dx.size(), 0.0), dw_ref(dw.size(), 0.0), db_ref(db.size(), 0.0);
    for (std::size_t t = 0; t < s.t_out(); ++t)
      for (std::size_t o = 0; o < s.c_out; ++o) {
        const double up = g[t * s.c_out + o];
        db_ref[o] += up;
        for (std::size_t j = 0; j < s.k; ++j)
          for (std::size_t i = 0; i < s.c_in; ++i) {
            dx_ref[(t + j) * s.c_in + i] += up * c.w[(j * s.c_in + i) * s.c_out + o];
            dw_ref[(j * s.c_in + i) * s.c_out + o] += c.x[(t + j) * s.c_in + i] * up;
          }
      }
    for (std::size_t i = 0; i < dx.size(); ++i)
      CHECK(dx[i] == doctest::Approx(dx_ref[i]).epsilon(1e-12));
    for (std::size_t i = 0; i < dw.size(); ++i)
      CHECK(dw[i] == doctest::Approx(dw_ref[i]).epsilon(1e-12));
    for (std::size_t i = 0; i < db.size(); ++i)
      CHECK(db[i] == doctest::Approx(db_ref[i]).epsilon(1e-12));
  }
}

TEST_CASE("convolution backward accumulates into dw and db") {
  Rng rng(103);
  auto c = random_conv_case(rng);
  const ConvShape& s = c.shape;
  auto g = random_vec(rng, s.t_out() * s.c_out);
  std::vector<double> dx(s.t_in * s.c_in), w_t(s.k * s.c_out * s.c_in);

  std::vector<double> dw1(c.w.size(), 0.0), db1(s.c_out, 0.0);
  table(Isa::Scalar).conv_backward(c.x.data(), c.w.data(), g.data(), dx.data(), dw1.data(),
                                   db1.data(), w_t.data(), s);
  std::vector<double> dw2 = dw1, db2 = db1;
  table(Isa::Scalar).conv_backward(c.x.data(), c.w.data(), g.data(), dx.data(), dw2.data(),
                                   db2.data(), w_t.data(), s);
  // Not bitwise: the second pass folds new terms into nonzero partial sums.
  for (std::size_t i = 0; i < dw1.size(); ++i)
    CHECK(dw2[i] == doctest::Approx(2.0 * dw1[i]).epsilon(1e-12));
  for (std::size_t i = 0; i < db1.size(); ++i)
    CHECK(db2[i] == doctest::Approx(2.0 * db1[i]).epsilon(1e-12));
}

TEST_CASE("max pooling: hand-checked values and the first-max tie rule") {
  const Table& t = table(Isa::Scalar);
  {
    const double x[] = {1, 3, 2, 5, 4};
    double out = 0.0;
    std::int32_t arg = -1;
    t.maxpool_forward(x, 5, 1, 5, &out, &arg);
    CHECK(out == 5.0);
    CHECK(arg == 3);
  }
  {
    const double x[] = {2, 2, 2, 2, 2, 2};
    double out[3];
    std::int32_t arg[3];
    t.maxpool_forward(x, 6, 1, 2, out, arg);
    CHECK(out[0] == 2.0);
    CHECK(arg[0] == 0);  // ties resolve to the window start
    CHECK(arg[1] == 2);
    CHECK(arg[2] == 4);
  }
  {
    // remainder rows beyond the last full window are dropped
    const double x[] = {1, 2, 3, 4, 9};
    double out[2];
    std::int32_t arg[2];
    t.maxpool_forward(x, 5, 1, 2, out, arg);
    CHECK(out[0] == 2.0);
    CHECK(out[1] == 4.0);
    CHECK(arg[1] == 3);
  }
}

TEST_CASE("max pooling matches the brute-force oracle") {
  Rng rng(104);
  for (int rep = 0; rep < 120; ++rep) {
    const std::size_t c = 1 + rng.uniform_index(6);
    const std::size_t t_in = 1 + rng.uniform_index(30);
    const std::size_t w = 1 + rng.uniform_index(7);
    const std::size_t t_out = t_in / w;
    auto x = random_vec(rng, t_in * c);
    std::vector<double> got(t_out * c);
    std::vector<std::int32_t> arg(t_out * c);
    table(Isa::Scalar).maxpool_forward(x.data(), t_in, c, w, got.data(), arg.data());

    std::vector<std::size_t> arg_ref;
    auto want = oracle::maxpool1d(x, t_in, c, w, &arg_ref);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i] == want[i]);  // pure selection: exact
      CHECK(static_cast<std::size_t>(arg[i]) * c + i % c == arg_ref[i]);
    }
  }
  // shape example: (23, 3) pooled by 5 -> 4 rows
  auto x = random_vec(rng, 23 * 3);
  std::vector<double> out(4 * 3);
  std::vector<std::int32_t> arg(4 * 3);
  table(Isa::Scalar).maxpool_forward(x.data(), 23, 3, 5, out.data(), arg.data());
  CHECK(oracle::maxpool1d(x, 23, 3, 5).size() == 12);
}

TEST_CASE("adadelta kernel follows the scalar recurrence") {
  Rng rng(105);
  const std::size_t n = 37;
  auto theta = random_vec(rng, n);
  std::vector<double> eg2(n, 0.0), edx2(n, 0.0);
  auto theta_ref = theta;
  std::vector<double> eg2_ref(n, 0.0), edx2_ref(n, 0.0);

  for (int step = 0; step < 5; ++step) {
    auto g = random_vec(rng, n);
    table(Isa::Scalar).adadelta_step(theta.data(), g.data(), eg2.data(), edx2.data(), n, 0.95,
                                     1.0, 1e-6);
    for (std::size_t i = 0; i < n; ++i)
      theta_ref[i] += oracle::adadelta_scalar(g[i], eg2_ref[i], edx2_ref[i], 0.95, 1.0, 1e-6);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(theta[i] == doctest::Approx(theta_ref[i]).epsilon(1e-14));
      CHECK(eg2[i] == doctest::Approx(eg2_ref[i]).epsilon(1e-14));
      CHECK(edx2[i] == doctest::Approx(edx2_ref[i]).epsilon(1e-14));
    }
  }
}

TEST_CASE("adadelta with zero gradients keeps parameters, decays accumulators") {
  const std::size_t n = 8;
  std::vector<double> theta(n, 1.5), g(n, 0.0), eg2(n, 0.04), edx2(n, 0.02);
  table(Isa::Scalar).adadelta_step(theta.data(), g.data(), eg2.data(), edx2.data(), n, 0.95,
                                   1.0, 1e-6);
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(theta[i] == 1.5);
    CHECK(eg2[i] == doctest::Approx(0.04 * 0.95).epsilon(1e-15));
    CHECK(edx2[i] == doctest::Approx(0.02 * 0.95).epsilon(1e-15));
  }
}

TEST_CASE("every simd variant is bit-identical to the scalar reference") {
  Rng rng(106);
  for (Isa isa : supported_isas()) {
    if (isa == Isa::Scalar) continue;
    CAPTURE(to_string(isa));
    const Table& simd = table(isa);
    const Table& ref = table(Isa::Scalar);

    for (int rep = 0; rep < 60; ++rep) {
      auto c = random_conv_case(rng);
      const ConvShape& s = c.shape;
      const bool relu = rng.uniform_index(2) == 1;

      std::vector<double> out_a(s.t_out() * s.c_out), out_b(out_a.size());
      ref.conv_forward(c.x.data(), c.w.data(), c.b.data(), out_a.data(), s, relu);
      simd.conv_forward(c.x.data(), c.w.data(), c.b.data(), out_b.data(), s, relu);
      REQUIRE(std::memcmp(out_a.data(), out_b.data(), out_a.size() * sizeof(double)) == 0);

      auto g = random_vec(rng, s.t_out() * s.c_out);
      std::vector<double> dxa(s.t_in * s.c_in), dxb(dxa.size());
      std::vector<double> dwa(c.w.size(), 0.1), dwb(c.w.size(), 0.1);
      std::vector<double> dba(s.c_out, 0.1), dbb(s.c_out, 0.1);
      std::vector<double> w_t(s.k * s.c_out * s.c_in);
      ref.conv_backward(c.x.data(), c.w.data(), g.data(), dxa.data(), dwa.data(), dba.data(),
                        w_t.data(), s);
      simd.conv_backward(c.x.data(), c.w.data(), g.data(), dxb.data(), dwb.data(), dbb.data(),
                         w_t.data(), s);
      REQUIRE(std::memcmp(dxa.data(), dxb.data(), dxa.size() * sizeof(double)) == 0);
      REQUIRE(std::memcmp(dwa.data(), dwb.data(), dwa.size() * sizeof(double)) == 0);
      REQUIRE(std::memcmp(dba.data(), dbb.data(), dba.size() * sizeof(double)) == 0);

      const std::size_t t_in = 1 + rng.uniform_index(40);
      const std::size_t ch = 1 + rng.uniform_index(9);
      const std::size_t win = 1 + rng.uniform_index(6);
      auto px = random_vec(rng, t_in * ch);
      const std::size_t pn = (t_in / win) * ch;
      std::vector<double> pa(pn), pb(pn);
      std::vector<std::int32_t> ia(pn), ib(pn);
      ref.maxpool_forward(px.data(), t_in, ch, win, pa.data(), ia.data());
      simd.maxpool_forward(px.data(), t_in, ch, win, pb.data(), ib.data());
      REQUIRE(pa == pb);
      REQUIRE(ia == ib);

      const std::size_t n = 1 + rng.uniform_index(100);
      auto ta = random_vec(rng, n);
      auto tb = ta;
      auto ga = random_vec(rng, n);
      std::vector<double> eg2a(n, 0.5), eg2b(n, 0.5), edx2a(n, 0.25), edx2b(n, 0.25);
      ref.adadelta_step(ta.data(), ga.data(), eg2a.data(), edx2a.data(), n, 0.95, 1.0, 1e-6);
      simd.adadelta_step(tb.data(), ga.data(), eg2b.data(), edx2b.data(), n, 0.95, 1.0, 1e-6);
      REQUIRE(ta == tb);
      REQUIRE(eg2a == eg2b);
      REQUIRE(edx2a == edx2b);
    }
  }
}

TEST_CASE("unsupported isa requests are rejected") {
  bool all_supported = true;
  for (Isa isa : {Isa::Scalar, Isa::Avx2, Isa::Neon})
    all_supported = all_supported && isa_supported(isa);
  if (!all_supported) {
    for (Isa isa : {Isa::Avx2, Isa::Neon}) {
      if (isa_supported(isa)) continue;
      CHECK_THROWS_AS(table(isa), psc::Error);
      CHECK_THROWS_AS(set_active(isa), psc::Error);
    }
  }
}

}  // TEST_SUITE
