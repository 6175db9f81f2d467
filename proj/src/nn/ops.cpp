#include "uhf/nn/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

namespace uhf::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<RowMat>;
using CMap = Eigen::Map<const RowMat>;
using CVecMap = Eigen::Map<const Eigen::VectorXd>;
using Idx = Eigen::Index;

struct SeqDims {
  std::size_t batch = 1, channels = 0, time = 0;
  bool batched = false;

  Shape shape_with(std::size_t c, std::size_t t) const { return batched ? Shape{batch, c, t} : Shape{c, t}; }
};

SeqDims seq_dims(const Shape& s, const char* op) {
  if (s.size() == 2) return {1, s[0], s[1], false};
  if (s.size() == 3) return {s[0], s[1], s[2], true};
  throw ShapeError(std::string(op) + ": expected [C, T] or [B, C, T], got " + shape_string(s));
}

void expect_shape(const Shape& got, const Shape& want, const char* what) {
  if (got != want) {
    throw ShapeError(std::string(what) + ": expected " + shape_string(want) + ", got " + shape_string(got));
  }
}

void add_into(std::span<double> dst, const double* src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

CMap cmat(const double* p, std::size_t rows, std::size_t cols) {
  return CMap(p, static_cast<Idx>(rows), static_cast<Idx>(cols));
}
Map mat(double* p, std::size_t rows, std::size_t cols) { return Map(p, static_cast<Idx>(rows), static_cast<Idx>(cols)); }

// cols[(ci*k + j), t] = x[ci, t - (k-1-j)*d], zero before the start.
void im2col(const double* x, std::size_t cin, std::size_t time, std::size_t k, std::size_t d, double* cols) {
  for (std::size_t ci = 0; ci < cin; ++ci) {
    const double* src = x + ci * time;
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t shift = (k - 1 - j) * d;
      double* row = cols + (ci * k + j) * time;
      const std::size_t lead = std::min(shift, time);
      std::fill(row, row + lead, 0.0);
      if (shift < time) std::copy(src, src + (time - shift), row + shift);
    }
  }
}

void col2im_add(const double* cols, std::size_t cin, std::size_t time, std::size_t k, std::size_t d, double* dx) {
  for (std::size_t ci = 0; ci < cin; ++ci) {
    double* dst = dx + ci * time;
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t shift = (k - 1 - j) * d;
      if (shift >= time) continue;
      const double* row = cols + (ci * k + j) * time;
      for (std::size_t t = shift; t < time; ++t) dst[t - shift] += row[t];
    }
  }
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

bool any_needs_grad(const Tape& tape, std::initializer_list<Var> vars) {
  return std::any_of(vars.begin(), vars.end(), [&](Var v) { return tape.needs_grad(v); });
}

}  // namespace

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

Var causal_conv1d(Tape& tape, Var input, Var kernel, Var bias, std::size_t dilation) {
  if (dilation < 1) throw std::invalid_argument("causal_conv1d: dilation must be >= 1");
  const SeqDims in = seq_dims(tape.shape(input), "causal_conv1d");
  const Shape& ks = tape.shape(kernel);
  if (ks.size() != 3 || ks[1] != in.channels) {
    throw ShapeError("causal_conv1d: kernel " + shape_string(ks) + " incompatible with input channels " +
                     std::to_string(in.channels));
  }
  const std::size_t cout = ks[0], cin = ks[1], k = ks[2], time = in.time;
  expect_shape(tape.shape(bias), {cout}, "causal_conv1d bias");

  const Tensor& x = tape.value(input);
  const auto w = cmat(tape.value(kernel).data(), cout, cin * k);
  const CVecMap b(tape.value(bias).data(), static_cast<Idx>(cout));
  Tensor out(in.shape_with(cout, time));
  RowMat cols(static_cast<Idx>(cin * k), static_cast<Idx>(time));
  for (std::size_t n = 0; n < in.batch; ++n) {
    im2col(x.data() + n * cin * time, cin, time, k, dilation, cols.data());
    auto o = mat(out.data() + n * cout * time, cout, time);
    o.noalias() = w * cols;
    o.colwise() += b;
  }

  auto backward = [=](Tape& tp, Var self) {
    const auto g = tp.grad(self);
    const Tensor& xv = tp.value(input);
    const auto wv = cmat(tp.value(kernel).data(), cout, cin * k);
    const bool want_x = tp.needs_grad(input);
    const bool want_w = tp.needs_grad(kernel);
    RowMat cols_b(static_cast<Idx>(cin * k), static_cast<Idx>(time));
    RowMat dcols(static_cast<Idx>(cin * k), static_cast<Idx>(time));
    RowMat dw = RowMat::Zero(static_cast<Idx>(cout), static_cast<Idx>(cin * k));
    Eigen::VectorXd db = Eigen::VectorXd::Zero(static_cast<Idx>(cout));
    std::span<double> dx = want_x ? tp.grad(input) : std::span<double>{};
    for (std::size_t n = 0; n < in.batch; ++n) {
      const auto go = cmat(g.data() + n * cout * time, cout, time);
      db += go.rowwise().sum();
      if (want_w) {
        im2col(xv.data() + n * cin * time, cin, time, k, dilation, cols_b.data());
        dw.noalias() += go * cols_b.transpose();
      }
      if (want_x) {
        dcols.noalias() = wv.transpose() * go;
        col2im_add(dcols.data(), cin, time, k, dilation, dx.data() + n * cin * time);
      }
    }
    if (want_w) add_into(tp.grad(kernel), dw.data());
    if (tp.needs_grad(bias)) add_into(tp.grad(bias), db.data());
  };
  return tape.record(std::move(out), any_needs_grad(tape, {input, kernel, bias}), backward);
}

Var relu(Tape& tape, Var x) {
  const Tensor& xv = tape.value(x);
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  return tape.record(std::move(out), tape.needs_grad(x), [=](Tape& tp, Var self) {
    const auto g = tp.grad(self);
    const Tensor& in = tp.value(x);
    auto dx = tp.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (in[i] > 0.0) dx[i] += g[i];
    }
  });
}

Var add(Tape& tape, Var a, Var b) {
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  expect_shape(bv.shape(), av.shape(), "add");
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  return tape.record(std::move(out), any_needs_grad(tape, {a, b}), [=](Tape& tp, Var self) {
    const auto g = tp.grad(self);
    if (tp.needs_grad(a)) add_into(tp.grad(a), g.data());
    if (tp.needs_grad(b)) add_into(tp.grad(b), g.data());
  });
}

Var sum(Tape& tape, Var x) {
  const Tensor& xv = tape.value(x);
  double s = 0.0;
  for (double v : xv.values()) s += v;
  return tape.record(Tensor({1}, {s}), tape.needs_grad(x), [=](Tape& tp, Var self) {
    const double g = tp.grad(self)[0];
    for (double& d : tp.grad(x)) d += g;
  });
}

Var dropout(Tape& tape, Var x, double rate, std::mt19937_64* rng) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout rate must lie in [0, 1)");
  if (rng == nullptr || rate == 0.0) return x;
  const Tensor& xv = tape.value(x);
  const double scale = 1.0 / (1.0 - rate);
  // Each 64-bit draw yields four 16-bit uniforms; the drop rate is quantized to 2^-16.
  const auto threshold = static_cast<std::uint64_t>(std::llround(rate * 65536.0));
  Buffer mask(xv.size());
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (i % 4 == 0) bits = (*rng)();
    mask[i] = (bits & 0xffff) < threshold ? 0.0 : scale;
    bits >>= 16;
  }
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] * mask[i];
  return tape.record(std::move(out), tape.needs_grad(x), [=, mask = std::move(mask)](Tape& tp, Var self) {
    const auto g = tp.grad(self);
    auto dx = tp.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * mask[i];
  });
}

Var last_step(Tape& tape, Var x) {
  const SeqDims d = seq_dims(tape.shape(x), "last_step");
  const Tensor& xv = tape.value(x);
  Tensor out({d.batch, d.channels});
  for (std::size_t n = 0; n < d.batch; ++n) {
    for (std::size_t c = 0; c < d.channels; ++c) out[n * d.channels + c] = xv[(n * d.channels + c) * d.time + d.time - 1];
  }
  return tape.record(std::move(out), tape.needs_grad(x), [=](Tape& tp, Var self) {
    const auto g = tp.grad(self);
    auto dx = tp.grad(x);
    for (std::size_t n = 0; n < d.batch; ++n) {
      for (std::size_t c = 0; c < d.channels; ++c) dx[(n * d.channels + c) * d.time + d.time - 1] += g[n * d.channels + c];
    }
  });
}

Var linear(Tape& tape, Var x, Var weight, Var bias) {
  const Shape& xs = tape.shape(x);
  const Shape& ws = tape.shape(weight);
  if (xs.size() != 2 || ws.size() != 2 || ws[1] != xs[1]) {
    throw ShapeError("linear: input " + shape_string(xs) + " incompatible with weight " + shape_string(ws));
  }
  const std::size_t batch = xs[0], cin = xs[1], cout = ws[0];
  expect_shape(tape.shape(bias), {cout}, "linear bias");
  Tensor out({batch, cout});
  auto y = mat(out.data(), batch, cout);
  y.noalias() = cmat(tape.value(x).data(), batch, cin) * cmat(tape.value(weight).data(), cout, cin).transpose();
  y.rowwise() += CVecMap(tape.value(bias).data(), static_cast<Idx>(cout)).transpose();
  return tape.record(std::move(out), any_needs_grad(tape, {x, weight, bias}), [=](Tape& tp, Var self) {
    const auto g = cmat(tp.grad(self).data(), batch, cout);
    if (tp.needs_grad(x)) {
      mat(tp.grad(x).data(), batch, cin).noalias() += g * cmat(tp.value(weight).data(), cout, cin);
    }
    if (tp.needs_grad(weight)) {
      mat(tp.grad(weight).data(), cout, cin).noalias() += g.transpose() * cmat(tp.value(x).data(), batch, cin);
    }
    if (tp.needs_grad(bias)) {
      auto db = tp.grad(bias);
      for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t c = 0; c < cout; ++c) db[c] += g(static_cast<Idx>(n), static_cast<Idx>(c));
      }
    }
  });
}

AttentionResult attention_pool(Tape& tape, Var hidden, Var projection, Var score) {
  const SeqDims d = seq_dims(tape.shape(hidden), "attention_pool");
  const Shape& ps = tape.shape(projection);
  if (ps.size() != 2 || ps[1] != d.channels) {
    throw ShapeError("attention_pool: projection " + shape_string(ps) + " incompatible with hidden " +
                     shape_string(tape.shape(hidden)));
  }
  const std::size_t att = ps[0], chans = d.channels, time = d.time, batch = d.batch;
  expect_shape(tape.shape(score), {att}, "attention_pool score");

  const Tensor& h = tape.value(hidden);
  const auto w = cmat(tape.value(projection).data(), att, chans);
  const CVecMap v(tape.value(score).data(), static_cast<Idx>(att));
  Buffer act(batch * att * time);  // tanh(W h)
  Tensor weights({batch, time});
  Tensor context({batch, chans});
  for (std::size_t n = 0; n < batch; ++n) {
    const auto hb = cmat(h.data() + n * chans * time, chans, time);
    auto u = mat(act.data() + n * att * time, att, time);
    u.noalias() = w * hb;
    u = u.array().tanh().matrix();
    std::span<double> a(weights.data() + n * time, time);
    Eigen::Map<Eigen::RowVectorXd>(a.data(), static_cast<Idx>(time)).noalias() = v.transpose() * u;
    softmax_inplace(a);
    Eigen::Map<Eigen::VectorXd>(context.data() + n * chans, static_cast<Idx>(chans)).noalias() =
        hb * CVecMap(a.data(), static_cast<Idx>(time));
  }

  Tensor saved_weights = weights;
  Var ctx = tape.record(
      std::move(context), any_needs_grad(tape, {hidden, projection, score}),
      [=, act = std::move(act), a_all = std::move(saved_weights)](Tape& tp, Var self) {
        const auto g = tp.grad(self);
        const Tensor& hv = tp.value(hidden);
        const auto wv = cmat(tp.value(projection).data(), att, chans);
        const CVecMap vv(tp.value(score).data(), static_cast<Idx>(att));
        const bool want_h = tp.needs_grad(hidden);
        RowMat dw = RowMat::Zero(static_cast<Idx>(att), static_cast<Idx>(chans));
        Eigen::VectorXd dv = Eigen::VectorXd::Zero(static_cast<Idx>(att));
        std::span<double> dh = want_h ? tp.grad(hidden) : std::span<double>{};
        RowMat dpre(static_cast<Idx>(att), static_cast<Idx>(time));
        Eigen::VectorXd de(static_cast<Idx>(time));
        for (std::size_t n = 0; n < batch; ++n) {
          const auto hb = cmat(hv.data() + n * chans * time, chans, time);
          const auto u = cmat(act.data() + n * att * time, att, time);
          const CVecMap a(a_all.data() + n * time, static_cast<Idx>(time));
          const CVecMap dc(g.data() + n * chans, static_cast<Idx>(chans));
          const Eigen::VectorXd da = hb.transpose() * dc;
          const double mean = a.dot(da);
          de = a.cwiseProduct(da.array().matrix() - Eigen::VectorXd::Constant(static_cast<Idx>(time), mean));
          dv.noalias() += u * de;
          dpre = (vv * de.transpose()).cwiseProduct((1.0 - u.array().square()).matrix());
          dw.noalias() += dpre * hb.transpose();
          if (want_h) {
            auto dhb = mat(dh.data() + n * chans * time, chans, time);
            dhb.noalias() += dc * a.transpose();
            dhb.noalias() += wv.transpose() * dpre;
          }
        }
        if (tp.needs_grad(projection)) add_into(tp.grad(projection), dw.data());
        if (tp.needs_grad(score)) add_into(tp.grad(score), dv.data());
      });
  Var wts = tape.constant(std::move(weights));
  return {ctx, wts};
}

Var lstm(Tape& tape, Var input, Var w_input, Var w_hidden, Var bias) {
  const SeqDims d = seq_dims(tape.shape(input), "lstm");
  const Shape& wis = tape.shape(w_input);
  if (wis.size() != 2 || wis[0] % 4 != 0 || wis[1] != d.channels) {
    throw ShapeError("lstm: input weight " + shape_string(wis) + " incompatible with input " +
                     shape_string(tape.shape(input)));
  }
  const std::size_t hid = wis[0] / 4, g4 = wis[0], chans = d.channels, time = d.time, batch = d.batch;
  expect_shape(tape.shape(w_hidden), {g4, hid}, "lstm hidden weight");
  expect_shape(tape.shape(bias), {g4}, "lstm bias");

  const Tensor& x = tape.value(input);
  const auto wx = cmat(tape.value(w_input).data(), g4, chans);
  const auto wh = cmat(tape.value(w_hidden).data(), g4, hid);
  const CVecMap b(tape.value(bias).data(), static_cast<Idx>(g4));

  // Time-major scratch: [T][B][...].
  Buffer xt(time * batch * chans);
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t c = 0; c < chans; ++c) {
      for (std::size_t t = 0; t < time; ++t) xt[(t * batch + n) * chans + c] = x[(n * chans + c) * time + t];
    }
  }
  Buffer gates(time * batch * g4);
  Buffer cell(time * batch * hid);
  Buffer cell_tanh(time * batch * hid);
  Buffer hs(time * batch * hid);
  for (std::size_t t = 0; t < time; ++t) {
    auto a = mat(gates.data() + t * batch * g4, batch, g4);
    a.noalias() = cmat(xt.data() + t * batch * chans, batch, chans) * wx.transpose();
    if (t > 0) a.noalias() += cmat(hs.data() + (t - 1) * batch * hid, batch, hid) * wh.transpose();
    a.rowwise() += b.transpose();
    for (std::size_t n = 0; n < batch; ++n) {
      double* gr = gates.data() + (t * batch + n) * g4;
      for (std::size_t j = 0; j < hid; ++j) {
        const double i = sigmoid(gr[j]);
        const double f = sigmoid(gr[hid + j]);
        const double gg = std::tanh(gr[2 * hid + j]);
        const double o = sigmoid(gr[3 * hid + j]);
        gr[j] = i;
        gr[hid + j] = f;
        gr[2 * hid + j] = gg;
        gr[3 * hid + j] = o;
        const std::size_t at = (t * batch + n) * hid + j;
        const double prev = t > 0 ? cell[at - batch * hid] : 0.0;
        cell[at] = f * prev + i * gg;
        cell_tanh[at] = std::tanh(cell[at]);
        hs[at] = o * cell_tanh[at];
      }
    }
  }
  Tensor out(d.shape_with(hid, time));
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t j = 0; j < hid; ++j) {
      for (std::size_t t = 0; t < time; ++t) out[(n * hid + j) * time + t] = hs[(t * batch + n) * hid + j];
    }
  }

  auto backward = [=, xt = std::move(xt), gates = std::move(gates), cell = std::move(cell),
                   cell_tanh = std::move(cell_tanh), hs = std::move(hs)](Tape& tp, Var self) {
    const auto gy = tp.grad(self);
    const auto wxv = cmat(tp.value(w_input).data(), g4, chans);
    const auto whv = cmat(tp.value(w_hidden).data(), g4, hid);
    const bool want_x = tp.needs_grad(input);
    RowMat dwx = RowMat::Zero(static_cast<Idx>(g4), static_cast<Idx>(chans));
    RowMat dwh = RowMat::Zero(static_cast<Idx>(g4), static_cast<Idx>(hid));
    Eigen::VectorXd db = Eigen::VectorXd::Zero(static_cast<Idx>(g4));
    RowMat dh_next = RowMat::Zero(static_cast<Idx>(batch), static_cast<Idx>(hid));
    Buffer dc_next(batch * hid, 0.0);
    RowMat da(static_cast<Idx>(batch), static_cast<Idx>(g4));
    RowMat dxt(static_cast<Idx>(batch), static_cast<Idx>(chans));
    std::span<double> dx = want_x ? tp.grad(input) : std::span<double>{};
    for (std::size_t t = time; t-- > 0;) {
      for (std::size_t n = 0; n < batch; ++n) {
        const double* gr = gates.data() + (t * batch + n) * g4;
        double* dar = da.data() + n * g4;
        for (std::size_t j = 0; j < hid; ++j) {
          const std::size_t at = (t * batch + n) * hid + j;
          const double dh = gy[(n * hid + j) * time + t] + dh_next(static_cast<Idx>(n), static_cast<Idx>(j));
          const double i = gr[j], f = gr[hid + j], gg = gr[2 * hid + j], o = gr[3 * hid + j];
          const double tc = cell_tanh[at];
          const double prev = t > 0 ? cell[at - batch * hid] : 0.0;
          const double dc = dc_next[n * hid + j] + dh * o * (1.0 - tc * tc);
          dar[j] = dc * gg * i * (1.0 - i);
          dar[hid + j] = dc * prev * f * (1.0 - f);
          dar[2 * hid + j] = dc * i * (1.0 - gg * gg);
          dar[3 * hid + j] = dh * tc * o * (1.0 - o);
          dc_next[n * hid + j] = dc * f;
        }
      }
      db += da.colwise().sum().transpose();
      dwx.noalias() += da.transpose() * cmat(xt.data() + t * batch * chans, batch, chans);
      if (t > 0) {
        dwh.noalias() += da.transpose() * cmat(hs.data() + (t - 1) * batch * hid, batch, hid);
        dh_next.noalias() = da * whv;
      }
      if (want_x) {
        dxt.noalias() = da * wxv;
        for (std::size_t n = 0; n < batch; ++n) {
          for (std::size_t c = 0; c < chans; ++c) {
            dx[(n * chans + c) * time + t] += dxt(static_cast<Idx>(n), static_cast<Idx>(c));
          }
        }
      }
    }
    if (tp.needs_grad(w_input)) add_into(tp.grad(w_input), dwx.data());
    if (tp.needs_grad(w_hidden)) add_into(tp.grad(w_hidden), dwh.data());
    if (tp.needs_grad(bias)) add_into(tp.grad(bias), db.data());
  };
  return tape.record(std::move(out), any_needs_grad(tape, {input, w_input, w_hidden, bias}), std::move(backward));
}

Var softmax_cross_entropy(Tape& tape, Var logits, std::span<const int> targets) {
  const Shape& ls = tape.shape(logits);
  if (ls.size() != 2 || ls[1] < 2) throw ShapeError("softmax_cross_entropy: expected [B, K>=2], got " + shape_string(ls));
  const std::size_t batch = ls[0], classes = ls[1];
  if (targets.size() != batch) throw ShapeError("softmax_cross_entropy: target count does not match batch");
  Tensor probs = softmax(tape.value(logits));
  std::vector<int> tgt(targets.begin(), targets.end());
  double loss = 0.0;
  for (std::size_t n = 0; n < batch; ++n) {
    if (tgt[n] < 0 || static_cast<std::size_t>(tgt[n]) >= classes) throw std::out_of_range("target class out of range");
    loss -= std::log(std::max(probs[n * classes + static_cast<std::size_t>(tgt[n])], kProbabilityFloor));
  }
  loss /= static_cast<double>(batch);
  return tape.record(Tensor({1}, {loss}), tape.needs_grad(logits),
                     [=, probs = std::move(probs), tgt = std::move(tgt)](Tape& tp, Var self) {
                       const double g = tp.grad(self)[0] / static_cast<double>(batch);
                       auto dz = tp.grad(logits);
                       for (std::size_t n = 0; n < batch; ++n) {
                         for (std::size_t k = 0; k < classes; ++k) {
                           const double y = static_cast<int>(k) == tgt[n] ? 1.0 : 0.0;
                           dz[n * classes + k] += g * (probs[n * classes + k] - y);
                         }
                       }
                     });
}

void softmax_inplace(std::span<double> row) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double z : row) {
    if (!std::isfinite(z)) throw std::domain_error("softmax: non-finite logit");
    hi = std::max(hi, z);
  }
  double total = 0.0;
  for (double& z : row) {
    z = std::exp(z - hi);
    total += z;
  }
  for (double& z : row) z /= total;
}

Tensor softmax(const Tensor& logits) {
  if (logits.rank() != 1 && logits.rank() != 2) throw ShapeError("softmax: expected [K] or [B, K]");
  const std::size_t classes = logits.shape().back();
  if (classes < 2) throw ShapeError("softmax: need at least 2 classes");
  Tensor out = logits;
  out.clear_grad();
  for (std::size_t off = 0; off < out.size(); off += classes) softmax_inplace(out.values().subspan(off, classes));
  return out;
}

double cross_entropy(std::span<const std::vector<double>> predictions,
                     std::span<const std::vector<double>> one_hot_targets) {
  if (predictions.size() != one_hot_targets.size() || predictions.empty()) {
    throw std::invalid_argument("cross_entropy: need equal, nonzero numbers of predictions and targets");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto& p = predictions[i];
    const auto& y = one_hot_targets[i];
    if (p.size() != y.size()) throw std::invalid_argument("cross_entropy: class count mismatch");
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (y[k] != 0.0) total -= y[k] * std::log(std::max(p[k], kProbabilityFloor));
    }
  }
  return total / static_cast<double>(predictions.size());
}

}  // namespace uhf::nn
