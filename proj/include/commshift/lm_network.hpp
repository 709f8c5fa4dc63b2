#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <vector>

#include "commshift/error.hpp"
#include "commshift/rng.hpp"

namespace commshift::lmeval {

// token ids laid out [time][batch]
struct IdMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<std::uint32_t> data;

  IdMatrix() = default;
  IdMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0) {}
  std::uint32_t& at(std::size_t t, std::size_t b) { return data[t * cols + b]; }
  std::uint32_t at(std::size_t t, std::size_t b) const { return data[t * cols + b]; }
};

template <typename T>
struct LmParams {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

  struct Layer {
    Mat wx;  // 4H x in
    Mat wh;  // 4H x H
    Mat b;   // 4H x 1, gate order [i f g o]
  };
  std::vector<Layer> layers;
  Mat proj;    // Vout x H
  Mat proj_b;  // Vout x 1

  template <typename F>
  void visit(F&& f) {
    for (auto& l : layers) {
      f(l.wx);
      f(l.wh);
      f(l.b);
    }
    f(proj);
    f(proj_b);
  }
  template <typename F>
  void visit(F&& f) const {
    for (const auto& l : layers) {
      f(l.wx);
      f(l.wh);
      f(l.b);
    }
    f(proj);
    f(proj_b);
  }

  void set_zero() {
    visit([](Mat& m) { m.setZero(); });
  }

  static LmParams shaped(std::size_t layers, std::size_t dim, std::size_t hidden,
                         std::size_t vout) {
    LmParams p;
    p.layers.resize(layers);
    for (std::size_t l = 0; l < layers; ++l) {
      std::size_t in = l == 0 ? dim : hidden;
      p.layers[l].wx = Mat::Zero(4 * hidden, in);
      p.layers[l].wh = Mat::Zero(4 * hidden, hidden);
      p.layers[l].b = Mat::Zero(4 * hidden, 1);
    }
    p.proj = Mat::Zero(vout, hidden);
    p.proj_b = Mat::Zero(vout, 1);
    return p;
  }
};

template <typename T>
T global_norm(const LmParams<T>& g) {
  T acc = 0;
  g.visit([&](const auto& m) { acc += m.array().square().sum(); });
  return std::sqrt(acc);
}

template <typename T>
void clip_by_norm(LmParams<T>& g, T max_norm) {
  T n = global_norm(g);
  if (n > max_norm && n > 0) {
    T s = max_norm / n;
    g.visit([&](auto& m) { m *= s; });
  }
}

template <typename T>
struct AdamState {
  LmParams<T> m, v;
  std::uint64_t t = 0;

  static AdamState shaped(std::size_t layers, std::size_t dim, std::size_t hidden,
                          std::size_t vout) {
    AdamState s;
    s.m = LmParams<T>::shaped(layers, dim, hidden, vout);
    s.v = LmParams<T>::shaped(layers, dim, hidden, vout);
    return s;
  }
};

template <typename T>
void adam_step(LmParams<T>& p, const LmParams<T>& g, AdamState<T>& st, T lr,
               T beta1 = T(0.9), T beta2 = T(0.999), T eps = T(1e-8)) {
  st.t += 1;
  T c1 = 1 - std::pow(beta1, T(st.t));
  T c2 = 1 - std::pow(beta2, T(st.t));
  auto mp = [&](auto& pm, const auto& gm, auto& mm, auto& vm) {
    mm = beta1 * mm + (1 - beta1) * gm;
    vm = beta2 * vm + (1 - beta2) * gm.array().square().matrix();
    pm.array() -=
        lr * (mm.array() / c1) / ((vm.array() / c2).sqrt() + eps);
  };
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    mp(p.layers[l].wx, g.layers[l].wx, st.m.layers[l].wx, st.v.layers[l].wx);
    mp(p.layers[l].wh, g.layers[l].wh, st.m.layers[l].wh, st.v.layers[l].wh);
    mp(p.layers[l].b, g.layers[l].b, st.m.layers[l].b, st.v.layers[l].b);
  }
  mp(p.proj, g.proj, st.m.proj, st.v.proj);
  mp(p.proj_b, g.proj_b, st.m.proj_b, st.v.proj_b);
}

// Multi-layer LSTM over frozen input embeddings with a trained softmax
// projection. Dropout sits on the embedded input, between layers, and on the
// final hidden state (inverted scaling, masks drawn per element).
template <typename T>
class LmNetwork {
 public:
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

  LmNetwork(std::size_t n_layers, std::size_t dim, std::size_t hidden, std::size_t vout)
      : dim_(dim), hidden_(hidden), vout_(vout) {
    params = LmParams<T>::shaped(n_layers, dim, hidden, vout);
    embedding = Mat::Zero(dim, vout);
  }

  std::size_t n_layers() const { return params.layers.size(); }
  std::size_t dim() const { return dim_; }
  std::size_t hidden() const { return hidden_; }
  std::size_t vout() const { return vout_; }

  struct State {
    std::vector<Mat> h, c;  // per layer, H x B
  };

  State zero_state(std::size_t batch) const {
    State s;
    s.h.assign(n_layers(), Mat::Zero(hidden_, batch));
    s.c.assign(n_layers(), Mat::Zero(hidden_, batch));
    return s;
  }

  // one training chunk; returns mean nll over rows*cols predictions and adds
  // parameter gradients into `grads` (caller zeroes). rng drives dropout; pass
  // nullptr (or dropout 0) to disable. state is carried truncated.
  T forward_backward(const IdMatrix& inputs, const IdMatrix& targets, State& state,
                     T dropout, Rng* rng, LmParams<T>& grads) const;

  // evaluation pass without dropout; accumulates summed nll and counts
  void forward_eval(const IdMatrix& inputs, const IdMatrix& targets, State& state,
                    double& nll_sum, std::uint64_t& count) const;

  // advance the state a single step on input column x (batch 1)
  void step_hidden(const Eigen::Matrix<T, Eigen::Dynamic, 1>& x, State& state) const;
  // advance and also return log-softmax over the output vocabulary
  Eigen::Matrix<T, Eigen::Dynamic, 1> step_logprobs(
      const Eigen::Matrix<T, Eigen::Dynamic, 1>& x, State& state) const;

  LmParams<T> params;
  Mat embedding;  // dim x vout, frozen

 private:
  std::size_t dim_, hidden_, vout_;

  static Mat sigmoid(const Mat& m) {
    return ((-m.array()).exp() + T(1)).inverse().matrix();
  }

  Mat dropout_mask(std::size_t r, std::size_t c, T p, Rng* rng) const {
    if (!rng || p <= 0) return Mat::Constant(r, c, T(1));
    Mat m(r, c);
    T scale = T(1) / (T(1) - p);
    for (std::size_t j = 0; j < c; ++j)
      for (std::size_t i = 0; i < r; ++i)
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            rng->uniform() < static_cast<double>(p) ? T(0) : scale;
    return m;
  }

  Mat gather(const IdMatrix& ids, std::size_t t) const {
    Mat x(dim_, ids.cols);
    for (std::size_t b = 0; b < ids.cols; ++b) {
      std::uint32_t id = ids.at(t, b);
      if (id >= vout_) throw InternalError("token id out of embedding range");
      x.col(static_cast<Eigen::Index>(b)) = embedding.col(id);
    }
    return x;
  }

  struct LayerCache {
    Mat x_in, h_prev, c_prev, gi, gf, gg, go, tanh_c, c, h, in_mask;
  };
  struct StepCache {
    std::vector<LayerCache> layers;
    Mat out_mask, h_out, probs;
  };

  void lstm_forward(const Mat& x, std::size_t l, Mat& h, Mat& c, LayerCache* cache) const;
};

template <typename T>
void LmNetwork<T>::lstm_forward(const Mat& x, std::size_t l, Mat& h, Mat& c,
                                LayerCache* cache) const {
  const auto& L = params.layers[l];
  const auto H = static_cast<Eigen::Index>(hidden_);
  Mat a = L.wx * x + L.wh * h;
  a.colwise() += L.b.col(0);
  Mat gi = sigmoid(a.topRows(H));
  Mat gf = sigmoid(a.middleRows(H, H));
  Mat gg = a.middleRows(2 * H, H).array().tanh().matrix();
  Mat go = sigmoid(a.bottomRows(H));
  Mat c_new = (gf.array() * c.array() + gi.array() * gg.array()).matrix();
  Mat tc = c_new.array().tanh().matrix();
  Mat h_new = (go.array() * tc.array()).matrix();
  if (cache) {
    cache->x_in = x;
    cache->h_prev = h;
    cache->c_prev = c;
    cache->gi = std::move(gi);
    cache->gf = std::move(gf);
    cache->gg = std::move(gg);
    cache->go = std::move(go);
    cache->tanh_c = tc;
    cache->c = c_new;
    cache->h = h_new;
  }
  h = std::move(h_new);
  c = std::move(c_new);
}

template <typename T>
T LmNetwork<T>::forward_backward(const IdMatrix& inputs, const IdMatrix& targets,
                                 State& state, T dropout, Rng* rng,
                                 LmParams<T>& grads) const {
  const std::size_t S = inputs.rows, B = inputs.cols;
  const std::size_t NL = n_layers();
  std::vector<StepCache> caches(S);
  T nll = 0;
  const T inv_count = T(1) / static_cast<T>(S * B);

  for (std::size_t t = 0; t < S; ++t) {
    StepCache& sc = caches[t];
    sc.layers.resize(NL);
    Mat x = gather(inputs, t);
    for (std::size_t l = 0; l < NL; ++l) {
      Mat mask = dropout_mask(x.rows(), x.cols(), dropout, rng);
      sc.layers[l].in_mask = mask;
      Mat dropped = (x.array() * mask.array()).matrix();
      lstm_forward(dropped, l, state.h[l], state.c[l], &sc.layers[l]);
      x = state.h[l];
    }
    sc.out_mask = dropout_mask(hidden_, B, dropout, rng);
    sc.h_out = (state.h[NL - 1].array() * sc.out_mask.array()).matrix();
    Mat logits = params.proj * sc.h_out;
    logits.colwise() += params.proj_b.col(0);
    // stable softmax per column
    Mat probs(vout_, B);
    for (std::size_t b = 0; b < B; ++b) {
      auto col = logits.col(static_cast<Eigen::Index>(b));
      T mx = col.maxCoeff();
      Eigen::Matrix<T, Eigen::Dynamic, 1> e = (col.array() - mx).exp();
      T z = e.sum();
      probs.col(static_cast<Eigen::Index>(b)) = e / z;
      T p = probs(targets.at(t, b), static_cast<Eigen::Index>(b));
      nll -= std::log(p);
    }
    sc.probs = std::move(probs);
  }

  // backward
  std::vector<Mat> dh(NL, Mat::Zero(hidden_, B));
  std::vector<Mat> dc(NL, Mat::Zero(hidden_, B));
  for (std::size_t ti = S; ti-- > 0;) {
    StepCache& sc = caches[ti];
    Mat dlogits = sc.probs;
    for (std::size_t b = 0; b < B; ++b)
      dlogits(targets.at(ti, b), static_cast<Eigen::Index>(b)) -= T(1);
    dlogits *= inv_count;

    grads.proj += dlogits * sc.h_out.transpose();
    grads.proj_b += dlogits.rowwise().sum();
    Mat dh_out = params.proj.transpose() * dlogits;
    dh[NL - 1] += (dh_out.array() * sc.out_mask.array()).matrix();

    for (std::size_t l = NL; l-- > 0;) {
      LayerCache& lc = sc.layers[l];
      const auto& L = params.layers[l];
      const auto H = static_cast<Eigen::Index>(hidden_);

      Mat d_o = (dh[l].array() * lc.tanh_c.array()).matrix();
      dc[l].array() += dh[l].array() * lc.go.array() * (1 - lc.tanh_c.array().square());
      Mat d_f = (dc[l].array() * lc.c_prev.array()).matrix();
      Mat d_i = (dc[l].array() * lc.gg.array()).matrix();
      Mat d_g = (dc[l].array() * lc.gi.array()).matrix();

      Mat da(4 * H, static_cast<Eigen::Index>(B));
      da.topRows(H) = (d_i.array() * lc.gi.array() * (1 - lc.gi.array())).matrix();
      da.middleRows(H, H) = (d_f.array() * lc.gf.array() * (1 - lc.gf.array())).matrix();
      da.middleRows(2 * H, H) = (d_g.array() * (1 - lc.gg.array().square())).matrix();
      da.bottomRows(H) = (d_o.array() * lc.go.array() * (1 - lc.go.array())).matrix();

      grads.layers[l].wx += da * lc.x_in.transpose();
      grads.layers[l].wh += da * lc.h_prev.transpose();
      grads.layers[l].b += da.rowwise().sum();

      dc[l] = (dc[l].array() * lc.gf.array()).matrix();  // to t-1
      dh[l] = L.wh.transpose() * da;                     // to t-1

      if (l > 0) {
        Mat dx = L.wx.transpose() * da;
        dh[l - 1] += (dx.array() * lc.in_mask.array()).matrix();
      }
    }
  }
  return nll * inv_count;
}

template <typename T>
void LmNetwork<T>::forward_eval(const IdMatrix& inputs, const IdMatrix& targets,
                                State& state, double& nll_sum,
                                std::uint64_t& count) const {
  const std::size_t S = inputs.rows, B = inputs.cols;
  for (std::size_t t = 0; t < S; ++t) {
    Mat x = gather(inputs, t);
    for (std::size_t l = 0; l < n_layers(); ++l) {
      lstm_forward(x, l, state.h[l], state.c[l], nullptr);
      x = state.h[l];
    }
    Mat logits = params.proj * state.h[n_layers() - 1];
    logits.colwise() += params.proj_b.col(0);
    for (std::size_t b = 0; b < B; ++b) {
      auto col = logits.col(static_cast<Eigen::Index>(b));
      T mx = col.maxCoeff();
      double z = static_cast<double>((col.array() - mx).exp().sum());
      double lp = static_cast<double>(col(targets.at(t, b)) - mx) - std::log(z);
      nll_sum -= lp;
      count += 1;
    }
  }
}

template <typename T>
void LmNetwork<T>::step_hidden(const Eigen::Matrix<T, Eigen::Dynamic, 1>& x,
                               State& state) const {
  Mat cur = x;
  for (std::size_t l = 0; l < n_layers(); ++l) {
    lstm_forward(cur, l, state.h[l], state.c[l], nullptr);
    cur = state.h[l];
  }
}

template <typename T>
Eigen::Matrix<T, Eigen::Dynamic, 1> LmNetwork<T>::step_logprobs(
    const Eigen::Matrix<T, Eigen::Dynamic, 1>& x, State& state) const {
  step_hidden(x, state);
  Eigen::Matrix<T, Eigen::Dynamic, 1> logits =
      params.proj * state.h[n_layers() - 1] + params.proj_b;
  T mx = logits.maxCoeff();
  T z = std::log((logits.array() - mx).exp().sum()) + mx;
  return (logits.array() - z).matrix();
}

}  // namespace commshift::lmeval
