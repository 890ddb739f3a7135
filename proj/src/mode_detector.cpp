#include "gripstat/mode_detector.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <string>

#include "gripstat/checksum.hpp"
#include "gripstat/error.hpp"
#include "gripstat/kinematics.hpp"
#include "gripstat/trace_io.hpp"
#include "json.hpp"

namespace gripstat {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

// Keep probabilities strictly inside (0, 1) even when the logit saturates.
constexpr double kProbFloor = 1e-15;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double clamp_prob(double p) { return std::clamp(p, kProbFloor, 1.0 - kProbFloor); }

// softplus(z) - y z == BCE(sigmoid(z), y)
double bce_logit(double z, double y) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - y * z; }

MatrixXd sigmoid(const MatrixXd& z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }

// One truncated-BPTT chunk over a batch. xs[t] is D x B; y and w are T x B
// (w = 0 marks padding). h and c carry the state in and out. Returns the
// summed weighted loss and, when grad is set, accumulates its gradient.
double run_chunk(const LstmParams& p, const std::vector<MatrixXd>& xs, const MatrixXd& y, const MatrixXd& w,
                 MatrixXd& h, MatrixXd& c, LstmGradients* grad) {
  const int H = p.hidden_dim;
  const std::size_t T = xs.size();
  std::vector<MatrixXd> hs(T + 1), cs(T + 1), ig(T), fg(T), og(T), gg(T), tc(T);
  hs[0] = h;
  cs[0] = c;
  MatrixXd dlogit(T, h.cols());
  double loss = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    MatrixXd z = p.W * xs[t] + p.U * hs[t];
    z.colwise() += p.b;
    ig[t] = sigmoid(z.topRows(H));
    fg[t] = sigmoid(z.middleRows(H, H));
    og[t] = sigmoid(z.middleRows(2 * H, H));
    gg[t] = z.bottomRows(H).array().tanh().matrix();
    cs[t + 1] = (fg[t].array() * cs[t].array() + ig[t].array() * gg[t].array()).matrix();
    tc[t] = cs[t + 1].array().tanh().matrix();
    hs[t + 1] = (og[t].array() * tc[t].array()).matrix();
    const Eigen::RowVectorXd logit = (p.w_out.transpose() * hs[t + 1]).array() + p.b_out;
    for (Eigen::Index j = 0; j < logit.size(); ++j) {
      const double wt = w(t, j);
      if (wt == 0.0) {
        dlogit(t, j) = 0.0;
        continue;
      }
      loss += wt * bce_logit(logit[j], y(t, j));
      dlogit(t, j) = wt * (sigmoid(logit[j]) - y(t, j));
    }
  }
  h = hs[T];
  c = cs[T];
  if (!grad) return loss;

  MatrixXd dh_next = MatrixXd::Zero(H, h.cols());
  MatrixXd dc_next = MatrixXd::Zero(H, h.cols());
  MatrixXd dz(4 * H, h.cols());
  for (std::size_t t = T; t-- > 0;) {
    const Eigen::RowVectorXd dl = dlogit.row(t);
    grad->w_out += hs[t + 1] * dl.transpose();
    grad->b_out += dl.sum();
    const MatrixXd dh = p.w_out * dl + dh_next;
    const auto tca = tc[t].array();
    const MatrixXd dc = (dh.array() * og[t].array() * (1.0 - tca * tca) + dc_next.array()).matrix();
    const auto ia = ig[t].array(), fa = fg[t].array(), oa = og[t].array(), ga = gg[t].array();
    dz.topRows(H) = (dc.array() * ga * ia * (1.0 - ia)).matrix();
    dz.middleRows(H, H) = (dc.array() * cs[t].array() * fa * (1.0 - fa)).matrix();
    dz.middleRows(2 * H, H) = (dh.array() * tca * oa * (1.0 - oa)).matrix();
    dz.bottomRows(H) = (dc.array() * ia * (1.0 - ga * ga)).matrix();
    grad->W += dz * xs[t].transpose();
    grad->U += dz * hs[t].transpose();
    grad->b += dz.rowwise().sum();
    dh_next = p.U.transpose() * dz;
    dc_next = (dc.array() * fa).matrix();
  }
  return loss;
}

void check_features(const LstmParams& p, const MatrixXd& x) {
  if (x.cols() != p.input_dim) {
    throw ValidationError("feature width " + std::to_string(x.cols()) + " does not match input_dim " +
                          std::to_string(p.input_dim));
  }
}

Normalization fit_normalization(const std::vector<LabelledSequence>& data) {
  Normalization n;
  double count = 0.0;
  std::array<double, 2> s{0, 0}, s2{0, 0};
  for (const auto& seq : data) {
    for (Eigen::Index r = 0; r < seq.x.rows(); ++r) {
      for (int d = 0; d < 2; ++d) {
        s[d] += seq.x(r, d);
        s2[d] += seq.x(r, d) * seq.x(r, d);
      }
      count += 1.0;
    }
  }
  for (int d = 0; d < 2; ++d) {
    n.mean[d] = s[d] / count;
    const double var = std::max(0.0, s2[d] / count - n.mean[d] * n.mean[d]);
    n.stddev[d] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return n;
}

MatrixXd standardize(const MatrixXd& x, const Normalization& n) {
  MatrixXd z(x.rows(), 2);
  for (int d = 0; d < 2; ++d) z.col(d) = (x.col(d).array() - n.mean[d]) / n.stddev[d];
  return z;
}

}  // namespace

// ---- parameters --------------------------------------------------------------

LstmParams LstmParams::zeros(int D, int H) {
  LstmParams p;
  p.input_dim = D;
  p.hidden_dim = H;
  p.W = MatrixXd::Zero(4 * H, D);
  p.U = MatrixXd::Zero(4 * H, H);
  p.b = VectorXd::Zero(4 * H);
  p.w_out = VectorXd::Zero(H);
  p.b_out = 0.0;
  return p;
}

LstmParams LstmParams::random(int D, int H, std::uint64_t seed) {
  LstmParams p = zeros(D, H);
  std::mt19937_64 rng(seed);
  const double r = 1.0 / std::sqrt(static_cast<double>(H));
  std::uniform_real_distribution<double> u(-r, r);
  auto fill = [&](auto& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = u(rng);
  };
  fill(p.W);
  fill(p.U);
  fill(p.w_out);
  p.b.segment(H, H).setOnes();
  return p;
}

void LstmParams::validate() const {
  const int H = hidden_dim, D = input_dim;
  if (D < 1 || H < 1) throw ValidationError("LSTM dimensions must be positive");
  if (W.rows() != 4 * H || W.cols() != D || U.rows() != 4 * H || U.cols() != H || b.size() != 4 * H ||
      w_out.size() != H) {
    throw ValidationError("LSTM parameter shapes do not match input_dim/hidden_dim");
  }
  if (!W.allFinite() || !U.allFinite() || !b.allFinite() || !w_out.allFinite() || !std::isfinite(b_out)) {
    throw ValidationError("LSTM parameters contain non-finite values");
  }
}

std::size_t LstmParams::parameter_count() const {
  return static_cast<std::size_t>(W.size() + U.size() + b.size() + w_out.size() + 1);
}

std::vector<double> LstmParams::flatten() const {
  std::vector<double> v;
  v.reserve(parameter_count());
  v.insert(v.end(), W.data(), W.data() + W.size());
  v.insert(v.end(), U.data(), U.data() + U.size());
  v.insert(v.end(), b.data(), b.data() + b.size());
  v.insert(v.end(), w_out.data(), w_out.data() + w_out.size());
  v.push_back(b_out);
  return v;
}

void LstmParams::unflatten(const std::vector<double>& v) {
  if (v.size() != parameter_count()) throw ValidationError("parameter vector has the wrong length");
  const double* q = v.data();
  std::copy(q, q + W.size(), W.data());
  q += W.size();
  std::copy(q, q + U.size(), U.data());
  q += U.size();
  std::copy(q, q + b.size(), b.data());
  q += b.size();
  std::copy(q, q + w_out.size(), w_out.data());
  q += w_out.size();
  b_out = *q;
}

bool operator==(const LstmParams& a, const LstmParams& b) {
  return a.input_dim == b.input_dim && a.hidden_dim == b.hidden_dim && a.flatten() == b.flatten();
}

LstmGradients::LstmGradients(const LstmParams& p)
    : W(MatrixXd::Zero(p.W.rows(), p.W.cols())),
      U(MatrixXd::Zero(p.U.rows(), p.U.cols())),
      b(VectorXd::Zero(p.b.size())),
      w_out(VectorXd::Zero(p.w_out.size())) {}

void LstmGradients::set_zero() {
  W.setZero();
  U.setZero();
  b.setZero();
  w_out.setZero();
  b_out = 0.0;
}

double LstmGradients::norm() const {
  return std::sqrt(W.squaredNorm() + U.squaredNorm() + b.squaredNorm() + w_out.squaredNorm() + b_out * b_out);
}

void LstmGradients::scale(double s) {
  W *= s;
  U *= s;
  b *= s;
  w_out *= s;
  b_out *= s;
}

std::vector<double> LstmGradients::flatten() const {
  std::vector<double> v;
  v.insert(v.end(), W.data(), W.data() + W.size());
  v.insert(v.end(), U.data(), U.data() + U.size());
  v.insert(v.end(), b.data(), b.data() + b.size());
  v.insert(v.end(), w_out.data(), w_out.data() + w_out.size());
  v.push_back(b_out);
  return v;
}

// ---- forward / loss ------------------------------------------------------------

std::vector<double> lstm_forward(const LstmParams& p, const MatrixXd& x) {
  check_features(p, x);
  if (x.rows() == 0) throw ValidationError("empty feature sequence");
  const int H = p.hidden_dim;
  VectorXd h = VectorXd::Zero(H), c = VectorXd::Zero(H), z(4 * H);
  std::vector<double> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    z.noalias() = p.W * x.row(t).transpose();
    z.noalias() += p.U * h;
    z += p.b;
    const VectorXd i = sigmoid(z.head(H));
    const VectorXd f = sigmoid(z.segment(H, H));
    const VectorXd o = sigmoid(z.segment(2 * H, H));
    const VectorXd g = z.tail(H).array().tanh().matrix();
    c = (f.array() * c.array() + i.array() * g.array()).matrix();
    h = (o.array() * c.array().tanh()).matrix();
    out[static_cast<std::size_t>(t)] = clamp_prob(sigmoid(p.w_out.dot(h) + p.b_out));
  }
  return out;
}

double lstm_loss(const LstmParams& p, const MatrixXd& x, const std::vector<int>& y, const std::vector<double>& weight,
                 LstmGradients* grad) {
  check_features(p, x);
  const auto T = static_cast<std::size_t>(x.rows());
  if (y.size() != T || weight.size() != T) throw ValidationError("labels/weights do not match the sequence length");
  std::vector<MatrixXd> xs(T);
  MatrixXd yy(T, 1), ww(T, 1);
  for (std::size_t t = 0; t < T; ++t) {
    xs[t] = x.row(static_cast<Eigen::Index>(t)).transpose();
    yy(t, 0) = y[t];
    ww(t, 0) = weight[t];
  }
  MatrixXd h = MatrixXd::Zero(p.hidden_dim, 1), c = MatrixXd::Zero(p.hidden_dim, 1);
  return run_chunk(p, xs, yy, ww, h, c, grad);
}

Eigen::MatrixXd make_features(const FilteredTrace& f, const Normalization& n) {
  MatrixXd x(static_cast<Eigen::Index>(f.current_filt.size()), 2);
  for (std::size_t t = 0; t < f.current_filt.size(); ++t) {
    x(t, 0) = (f.current_filt[t] - n.mean[0]) / n.stddev[0];
    x(t, 1) = (f.derivative[t] - n.mean[1]) / n.stddev[1];
  }
  return x;
}

// ---- training --------------------------------------------------------------------

void TrainConfig::validate() const {
  if (hidden_dim < 1 || !(learning_rate > 0.0) || epochs < 1 || bptt_horizon < 1 || batch_size < 1 ||
      !(clip_norm > 0.0)) {
    throw ValidationError("training hyperparameters must be positive");
  }
}

double per_sample_accuracy(const LstmParams& p, const Normalization& n, const std::vector<LabelledSequence>& data,
                           double threshold) {
  std::size_t hit = 0, total = 0;
  for (const auto& s : data) {
    const auto prob = lstm_forward(p, standardize(s.x, n));
    for (std::size_t t = 0; t < prob.size(); ++t) {
      hit += static_cast<std::size_t>((prob[t] > threshold ? 1 : 0) == s.y[t]);
      ++total;
    }
  }
  return total ? static_cast<double>(hit) / static_cast<double>(total) : 0.0;
}

LstmParams lstm_train(const std::vector<LabelledSequence>& train, const std::vector<LabelledSequence>& holdout,
                      const TrainConfig& cfg, TrainReport* report) {
  cfg.validate();
  if (train.empty()) throw TrainingError("training set is empty");
  std::size_t n1 = 0, n_all = 0;
  for (const auto& s : train) {
    if (s.x.cols() != 2 || static_cast<std::size_t>(s.x.rows()) != s.y.size() || s.y.empty()) {
      throw TrainingError("training sequence has inconsistent features/labels");
    }
    n1 += static_cast<std::size_t>(std::count(s.y.begin(), s.y.end(), 1));
    n_all += s.y.size();
  }
  const std::size_t n0 = n_all - n1;
  // Inverse class frequency, normalised so a balanced set has weight 1.
  const std::array<double, 2> cw{n0 ? static_cast<double>(n_all) / (2.0 * static_cast<double>(n0)) : 0.0,
                                 n1 ? static_cast<double>(n_all) / (2.0 * static_cast<double>(n1)) : 0.0};
  const Normalization norm = fit_normalization(train);
  std::vector<MatrixXd> xz;
  xz.reserve(train.size());
  for (const auto& s : train) xz.push_back(standardize(s.x, norm));

  LstmParams p = LstmParams::random(2, cfg.hidden_dim, cfg.seed);
  LstmGradients grad(p);
  std::mt19937_64 rng(cfg.seed ^ 0x5DEECE66DULL);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  TrainReport rep;
  rep.norm = norm;
  rep.class_weight = cw;
  const int H = cfg.hidden_dim;

  std::size_t step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0, weight_sum = 0.0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      const std::size_t B = std::min(cfg.batch_size, order.size() - b0);
      std::size_t tmax = 0;
      for (std::size_t j = 0; j < B; ++j) tmax = std::max(tmax, train[order[b0 + j]].y.size());
      MatrixXd h = MatrixXd::Zero(H, static_cast<Eigen::Index>(B));
      MatrixXd c = h;
      for (std::size_t t0 = 0; t0 < tmax; t0 += cfg.bptt_horizon) {
        const std::size_t T = std::min(cfg.bptt_horizon, tmax - t0);
        std::vector<MatrixXd> xs(T, MatrixXd::Zero(2, static_cast<Eigen::Index>(B)));
        MatrixXd y = MatrixXd::Zero(T, B), w = MatrixXd::Zero(T, B);
        double valid = 0.0;
        for (std::size_t j = 0; j < B; ++j) {
          const std::size_t idx = order[b0 + j];
          const std::size_t len = train[idx].y.size();
          for (std::size_t t = 0; t < T && t0 + t < len; ++t) {
            xs[t].col(j) = xz[idx].row(t0 + t).transpose();
            const int lab = train[idx].y[t0 + t];
            y(t, j) = lab;
            w(t, j) = cw[lab];
            valid += 1.0;
          }
        }
        if (valid == 0.0) continue;
        grad.set_zero();
        const double loss = run_chunk(p, xs, y, w, h, c, &grad);
        ++step;
        if (!std::isfinite(loss)) {
          throw TrainingError("loss became non-finite at epoch " + std::to_string(epoch) + ", step " +
                              std::to_string(step));
        }
        loss_sum += loss;
        weight_sum += valid;
        grad.scale(1.0 / valid);
        const double gn = grad.norm();
        if (gn > cfg.clip_norm) grad.scale(cfg.clip_norm / gn);
        p.W -= cfg.learning_rate * grad.W;
        p.U -= cfg.learning_rate * grad.U;
        p.b -= cfg.learning_rate * grad.b;
        p.w_out -= cfg.learning_rate * grad.w_out;
        p.b_out -= cfg.learning_rate * grad.b_out;
      }
    }
    EpochReport er;
    er.epoch = epoch;
    er.train_loss = loss_sum / weight_sum;
    er.holdout_accuracy = holdout.empty() ? 0.0 : per_sample_accuracy(p, norm, holdout);
    rep.epochs.push_back(er);
  }
  if (report) *report = rep;
  return p;
}

// ---- compensation ------------------------------------------------------------------

namespace {

template <std::size_t N>
double poly(const std::array<double, N>& c, double u) {
  double v = 0.0;
  for (std::size_t k = N; k-- > 0;) v = v * u + c[k];
  return v;
}

struct Axis {
  double center = 0.0, half_width = 1.0;
  double scale(double x) const { return (x - center) / half_width; }
};

// Least squares on distinct abscissae; returns coefficients in the scaled basis.
template <std::size_t N>
std::array<double, N> fit_poly(const std::map<double, std::pair<double, std::size_t>>& groups, Axis& axis,
                               const char* name) {
  if (groups.size() < N) {
    throw ValidationError(std::string("compensation fit needs at least ") + std::to_string(N) + " distinct " + name +
                          " values, got " + std::to_string(groups.size()));
  }
  const double lo = groups.begin()->first, hi = groups.rbegin()->first;
  axis.center = 0.5 * (lo + hi);
  axis.half_width = 0.5 * (hi - lo);
  MatrixXd V(static_cast<Eigen::Index>(groups.size()), static_cast<Eigen::Index>(N));
  VectorXd z(V.rows());
  Eigen::Index r = 0;
  for (const auto& [x, acc] : groups) {
    const double u = axis.scale(x);
    double pw = 1.0;
    for (std::size_t k = 0; k < N; ++k, pw *= u) V(r, static_cast<Eigen::Index>(k)) = pw;
    z[r++] = acc.first / static_cast<double>(acc.second);
  }
  Eigen::ColPivHouseholderQR<MatrixXd> qr(V);
  if (qr.rank() < static_cast<Eigen::Index>(N)) {
    throw ValidationError(std::string("compensation fit is rank deficient along ") + name);
  }
  const VectorXd c = qr.solve(z);
  std::array<double, N> out{};
  for (std::size_t k = 0; k < N; ++k) out[k] = c[static_cast<Eigen::Index>(k)];
  return out;
}

}  // namespace

double CompensationSurface::speed_term(double speed) const {
  return poly(speed_coeffs, (speed - speed_center) / speed_half_width);
}

double CompensationSurface::size_term(double theta1) const {
  return poly(size_coeffs, (theta1 - size_center) / size_half_width);
}

double CompensationSurface::operator()(double speed, double theta1) const {
  return speed_term(speed) + size_term(theta1);
}

bool CompensationSurface::in_domain(double speed, double theta1) const {
  constexpr double kSlack = 1e-9;
  return std::abs(speed - speed_center) <= speed_half_width * (1 + kSlack) &&
         std::abs(theta1 - size_center) <= size_half_width * (1 + kSlack);
}

CompensationFit fit_compensation(const std::vector<CompensationSample>& samples) {
  std::map<double, std::pair<double, std::size_t>> by_speed, by_size;
  for (const auto& s : samples) {
    if (!std::isfinite(s.speed) || !std::isfinite(s.size) || !std::isfinite(s.deviation)) {
      throw ValidationError("compensation samples must be finite");
    }
    auto& a = by_speed[s.speed];
    a.first += s.deviation;
    ++a.second;
  }
  CompensationFit fit;
  CompensationSurface& S = fit.surface;
  Axis sp, sz;
  S.speed_coeffs = fit_poly<3>(by_speed, sp, "speed");
  S.speed_center = sp.center;
  S.speed_half_width = sp.half_width;
  for (const auto& s : samples) {
    auto& a = by_size[s.size];
    a.first += s.deviation - S.speed_term(s.speed);
    ++a.second;
  }
  S.size_coeffs = fit_poly<5>(by_size, sz, "size");
  S.size_center = sz.center;
  S.size_half_width = sz.half_width;
  // Move the size polynomial's mean over the fitted sizes into the speed term.
  double m = 0.0;
  for (const auto& [x, acc] : by_size) m += S.size_term(x);
  m /= static_cast<double>(by_size.size());
  S.size_coeffs[0] -= m;
  S.speed_coeffs[0] += m;
  double ss = 0.0;
  for (const auto& s : samples) {
    const double e = s.deviation - S(s.speed, s.size);
    ss += e * e;
  }
  fit.residual_rms = samples.empty() ? 0.0 : std::sqrt(ss / static_cast<double>(samples.size()));
  return fit;
}

Compensated compensate(const CompensationSurface& s, double speed, double size, double theta1_raw) {
  return {theta1_raw - s(speed, size), !s.in_domain(speed, size)};
}

// ---- switch detection ----------------------------------------------------------------

SwitchDetection detect_switch(const FingerGeometry& g, const FilteredTrace& f, const LstmParams& p,
                              const Normalization& n, double threshold, std::size_t debounce,
                              std::size_t warmup) {
  SwitchDetection d;
  if (f.current_filt.empty()) return d;
  d.probability = lstm_forward(p, make_features(f, n));
  const auto& pr = d.probability;
  std::size_t run = 0;
  for (std::size_t k = 0; k < pr.size(); ++k) {
    run = pr[k] > threshold ? run + 1 : 0;
    if (run == debounce + 1 && k - debounce >= warmup) {
      d.index = k - debounce;
      break;
    }
  }
  if (d.index) {
    const double ta = f.position_aligned.at(*d.index);
    try {
      d.theta1_raw = parallel_theta1(g, ta);
    } catch (const LimitError&) {
      const double lo = actuation_from_joints(g, g.theta1_range.min, kParallelBeta - g.theta1_range.min, 0.0);
      d.theta1_raw = ta < lo ? g.theta1_range.min : g.theta1_range.max;
    }
  }
  return d;
}

SwitchDetection detect_switch(const FingerGeometry& g, const FilteredTrace& f, const ModeModel& m) {
  const std::size_t warmup = m.filter.median_window + m.filter.mean_window;
  return detect_switch(g, f, m.params, m.norm, m.threshold, m.debounce, warmup);
}

// ---- model document ------------------------------------------------------------------

namespace {

std::string hexf(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::hex);
  return std::string(buf, r.ptr);
}

double unhexf(const json& j) {
  const std::string s = j.get<std::string>();
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  bool neg = false;
  if (first != last && *first == '-') {
    neg = true;
    ++first;
  }
  const auto r = std::from_chars(first, last, v, std::chars_format::hex);
  if (r.ec != std::errc{} || r.ptr != last) throw CorruptionError("bad number '" + s + "' in model document");
  return neg ? -v : v;
}

json hex_array(const double* p, std::size_t n) {
  json a = json::array();
  for (std::size_t i = 0; i < n; ++i) a.push_back(hexf(p[i]));
  return a;
}

template <class M>
void read_hex_array(const json& a, M& m) {
  if (!a.is_array() || a.size() != static_cast<std::size_t>(m.size())) {
    throw CorruptionError("model array has the wrong length");
  }
  for (std::size_t i = 0; i < a.size(); ++i) m.data()[i] = unhexf(a[i]);
}

json surface_json(const CompensationSurface& s) {
  return {{"rule", s.rule},
          {"speed_coeffs", hex_array(s.speed_coeffs.data(), 3)},
          {"size_coeffs", hex_array(s.size_coeffs.data(), 5)},
          {"speed_center", hexf(s.speed_center)},
          {"speed_half_width", hexf(s.speed_half_width)},
          {"size_center", hexf(s.size_center)},
          {"size_half_width", hexf(s.size_half_width)}};
}

CompensationSurface surface_of(const json& c) {
  CompensationSurface s;
  s.rule = c.at("rule").get<std::string>();
  if (s.rule != "additive") throw VersionError("unknown compensation rule '" + s.rule + "'");
  read_hex_array(c.at("speed_coeffs"), s.speed_coeffs);
  read_hex_array(c.at("size_coeffs"), s.size_coeffs);
  s.speed_center = unhexf(c.at("speed_center"));
  s.speed_half_width = unhexf(c.at("speed_half_width"));
  s.size_center = unhexf(c.at("size_center"));
  s.size_half_width = unhexf(c.at("size_half_width"));
  return s;
}

json payload_of(const ModeModel& m) {
  const LstmParams& p = m.params;
  json j;
  j["lstm"] = {{"input_dim", p.input_dim},
               {"hidden_dim", p.hidden_dim},
               {"gate_order", "input,forget,output,candidate"},
               {"W", hex_array(p.W.data(), static_cast<std::size_t>(p.W.size()))},
               {"U", hex_array(p.U.data(), static_cast<std::size_t>(p.U.size()))},
               {"b", hex_array(p.b.data(), static_cast<std::size_t>(p.b.size()))},
               {"w_out", hex_array(p.w_out.data(), static_cast<std::size_t>(p.w_out.size()))},
               {"b_out", hexf(p.b_out)}};
  j["normalization"] = {{"mean", hex_array(m.norm.mean.data(), 2)}, {"stddev", hex_array(m.norm.stddev.data(), 2)}};
  j["compensation"] = surface_json(m.surface);
  if (m.proximal_surface) j["compensation_proximal_first"] = surface_json(*m.proximal_surface);
  j["filter"] = {{"median_window", m.filter.median_window},
                 {"mean_window", m.filter.mean_window},
                 {"delay_units", m.filter.delay_units}};
  j["threshold"] = hexf(m.threshold);
  j["debounce"] = m.debounce;
  return j;
}

ModeModel model_of(const json& j) {
  ModeModel m;
  const json& l = j.at("lstm");
  m.params = LstmParams::zeros(l.at("input_dim").get<int>(), l.at("hidden_dim").get<int>());
  read_hex_array(l.at("W"), m.params.W);
  read_hex_array(l.at("U"), m.params.U);
  read_hex_array(l.at("b"), m.params.b);
  read_hex_array(l.at("w_out"), m.params.w_out);
  m.params.b_out = unhexf(l.at("b_out"));
  read_hex_array(j.at("normalization").at("mean"), m.norm.mean);
  read_hex_array(j.at("normalization").at("stddev"), m.norm.stddev);
  m.surface = surface_of(j.at("compensation"));
  if (j.contains("compensation_proximal_first")) m.proximal_surface = surface_of(j.at("compensation_proximal_first"));
  const json& f = j.at("filter");
  m.filter.median_window = f.at("median_window").get<std::size_t>();
  m.filter.mean_window = f.at("mean_window").get<std::size_t>();
  m.filter.delay_units = f.at("delay_units").get<std::size_t>();
  m.threshold = unhexf(j.at("threshold"));
  m.debounce = j.at("debounce").get<std::size_t>();
  m.params.validate();
  m.filter.validate();
  return m;
}

}  // namespace

std::string model_to_string(const ModeModel& m) {
  m.params.validate();
  const json payload = payload_of(m);
  json doc;
  doc["format"] = "gripstat-model";
  doc["version"] = kModelFormatVersion;
  doc["checksum_sha256"] = sha256_hex(payload.dump());
  doc["payload"] = payload;
  return doc.dump(1) + "\n";
}

ModeModel model_from_string(const std::string& text, int reader_version) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw CorruptionError(std::string("model document is truncated or malformed: ") + e.what());
  }
  try {
    if (doc.at("format") != "gripstat-model") throw CorruptionError("not a gripstat model document");
    const int v = doc.at("version").get<int>();
    if (v != reader_version) {
      throw VersionError("model format version " + std::to_string(v) + " cannot be read by a version " +
                         std::to_string(reader_version) + " reader");
    }
    const json& payload = doc.at("payload");
    if (sha256_hex(payload.dump()) != doc.at("checksum_sha256").get<std::string>()) {
      throw CorruptionError("model checksum mismatch");
    }
    return model_of(payload);
  } catch (const json::exception& e) {
    throw CorruptionError(std::string("model document is incomplete: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const ModeModel& m) {
  write_text_file_atomic(path, model_to_string(m));
}

ModeModel load_model(const std::filesystem::path& path) { return model_from_string(read_text_file(path)); }

}  // namespace gripstat
