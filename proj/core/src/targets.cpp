#include "tailscore/targets.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace tailscore {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Bounded or polynomially growing scores have moments of every order; this is
// the order recorded for them.
constexpr int kAllMoments = 8;

double sq_norm(Point x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

double sign(double v) { return (v > 0) - (v < 0); }

int get_dim(const BuiltinSpec& spec) {
  const double d = spec.get("d", 1.0);
  if (d < 1 || d != std::floor(d)) throw std::invalid_argument("target: d must be a positive integer");
  return static_cast<int>(d);
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

double parse_number(const std::string& raw) {
  const std::string s = trim(raw);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (...) {
    throw std::invalid_argument("target spec: bad number '" + s + "'");
  }
  if (used != s.size()) throw std::invalid_argument("target spec: bad number '" + s + "'");
  return v;
}

// Splits on commas that are not nested inside brackets.
std::vector<std::string> split_top(const std::string& s) {
  std::vector<std::string> parts;
  int depth = 0;
  std::string cur;
  for (char c : s) {
    if (c == '[' || c == '(') ++depth;
    if (c == ']' || c == ')') --depth;
    if (depth < 0) throw std::invalid_argument("target spec: unbalanced brackets");
    if (c == ',' && depth == 0) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (depth != 0) throw std::invalid_argument("target spec: unbalanced brackets");
  if (!trim(cur).empty() || !parts.empty()) parts.push_back(cur);
  return parts;
}

std::vector<double> radial_grid() {
  std::vector<double> r{0.0};
  for (int i = 0; i <= 240; ++i) r.push_back(std::pow(10.0, -3.0 + 6.0 * i / 240.0));
  return r;
}

template <class Log>
double max_over_rays(const TargetDistribution& t, Log log_weight) {
  double best = 0.0;
  std::vector<double> x(t.dim);
  for (int ray = 0; ray < 2; ++ray) {
    for (double r : radial_grid()) {
      if (ray == 0) {
        std::fill(x.begin(), x.end(), 0.0);
        x[0] = r;
      } else {
        std::fill(x.begin(), x.end(), r / std::sqrt(double(t.dim)));
      }
      const double p = t.pdf(x);
      if (!(p > 0.0)) continue;
      best = std::max(best, std::exp(std::log(p) + log_weight(r)));
    }
    if (t.dim == 1) break;
  }
  return best;
}

}  // namespace

std::string to_string(TailKind kind) {
  switch (kind) {
    case TailKind::Polynomial: return "polynomial";
    case TailKind::StretchedExponential: return "stretched_exponential";
    case TailKind::SubGaussian: return "subgaussian";
  }
  return "unknown";
}

std::string to_string(Regime r) { return r == Regime::Polynomial ? "polynomial" : "exponential"; }

Regime regime_of(const TargetDistribution& target) {
  return target.tail.kind == TailKind::Polynomial ? Regime::Polynomial : Regime::Exponential;
}

std::vector<double> TargetDistribution::score0(Point x) const {
  if (!analytic_score) throw std::logic_error(name + ": no analytic score");
  std::vector<double> out(dim);
  analytic_score(x, out);
  return out;
}

Matrix TargetDistribution::sample(Stream& rng, std::size_t m) const {
  Matrix out(m, dim);
  for (std::size_t i = 0; i < m; ++i) sampler(rng, out.row(i));
  return out;
}

BuiltinSpec BuiltinSpec::parse(const std::string& text) {
  const std::string s = trim(text);
  BuiltinSpec spec;
  const auto open = s.find('(');
  if (open == std::string::npos) {
    spec.name = s;
  } else {
    if (s.back() != ')') throw std::invalid_argument("target spec: missing ')' in '" + s + "'");
    spec.name = trim(s.substr(0, open));
    for (const std::string& part : split_top(s.substr(open + 1, s.size() - open - 2))) {
      const auto eq = part.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("target spec: expected key=value in '" + part + "'");
      const std::string key = trim(part.substr(0, eq));
      const std::string val = trim(part.substr(eq + 1));
      std::vector<double> values;
      if (!val.empty() && val.front() == '[') {
        if (val.back() != ']') throw std::invalid_argument("target spec: unterminated list for " + key);
        for (const std::string& item : split_top(val.substr(1, val.size() - 2))) values.push_back(parse_number(item));
      } else {
        values.push_back(parse_number(val));
      }
      if (key.empty()) throw std::invalid_argument("target spec: empty key");
      spec.args[key] = std::move(values);
    }
  }
  if (spec.name.empty()) throw std::invalid_argument("target spec: empty name");
  return spec;
}

double BuiltinSpec::get(const std::string& key, double fallback) const {
  auto it = args.find(key);
  if (it == args.end()) return fallback;
  if (it->second.size() != 1) throw std::invalid_argument("target spec: " + key + " must be a scalar");
  return it->second.front();
}

std::string BuiltinSpec::str() const {
  std::ostringstream os;
  os.precision(17);
  os << name << "(";
  bool first = true;
  for (const auto& [k, v] : args) {
    os << (first ? "" : ",") << k << "=";
    first = false;
    if (v.size() == 1) {
      os << v[0];
    } else {
      os << "[";
      for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
      os << "]";
    }
  }
  os << ")";
  return os.str();
}

std::vector<std::string> builtin_target_names() {
  return {"student_t", "pareto_mixture", "generalized_gaussian", "laplace", "gaussian", "gaussian_mixture"};
}

double fit_polynomial_envelope(const TargetDistribution& t, double gamma) {
  const double e = 0.5 * (1.0 + gamma + t.dim);
  return max_over_rays(t, [&](double r) { return e * std::log1p(r * r); });
}

double fit_stretched_prefactor(const TargetDistribution& t, double gamma, double c1) {
  return max_over_rays(t, [&](double r) { return c1 * std::pow(r, gamma); });
}

TargetDistribution make_gaussian(int d) {
  TargetDistribution t;
  t.name = "gaussian";
  t.dim = d;
  t.density = [](Point x) { return std::exp(-0.5 * sq_norm(x)); };
  t.norm_constant = std::pow(2.0 * std::numbers::pi, 0.5 * d);
  t.sampler = [](Stream& rng, std::span<double> out) {
    for (double& v : out) v = rng.normal();
  };
  t.analytic_score = [](Point x, std::span<double> out) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = -x[i];
  };
  t.tail = {TailKind::SubGaussian, 2.0, 0.5, 0.0};
  t.tail.C1 = 1.0 / t.norm_constant;
  t.smoothness_beta = kInf;
  t.holder_order = kInf;
  t.moment_order_k = kAllMoments;
  GaussianMixture mix{{1.0}, Matrix(1, d, 0.0), {1.0}};
  t.mixture = mix;
  return t;
}

TargetDistribution make_laplace(int d) {
  TargetDistribution t;
  t.name = "laplace";
  t.dim = d;
  t.density = [](Point x) {
    double s = 0.0;
    for (double v : x) s += std::abs(v);
    return std::exp(-s);
  };
  t.norm_constant = std::pow(2.0, d);
  t.sampler = [](Stream& rng, std::span<double> out) {
    for (double& v : out) {
      const double e = -std::log(rng.uniform());
      v = rng.uniform() < 0.5 ? -e : e;
    }
  };
  t.analytic_score = [](Point x, std::span<double> out) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = -sign(x[i]);
  };
  // sum |x_i| >= |x|, so c1 = 1 in every dimension.
  t.tail = {TailKind::StretchedExponential, 1.0, 1.0, 0.0};
  t.tail.C1 = fit_stretched_prefactor(t, 1.0, 1.0);
  // Fourier transform ~ (1+w^2)^{-1}: H^beta for every beta < 3/2.
  t.smoothness_beta = 1.5;
  t.holder_order = 1.0;
  t.moment_order_k = kAllMoments;
  t.kinks = {0.0};
  return t;
}

TargetDistribution make_student_t(double nu, int d) {
  if (!(nu > 1.0)) throw std::invalid_argument("student_t: nu must exceed 1");
  TargetDistribution t;
  t.name = "student_t";
  t.dim = d;
  t.density = [nu, d](Point x) { return std::pow(1.0 + sq_norm(x) / nu, -0.5 * (nu + d)); };
  t.norm_constant =
      std::exp(std::lgamma(0.5 * nu) - std::lgamma(0.5 * (nu + d))) * std::pow(nu * std::numbers::pi, 0.5 * d);
  t.sampler = [nu](Stream& rng, std::span<double> out) {
    std::gamma_distribution<double> g(0.5 * nu, 2.0);
    const double scale = std::sqrt(nu / g(rng));
    for (double& v : out) v = rng.normal() * scale;
  };
  t.analytic_score = [nu, d](Point x, std::span<double> out) {
    const double f = -(nu + d) / (nu + sq_norm(x));
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = f * x[i];
  };
  // Radial decay |x|^{-(nu+d)} matched against (1+|x|^2)^{-(1+gamma+d)/2}
  // gives nu + d = 1 + gamma + d, i.e. gamma = nu - 1 for every d.
  t.tail = {TailKind::Polynomial, nu - 1.0, 0.0, 0.0};
  t.poly_C0 = fit_polynomial_envelope(t, nu - 1.0);
  t.smoothness_beta = kInf;
  t.holder_order = kInf;
  t.moment_order_k = kAllMoments;
  t.scale = std::sqrt(nu);
  return t;
}

TargetDistribution make_generalized_gaussian(double gamma, int d) {
  if (!(gamma > 0.0)) throw std::invalid_argument("generalized_gaussian: gamma must be positive");
  TargetDistribution t;
  t.name = "generalized_gaussian";
  t.dim = d;
  t.density = [gamma](Point x) {
    double s = 0.0;
    for (double v : x) s += std::pow(std::abs(v), gamma);
    return std::exp(-s);
  };
  t.norm_constant = std::pow(2.0 * std::tgamma(1.0 + 1.0 / gamma), d);
  t.sampler = [gamma](Stream& rng, std::span<double> out) {
    std::gamma_distribution<double> g(1.0 / gamma, 1.0);
    for (double& v : out) {
      const double r = std::pow(g(rng), 1.0 / gamma);
      v = rng.uniform() < 0.5 ? -r : r;
    }
  };
  t.analytic_score = [gamma](Point x, std::span<double> out) {
    for (std::size_t i = 0; i < x.size(); ++i)
      out[i] = x[i] == 0.0 ? 0.0 : -gamma * sign(x[i]) * std::pow(std::abs(x[i]), gamma - 1.0);
  };
  // |x|_gamma >= |x|_2 for gamma <= 2, and >= d^{1/gamma-1/2}|x|_2 above.
  const double c1 = gamma <= 2.0 ? 1.0 : std::pow(double(d), 1.0 - 0.5 * gamma);
  t.tail = {TailKind::StretchedExponential, gamma, c1, 0.0};
  t.tail.C1 = fit_stretched_prefactor(t, gamma, c1);
  const bool even = std::abs(gamma - 2.0 * std::round(gamma / 2.0)) < 1e-12;
  t.smoothness_beta = even ? kInf : gamma + 0.5;
  t.holder_order = even ? kInf : gamma;
  if (gamma >= 1.0) {
    t.moment_order_k = kAllMoments;
  } else {
    // E|s0|^{2k} needs 2k(gamma-1) > -1.
    const double bound = 1.0 / (2.0 * (1.0 - gamma));
    int k = static_cast<int>(std::ceil(bound)) - 1;
    if (k >= 1) t.moment_order_k = k;
  }
  if (!even) t.kinks = {0.0};
  return t;
}

TargetDistribution make_pareto_mixture(double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("pareto_mixture: gamma must be positive");
  TargetDistribution t;
  t.name = "pareto_mixture";
  t.dim = 1;
  // Equal mixture of a Lomax law and its mirror image.
  t.density = [gamma](Point x) { return std::pow(1.0 + std::abs(x[0]), -(2.0 + gamma)); };
  t.norm_constant = 2.0 / (1.0 + gamma);
  t.sampler = [gamma](Stream& rng, std::span<double> out) {
    const double r = std::pow(rng.uniform(), -1.0 / (1.0 + gamma)) - 1.0;
    out[0] = rng.uniform() < 0.5 ? -r : r;
  };
  t.analytic_score = [gamma](Point x, std::span<double> out) {
    out[0] = -(2.0 + gamma) * sign(x[0]) / (1.0 + std::abs(x[0]));
  };
  t.tail = {TailKind::Polynomial, gamma, 0.0, 0.0};
  t.poly_C0 = fit_polynomial_envelope(t, gamma);
  t.smoothness_beta = 1.5;
  t.holder_order = 1.0;
  t.moment_order_k = kAllMoments;
  t.kinks = {0.0};
  return t;
}

TargetDistribution make_gaussian_mixture(GaussianMixture mix) {
  const std::size_t k = mix.weights.size();
  if (k == 0 || mix.means.rows() != k || mix.scales.size() != k)
    throw std::invalid_argument("gaussian_mixture: weights, means and scales must have matching lengths");
  double wsum = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    if (!(mix.weights[j] > 0.0) || !(mix.scales[j] > 0.0))
      throw std::invalid_argument("gaussian_mixture: weights and scales must be positive");
    wsum += mix.weights[j];
  }
  for (double& w : mix.weights) w /= wsum;
  const int d = static_cast<int>(mix.means.cols());

  TargetDistribution t;
  t.name = "gaussian_mixture";
  t.dim = d;
  t.density = [mix, d](Point x) {
    double p = 0.0;
    for (std::size_t j = 0; j < mix.weights.size(); ++j) {
      double r2 = 0.0;
      for (int i = 0; i < d; ++i) r2 += std::pow(x[i] - mix.means(j, i), 2);
      const double s2 = mix.scales[j] * mix.scales[j];
      p += mix.weights[j] * std::exp(-0.5 * r2 / s2) / std::pow(2.0 * std::numbers::pi * s2, 0.5 * d);
    }
    return p;
  };
  t.norm_constant = 1.0;
  t.sampler = [mix, d](Stream& rng, std::span<double> out) {
    double u = rng.uniform();
    std::size_t j = 0;
    while (j + 1 < mix.weights.size() && u > mix.weights[j]) u -= mix.weights[j++];
    for (int i = 0; i < d; ++i) out[i] = mix.means(j, i) + mix.scales[j] * rng.normal();
  };
  t.analytic_score = [mix, d](Point x, std::span<double> out) {
    // log-sum-exp over components
    std::vector<double> logw(mix.weights.size());
    double top = -kInf;
    for (std::size_t j = 0; j < mix.weights.size(); ++j) {
      double r2 = 0.0;
      for (int i = 0; i < d; ++i) r2 += std::pow(x[i] - mix.means(j, i), 2);
      const double s2 = mix.scales[j] * mix.scales[j];
      logw[j] = std::log(mix.weights[j]) - 0.5 * r2 / s2 - 0.5 * d * std::log(s2);
      top = std::max(top, logw[j]);
    }
    double z = 0.0;
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t j = 0; j < mix.weights.size(); ++j) {
      const double w = std::exp(logw[j] - top);
      z += w;
      const double s2 = mix.scales[j] * mix.scales[j];
      for (int i = 0; i < d; ++i) out[i] += w * (mix.means(j, i) - x[i]) / s2;
    }
    for (double& v : out) v /= z;
  };
  double smax = 0.0;
  for (double s : mix.scales) smax = std::max(smax, s);
  t.tail = {TailKind::SubGaussian, 2.0, 0.0, 0.0};
  t.smoothness_beta = kInf;
  t.holder_order = kInf;
  t.moment_order_k = kAllMoments;
  t.scale = smax;
  if (d == 1) {
    for (std::size_t j = 0; j < k; ++j) t.kinks.push_back(mix.means(j, 0));
  }
  bool symmetric = true;
  for (std::size_t j = 0; j < k; ++j)
    if (sq_norm(mix.means.row(j)) != 0.0) symmetric = false;
  t.symmetric = symmetric;
  t.mixture = std::move(mix);
  return t;
}

TargetDistribution make_builtin_target(const BuiltinSpec& spec) {
  const int d = get_dim(spec);
  TargetDistribution t;
  if (spec.name == "gaussian") {
    t = make_gaussian(d);
  } else if (spec.name == "laplace") {
    t = make_laplace(d);
  } else if (spec.name == "student_t") {
    if (!spec.has("nu")) throw std::invalid_argument("student_t: missing nu");
    t = make_student_t(spec.get("nu", 0.0), d);
  } else if (spec.name == "generalized_gaussian") {
    if (!spec.has("gamma")) throw std::invalid_argument("generalized_gaussian: missing gamma");
    t = make_generalized_gaussian(spec.get("gamma", 0.0), d);
  } else if (spec.name == "pareto_mixture") {
    if (d != 1) throw std::invalid_argument("pareto_mixture: only d=1 is available");
    if (!spec.has("gamma")) throw std::invalid_argument("pareto_mixture: missing gamma");
    t = make_pareto_mixture(spec.get("gamma", 0.0));
  } else if (spec.name == "gaussian_mixture") {
    auto need = [&](const char* key) -> const std::vector<double>& {
      auto it = spec.args.find(key);
      if (it == spec.args.end()) throw std::invalid_argument(std::string("gaussian_mixture: missing ") + key);
      return it->second;
    };
    GaussianMixture mix;
    mix.weights = need("weights");
    mix.scales = need("scales");
    const auto& means = need("means");
    if (means.size() != mix.weights.size() * static_cast<std::size_t>(d))
      throw std::invalid_argument("gaussian_mixture: means must list k*d values");
    mix.means = Matrix(mix.weights.size(), d, means);
    t = make_gaussian_mixture(std::move(mix));
  } else {
    throw std::invalid_argument("unknown target '" + spec.name + "'");
  }
  return t;
}

TargetDistribution make_builtin_target(const std::string& spec) { return make_builtin_target(BuiltinSpec::parse(spec)); }

}  // namespace tailscore
