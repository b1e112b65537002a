#pragma once

#include <charconv>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "an2cls/problem.hpp"

namespace an2cls::problems {

namespace detail {

/// f(x) = sum_i phi(x_i). The Hessian is diagonal.
template <class Phi, class DPhi, class D2Phi>
Problem separable(std::string name, Vector x0, Phi phi, DPhi dphi, D2Phi d2phi,
                  ProblemMetadata meta) {
  auto value = [phi](const Vector& x) {
    double f = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) f += phi(i, x[i]);
    return f;
  };
  auto gradient = [dphi](const Vector& x) {
    Vector g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) g[i] = dphi(i, x[i]);
    return g;
  };
  auto hv = [d2phi](const Vector& x, const Vector& v) {
    Vector out(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) out[i] = d2phi(i, x[i]) * v[i];
    return out;
  };
  auto hess = [d2phi](const Vector& x) {
    Matrix H = Matrix::Zero(x.size(), x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) H(i, i) = d2phi(i, x[i]);
    return H;
  };
  return Problem(std::move(name), std::move(x0), value, gradient, hv, hess,
                 meta);
}

/// Problems of small fixed dimension supply a dense Hessian; the product is
/// taken through it so both paths agree exactly.
template <class F, class G, class H>
Problem dense_small(std::string name, Vector x0, F f, G g, H hess,
                    ProblemMetadata meta) {
  auto hv = [hess](const Vector& x, const Vector& v) -> Vector {
    return hess(x) * v;
  };
  return Problem(std::move(name), std::move(x0), f, g, hv, hess, meta);
}

inline std::string with_dim(std::string_view family, Eigen::Index n) {
  return std::string(family) + "_" + std::to_string(n);
}

}  // namespace detail

/// sum_i x_i^4 - x_i^2. Minimizers at x_i = +-1/sqrt(2); origin is a maximum.
inline Problem separable_quartic(Eigen::Index n) {
  Vector x0(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mag = 0.3 + 1.7 * static_cast<double>(i + 1) / n;
    x0[i] = (i % 2 == 0) ? mag : -mag;
  }
  ProblemMetadata meta;
  meta.f_low = -0.25 * static_cast<double>(n);
  return detail::separable(
      detail::with_dim("quartic", n), x0,
      [](Eigen::Index, double t) { return t * t * t * t - t * t; },
      [](Eigen::Index, double t) { return 4.0 * t * t * t - 2.0 * t; },
      [](Eigen::Index, double t) { return 12.0 * t * t - 2.0; }, meta);
}

/// sum_i exp(x_i) - x_i, minimized at the origin with value n.
inline Problem exp_sum(Eigen::Index n) {
  Vector x0(n);
  for (Eigen::Index i = 0; i < n; ++i)
    x0[i] = -1.0 + 3.0 * static_cast<double>(i + 1) / n;
  ProblemMetadata meta;
  meta.f_low = static_cast<double>(n);
  return detail::separable(
      detail::with_dim("exp_sum", n), x0,
      [](Eigen::Index, double t) { return std::exp(t) - t; },
      [](Eigen::Index, double t) { return std::exp(t) - 1.0; },
      [](Eigen::Index, double t) { return std::exp(t); }, meta);
}

/// 0.5 * sum_i (x_i^4 - 16 x_i^2 + 5 x_i). Strongly nonconvex near the origin.
inline Problem styblinski_tang(Eigen::Index n) {
  Vector x0(n);
  for (Eigen::Index i = 0; i < n; ++i)
    x0[i] = 0.5 * std::sin(static_cast<double>(i + 1));
  ProblemMetadata meta;
  meta.f_low = -39.1662 * static_cast<double>(n);
  return detail::separable(
      detail::with_dim("styblinski_tang", n), x0,
      [](Eigen::Index, double t) {
        return 0.5 * (t * t * t * t - 16.0 * t * t + 5.0 * t);
      },
      [](Eigen::Index, double t) {
        return 0.5 * (4.0 * t * t * t - 32.0 * t + 5.0);
      },
      [](Eigen::Index, double t) { return 0.5 * (12.0 * t * t - 32.0); },
      meta);
}

/// sum_{i<m} (x_i^2 - 1)^2 + sum_{i>=m} x_i^2 with m = max(1, n/2), started
/// at the origin: zero gradient, Hessian diag(-4,...,-4, 2,...,2).
inline Problem strict_saddle(Eigen::Index n) {
  const Eigen::Index m = std::max<Eigen::Index>(1, n / 2);
  ProblemMetadata meta;
  meta.f_low = 0.0;
  meta.kappa_B = 4.0;
  return detail::separable(
      detail::with_dim("saddle", n), Vector::Zero(n),
      [m](Eigen::Index i, double t) {
        return i < m ? (t * t - 1.0) * (t * t - 1.0) : t * t;
      },
      [m](Eigen::Index i, double t) {
        return i < m ? 4.0 * t * (t * t - 1.0) : 2.0 * t;
      },
      [m](Eigen::Index i, double t) {
        return i < m ? 12.0 * t * t - 4.0 : 2.0;
      },
      meta);
}

/// 0.5 * sum_i x_i^2 from a caller-chosen start.
inline Problem isotropic_quadratic(Vector x0) {
  const Eigen::Index n = x0.size();
  ProblemMetadata meta;
  meta.f_low = 0.0;
  return Problem(
      detail::with_dim("sphere", n), std::move(x0),
      [](const Vector& x) { return 0.5 * x.squaredNorm(); },
      [](const Vector& x) -> Vector { return x; },
      [](const Vector&, const Vector& v) -> Vector { return v; },
      [](const Vector& x) -> Matrix {
        return Matrix::Identity(x.size(), x.size());
      },
      meta);
}

/// 0.5 x'Ax - 1'x with A tridiagonal, A_ii = 3 + (i mod 5), A_i,i+1 = -1.
/// Strictly diagonally dominant, hence positive definite.
inline Problem convex_quadratic(Eigen::Index n) {
  auto diag = [](Eigen::Index i) { return 3.0 + static_cast<double>(i % 5); };
  auto apply = [diag](const Vector& v) {
    const Eigen::Index m = v.size();
    Vector out(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      double acc = diag(i) * v[i];
      if (i > 0) acc -= v[i - 1];
      if (i + 1 < m) acc -= v[i + 1];
      out[i] = acc;
    }
    return out;
  };
  return Problem(
      detail::with_dim("quadratic", n), Vector::Zero(n),
      [apply](const Vector& x) { return 0.5 * x.dot(apply(x)) - x.sum(); },
      [apply](const Vector& x) -> Vector {
        return apply(x) - Vector::Ones(x.size());
      },
      [apply](const Vector&, const Vector& v) -> Vector { return apply(v); });
}

/// sum_i (x_i - 1)^2 - sum_{i>0} x_i x_{i-1}. Convex, f_low = -n(n+4)(n-1)/6.
inline Problem trid(Eigen::Index n) {
  ProblemMetadata meta;
  const double dn = static_cast<double>(n);
  meta.f_low = -dn * (dn + 4.0) * (dn - 1.0) / 6.0;
  return Problem(
      detail::with_dim("trid", n), Vector::Zero(n),
      [](const Vector& x) {
        double f = (x.array() - 1.0).square().sum();
        for (Eigen::Index i = 1; i < x.size(); ++i) f -= x[i] * x[i - 1];
        return f;
      },
      [](const Vector& x) -> Vector {
        const Eigen::Index m = x.size();
        Vector g = 2.0 * (x.array() - 1.0).matrix();
        for (Eigen::Index i = 1; i < m; ++i) {
          g[i] -= x[i - 1];
          g[i - 1] -= x[i];
        }
        return g;
      },
      [](const Vector&, const Vector& v) -> Vector {
        const Eigen::Index m = v.size();
        Vector out = 2.0 * v;
        for (Eigen::Index i = 1; i < m; ++i) {
          out[i] -= v[i - 1];
          out[i - 1] -= v[i];
        }
        return out;
      },
      {}, meta);
}

/// sum_{i<n-1} 100 (x_{i+1} - x_i^2)^2 + (1 - x_i)^2 from (-1.2, 1, -1.2, ...).
/// For n = 2 this is the classic Rosenbrock function.
inline Problem chained_rosenbrock(Eigen::Index n) {
  if (n < 2) throw ConfigError("chained_rosenbrock needs n >= 2");
  Vector x0(n);
  for (Eigen::Index i = 0; i < n; ++i) x0[i] = (i % 2 == 0) ? -1.2 : 1.0;
  ProblemMetadata meta;
  meta.f_low = 0.0;
  return Problem(
      n == 2 ? std::string("rosenbrock") : detail::with_dim("chained_rosenbrock", n),
      x0,
      [](const Vector& x) {
        double f = 0.0;
        for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
          const double a = x[i + 1] - x[i] * x[i];
          const double b = 1.0 - x[i];
          f += 100.0 * a * a + b * b;
        }
        return f;
      },
      [](const Vector& x) -> Vector {
        Vector g = Vector::Zero(x.size());
        for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
          const double a = x[i + 1] - x[i] * x[i];
          g[i] += -400.0 * x[i] * a - 2.0 * (1.0 - x[i]);
          g[i + 1] += 200.0 * a;
        }
        return g;
      },
      [](const Vector& x, const Vector& v) -> Vector {
        Vector out = Vector::Zero(x.size());
        for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
          const double hii = 1200.0 * x[i] * x[i] - 400.0 * x[i + 1] + 2.0;
          const double hij = -400.0 * x[i];
          out[i] += hii * v[i] + hij * v[i + 1];
          out[i + 1] += hij * v[i] + 200.0 * v[i + 1];
        }
        return out;
      },
      {}, meta);
}

/// (x1-1)^2 + sum_{i>=2} i (2 x_i^2 - x_{i-1})^2, started at the ones vector.
inline Problem dixon_price(Eigen::Index n) {
  if (n < 2) throw ConfigError("dixon_price needs n >= 2");
  ProblemMetadata meta;
  meta.f_low = 0.0;
  return Problem(
      detail::with_dim("dixon_price", n), Vector::Ones(n),
      [](const Vector& x) {
        double f = (x[0] - 1.0) * (x[0] - 1.0);
        for (Eigen::Index j = 1; j < x.size(); ++j) {
          const double t = 2.0 * x[j] * x[j] - x[j - 1];
          f += static_cast<double>(j + 1) * t * t;
        }
        return f;
      },
      [](const Vector& x) -> Vector {
        Vector g = Vector::Zero(x.size());
        g[0] = 2.0 * (x[0] - 1.0);
        for (Eigen::Index j = 1; j < x.size(); ++j) {
          const double w = static_cast<double>(j + 1);
          const double t = 2.0 * x[j] * x[j] - x[j - 1];
          g[j] += 8.0 * w * t * x[j];
          g[j - 1] -= 2.0 * w * t;
        }
        return g;
      },
      [](const Vector& x, const Vector& v) -> Vector {
        Vector out = Vector::Zero(x.size());
        out[0] = 2.0 * v[0];
        for (Eigen::Index j = 1; j < x.size(); ++j) {
          const double w = static_cast<double>(j + 1);
          const double t = 2.0 * x[j] * x[j] - x[j - 1];
          const double hjj = 2.0 * w * (16.0 * x[j] * x[j] + 4.0 * t);
          const double hij = -8.0 * w * x[j];
          out[j - 1] += 2.0 * w * v[j - 1] + hij * v[j];
          out[j] += hij * v[j - 1] + hjj * v[j];
        }
        return out;
      },
      {}, meta);
}

inline Problem beale() {
  ProblemMetadata meta;
  meta.f_low = 0.0;
  return detail::dense_small(
      "beale", Vector::Ones(2),
      [](const Vector& z) {
        const double x = z[0], y = z[1];
        const double t1 = 1.5 - x + x * y;
        const double t2 = 2.25 - x + x * y * y;
        const double t3 = 2.625 - x + x * y * y * y;
        return t1 * t1 + t2 * t2 + t3 * t3;
      },
      [](const Vector& z) -> Vector {
        const double x = z[0], y = z[1];
        const double t1 = 1.5 - x + x * y;
        const double t2 = 2.25 - x + x * y * y;
        const double t3 = 2.625 - x + x * y * y * y;
        Vector g(2);
        g[0] = 2.0 * (t1 * (y - 1.0) + t2 * (y * y - 1.0) + t3 * (y * y * y - 1.0));
        g[1] = 2.0 * (t1 * x + t2 * 2.0 * x * y + t3 * 3.0 * x * y * y);
        return g;
      },
      [](const Vector& z) -> Matrix {
        const double x = z[0], y = z[1];
        const double t1 = 1.5 - x + x * y;
        const double t2 = 2.25 - x + x * y * y;
        const double t3 = 2.625 - x + x * y * y * y;
        const Eigen::Vector2d d1(y - 1.0, x);
        const Eigen::Vector2d d2(y * y - 1.0, 2.0 * x * y);
        const Eigen::Vector2d d3(y * y * y - 1.0, 3.0 * x * y * y);
        Eigen::Matrix2d s1, s2, s3;
        s1 << 0.0, 1.0, 1.0, 0.0;
        s2 << 0.0, 2.0 * y, 2.0 * y, 2.0 * x;
        s3 << 0.0, 3.0 * y * y, 3.0 * y * y, 6.0 * x * y;
        Matrix H = 2.0 * (d1 * d1.transpose() + t1 * s1 + d2 * d2.transpose() +
                          t2 * s2 + d3 * d3.transpose() + t3 * s3);
        return H;
      },
      meta);
}

inline Problem wood() {
  ProblemMetadata meta;
  meta.f_low = 0.0;
  Vector x0(4);
  x0 << -3.0, -1.0, -3.0, -1.0;
  return detail::dense_small(
      "wood", x0,
      [](const Vector& x) {
        const double a = x[0] * x[0] - x[1];
        const double b = x[2] * x[2] - x[3];
        return 100.0 * a * a + (x[0] - 1.0) * (x[0] - 1.0) +
               (x[2] - 1.0) * (x[2] - 1.0) + 90.0 * b * b +
               10.1 * ((x[1] - 1.0) * (x[1] - 1.0) + (x[3] - 1.0) * (x[3] - 1.0)) +
               19.8 * (x[1] - 1.0) * (x[3] - 1.0);
      },
      [](const Vector& x) -> Vector {
        const double a = x[0] * x[0] - x[1];
        const double b = x[2] * x[2] - x[3];
        Vector g(4);
        g[0] = 400.0 * x[0] * a + 2.0 * (x[0] - 1.0);
        g[1] = -200.0 * a + 20.2 * (x[1] - 1.0) + 19.8 * (x[3] - 1.0);
        g[2] = 2.0 * (x[2] - 1.0) + 360.0 * x[2] * b;
        g[3] = -180.0 * b + 20.2 * (x[3] - 1.0) + 19.8 * (x[1] - 1.0);
        return g;
      },
      [](const Vector& x) -> Matrix {
        Matrix H = Matrix::Zero(4, 4);
        H(0, 0) = 1200.0 * x[0] * x[0] - 400.0 * x[1] + 2.0;
        H(0, 1) = H(1, 0) = -400.0 * x[0];
        H(1, 1) = 220.2;
        H(1, 3) = H(3, 1) = 19.8;
        H(2, 2) = 1080.0 * x[2] * x[2] - 360.0 * x[3] + 2.0;
        H(2, 3) = H(3, 2) = -360.0 * x[2];
        H(3, 3) = 200.2;
        return H;
      },
      meta);
}

/// Powell's singular function; the Hessian is singular at the minimizer.
inline Problem powell_singular() {
  ProblemMetadata meta;
  meta.f_low = 0.0;
  Vector x0(4);
  x0 << 3.0, -1.0, 0.0, 1.0;
  return detail::dense_small(
      "powell_singular", x0,
      [](const Vector& x) {
        const double a = x[0] + 10.0 * x[1];
        const double b = x[2] - x[3];
        const double c = x[1] - 2.0 * x[2];
        const double d = x[0] - x[3];
        return a * a + 5.0 * b * b + c * c * c * c + 10.0 * d * d * d * d;
      },
      [](const Vector& x) -> Vector {
        const double a = x[0] + 10.0 * x[1];
        const double b = x[2] - x[3];
        const double c = x[1] - 2.0 * x[2];
        const double d = x[0] - x[3];
        Vector g(4);
        g[0] = 2.0 * a + 40.0 * d * d * d;
        g[1] = 20.0 * a + 4.0 * c * c * c;
        g[2] = 10.0 * b - 8.0 * c * c * c;
        g[3] = -10.0 * b - 40.0 * d * d * d;
        return g;
      },
      [](const Vector& x) -> Matrix {
        const double c = x[1] - 2.0 * x[2];
        const double d = x[0] - x[3];
        Eigen::Vector4d da(1.0, 10.0, 0.0, 0.0);
        Eigen::Vector4d db(0.0, 0.0, 1.0, -1.0);
        Eigen::Vector4d dc(0.0, 1.0, -2.0, 0.0);
        Eigen::Vector4d dd(1.0, 0.0, 0.0, -1.0);
        Matrix H = 2.0 * da * da.transpose() + 10.0 * db * db.transpose() +
                   12.0 * c * c * dc * dc.transpose() +
                   120.0 * d * d * dd * dd.transpose();
        return H;
      },
      meta);
}

enum class SuiteScale { small, medium, large };

inline SuiteScale parse_scale(std::string_view s) {
  if (s == "small") return SuiteScale::small;
  if (s == "medium") return SuiteScale::medium;
  if (s == "large") return SuiteScale::large;
  throw ConfigError("unknown suite scale '" + std::string(s) + "'");
}

/// Bundled analytic problems in three dimension brackets:
/// small 2..49, medium 50..997, large 1000..5000.
inline std::vector<Problem> builtin_suite(SuiteScale scale) {
  std::vector<Problem> out;
  switch (scale) {
    case SuiteScale::small:
      out.push_back(chained_rosenbrock(2));
      out.push_back(chained_rosenbrock(10));
      out.push_back(beale());
      out.push_back(wood());
      out.push_back(powell_singular());
      out.push_back(separable_quartic(10));
      out.push_back(exp_sum(20));
      out.push_back(convex_quadratic(10));
      out.push_back(trid(20));
      out.push_back(strict_saddle(4));
      out.push_back(dixon_price(10));
      out.push_back(styblinski_tang(10));
      break;
    case SuiteScale::medium:
      out.push_back(separable_quartic(100));
      out.push_back(exp_sum(50));
      out.push_back(chained_rosenbrock(100));
      out.push_back(convex_quadratic(200));
      out.push_back(trid(500));
      out.push_back(styblinski_tang(50));
      out.push_back(dixon_price(100));
      break;
    case SuiteScale::large:
      out.push_back(separable_quartic(5000));
      out.push_back(exp_sum(1000));
      out.push_back(chained_rosenbrock(1000));
      out.push_back(convex_quadratic(2000));
      break;
  }
  return out;
}

/// Looks a problem up by name. Parametric families accept any dimension via
/// the "family_N" form, e.g. "quartic_37".
inline Problem find_problem(std::string_view name) {
  if (name == "rosenbrock") return chained_rosenbrock(2);
  if (name == "beale") return beale();
  if (name == "wood") return wood();
  if (name == "powell_singular") return powell_singular();
  const auto cut = name.rfind('_');
  if (cut == std::string_view::npos || cut + 1 >= name.size())
    throw ConfigError("unknown problem '" + std::string(name) + "'");
  const std::string_view family = name.substr(0, cut);
  const std::string_view digits = name.substr(cut + 1);
  long n = 0;
  const auto [ptr, ec] =
      std::from_chars(digits.data(), digits.data() + digits.size(), n);
  if (ec != std::errc() || ptr != digits.data() + digits.size() || n < 1)
    throw ConfigError("bad dimension in problem name '" + std::string(name) + "'");
  if (family == "quartic") return separable_quartic(n);
  if (family == "exp_sum") return exp_sum(n);
  if (family == "styblinski_tang") return styblinski_tang(n);
  if (family == "saddle") return strict_saddle(n);
  if (family == "sphere") return isotropic_quadratic(Vector::Ones(n));
  if (family == "quadratic") return convex_quadratic(n);
  if (family == "trid") return trid(n);
  if (family == "chained_rosenbrock") return chained_rosenbrock(n);
  if (family == "dixon_price") return dixon_price(n);
  throw ConfigError("unknown problem family '" + std::string(family) + "'");
}

}  // namespace an2cls::problems
