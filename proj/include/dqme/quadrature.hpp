#ifndef DQME_QUADRATURE_HPP
#define DQME_QUADRATURE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <span>
#include <type_traits>
#include <vector>

#include <Eigen/Core>

namespace dqme
{

template <typename Scalar>
struct QuadratureResult
{
    Scalar value{};
    double error    = 0.0;
    int evaluations = 0;
    bool converged  = false;
};

namespace detail
{

// 15-point Kronrod extension of the 7-point Gauss rule.
inline constexpr std::array<double, 8> kronrod_nodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};

inline constexpr std::array<double, 8> kronrod_weights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};

inline constexpr std::array<double, 4> gauss_weights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <typename Scalar>
struct Panel
{
    double a;
    double b;
    Scalar value;
    double error;
    bool operator<(const Panel& other) const { return error < other.error; }
};

template <typename Scalar>
inline double magnitude(const Scalar& v)
{
    return std::abs(v);
}

template <typename Scalar, typename F>
Panel<Scalar> gk15(F& f, double a, double b)
{
    const double center = 0.5 * (a + b);
    const double half   = 0.5 * (b - a);

    Scalar fc      = f(center);
    Scalar kronrod = fc * kronrod_weights[7];
    Scalar gauss   = fc * gauss_weights[3];
    for (int j = 0; j < 7; ++j)
    {
        const double dx = half * kronrod_nodes[j];
        const Scalar s  = f(center - dx) + f(center + dx);
        kronrod += s * kronrod_weights[j];
        if (j % 2 == 1)
            gauss += s * gauss_weights[j / 2];
    }
    kronrod *= half;
    gauss *= half;
    return {a, b, kronrod, magnitude(Scalar(kronrod - gauss))};
}

} // namespace detail

///
/// Globally adaptive Gauss-Kronrod (7/15) quadrature over the union of the
/// panels delimited by `breakpoints`. The panel with the largest error
/// estimate is bisected until the summed estimate drops below
/// `max(abs_tol, rel_tol * |I|)` or `max_panels` is reached.
///
/// \tparam Scalar  `double` or `std::complex<double>`.
///
template <typename Scalar, typename F>
QuadratureResult<Scalar> integrate_adaptive(F&& f, std::span<const double> breakpoints,
                                            double abs_tol, double rel_tol,
                                            int max_panels = 100000)
{
    using detail::Panel;
    std::priority_queue<Panel<Scalar>> heap;
    Scalar total{};
    double total_error = 0.0;
    int evaluations    = 0;

    for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i)
    {
        auto p = detail::gk15<Scalar>(f, breakpoints[i], breakpoints[i + 1]);
        evaluations += 15;
        total += p.value;
        total_error += p.error;
        heap.push(p);
    }

    auto tolerance = [&] { return std::max(abs_tol, rel_tol * detail::magnitude(total)); };

    while (total_error > tolerance() && static_cast<int>(heap.size()) < max_panels)
    {
        Panel<Scalar> worst = heap.top();
        const double mid    = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b))
            break; // panel collapsed to machine resolution
        heap.pop();
        auto left  = detail::gk15<Scalar>(f, worst.a, mid);
        auto right = detail::gk15<Scalar>(f, mid, worst.b);
        evaluations += 30;
        total += left.value + right.value - worst.value;
        total_error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }

    // Re-sum to shed the drift accumulated by the incremental updates.
    Scalar resummed{};
    double error = 0.0;
    while (!heap.empty())
    {
        resummed += heap.top().value;
        error += heap.top().error;
        heap.pop();
    }
    return {resummed, error, evaluations, error <= std::max(abs_tol, rel_tol * detail::magnitude(resummed))};
}

template <typename Scalar, typename F>
QuadratureResult<Scalar> integrate_adaptive(F&& f, double a, double b, double abs_tol,
                                            double rel_tol, int max_panels = 100000)
{
    const std::array<double, 2> ends{a, b};
    return integrate_adaptive<Scalar>(std::forward<F>(f), std::span<const double>(ends), abs_tol,
                                      rel_tol, max_panels);
}

/// Composite trapezoid rule on uniformly spaced samples.
template <typename Derived>
auto trapezoid(const Eigen::MatrixBase<Derived>& samples, double spacing)
{
    using Scalar = typename Derived::Scalar;
    const auto n = samples.size();
    if (n < 2)
        return Scalar(0);
    Scalar s = 0.5 * (samples(0) + samples(n - 1));
    for (Eigen::Index i = 1; i + 1 < n; ++i)
        s += samples(i);
    return s * spacing;
}

} // namespace dqme

#endif
